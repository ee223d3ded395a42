#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <numeric>

#include "cohort/cluster.hpp"
#include "cohort/config.hpp"
#include "cohort/core.hpp"
#include "cohort/csv.hpp"
#include "cohort/engine.hpp"
#include "cohort/learners.hpp"
#include "cohort/rng.hpp"
#include "cohort/synthgen.hpp"

namespace fs = std::filesystem;
using namespace cohort;

namespace {

int run_synth(std::uint64_t seed, const fs::path& out_dir, const std::string& plan_path, bool planted) {
  synth::CohortPlan plan = planted ? synth::planted_plan() : synth::default_plan();
  if (!plan_path.empty()) {
    plan = synth::plan_from_json(nlohmann::json::parse(read_text_file(plan_path), nullptr, true));
  }
  const auto profiles = synth::build_default_profiles();
  synth::check_plan(plan, profiles);
  const synth::Cohort cohort = synth::generate_cohort(plan, profiles, seed);
  fs::create_directories(out_dir);
  for (const auto& b : cohort.batches) {
    WeeklyBatch unlabeled = b;
    unlabeled.labels.clear();
    write_text_file(out_dir / ("week_" + std::to_string(b.week) + ".csv"),
                    to_csv(batch_to_table(unlabeled)));
  }
  write_text_file(out_dir / "labels.csv", to_csv(labels_to_table(cohort.scores)));
  write_text_file(out_dir / "plan.json", synth::plan_to_json(plan).dump(2) + "\n");
  return 0;
}

int run_replay(const std::string& config_path, const fs::path& data_dir, const fs::path& out_dir,
               const std::string& checkpoint, const std::string& resume, bool plot) {
  // Read every input before anything is written.
  EngineConfig config;
  if (!config_path.empty()) {
    config = load_config(config_path);
  } else if (!resume.empty()) {
    config = engine::load(resume).config;
  }
  auto batches = engine::load_batches(data_dir);
  engine::ReplayOptions opts;
  opts.out_dir = out_dir;
  if (!checkpoint.empty()) opts.checkpoint = fs::path(checkpoint);
  if (!resume.empty()) opts.resume = fs::path(resume);
  opts.plot = plot;
  engine::run_replay(config, std::move(batches), opts);
  return 0;
}

int run_report(const fs::path& out_dir, int week) {
  const fs::path path = out_dir / ("report_week_" + std::to_string(week) + ".csv");
  if (!fs::exists(path)) throw ValidationError("no report for week " + std::to_string(week) + " in " + out_dir.string());
  const auto rows = engine::read_report_csv(read_text_file(path));
  std::cout << "week " << week << "\n";
  for (const auto& r : rows) {
    std::cout << r.scope << "\t" << r.cohort << "\t" << r.kind << "\taccuracy=" << format_double(r.metrics.accuracy)
              << "\tprecision=" << format_double(r.metrics.precision)
              << "\trecall=" << format_double(r.metrics.recall) << "\tf1=" << format_double(r.metrics.f1)
              << "\n";
  }
  return 0;
}

/// Incremental registry against batch DBSCAN on random point sets.
bool dbscan_oracle() {
  int mismatches = 0;
  int runs = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(mix_seed(seed, "oracle-dbscan"));
    const int dim = 2 + static_cast<int>(rng.below(7));
    std::vector<std::pair<std::string, Eigen::VectorXd>> pts;
    for (int i = 0; i < 200; ++i) {
      Eigen::VectorXd v(dim);
      const double center = static_cast<double>(rng.below(4));
      for (int c = 0; c < dim; ++c) v(c) = center + 0.3 * rng.normal();
      pts.emplace_back("p" + std::to_string(1000 + i), v);
    }
    for (int perm = 0; perm < 5; ++perm) {
      auto order = pts;
      rng.shuffle(std::span(order));
      cluster::ClusterRegistry reg(0.5, 0.05, 4);
      for (const auto& [id, v] : order) reg.insert(id, v);
      const auto batch = cluster::batch_dbscan(pts, 0.5, reg.min_pts());
      ++runs;
      if (cluster::membership_sets(reg.partition()) != cluster::membership_sets(batch) ||
          reg.partition().noise != batch.noise) {
        ++mismatches;
      }
    }
  }
  std::cout << "dbscan: " << runs - mismatches << "/" << runs << " partitions match\n";
  return mismatches == 0;
}

/// Logistic-regression gradient against central differences.
bool gradient_oracle() {
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(mix_seed(seed, "oracle-gradient"));
    const int n = 30;
    const int d = 5;
    Eigen::MatrixXd X(n, d);
    Eigen::VectorXd y(n), w(d);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) X(i, j) = rng.normal();
      y(i) = rng.uniform() < 0.5 ? 0.0 : 1.0;
    }
    for (int j = 0; j < d; ++j) w(j) = rng.normal();
    const double b = rng.normal();
    const double l2 = 0.01;
    const Eigen::VectorXd g = learn::logreg_gradient(X, y, w, b, l2);
    const double h = 1e-6;
    for (int j = 0; j <= d; ++j) {
      Eigen::VectorXd wp = w, wm = w;
      double bp = b, bm = b;
      if (j < d) {
        wp(j) += h;
        wm(j) -= h;
      } else {
        bp += h;
        bm -= h;
      }
      const double fd = (learn::logreg_loss(X, y, wp, bp, l2) - learn::logreg_loss(X, y, wm, bm, l2)) / (2 * h);
      worst = std::max(worst, std::abs(fd - g(j)) / std::max(1e-8, std::max(std::abs(fd), std::abs(g(j)))));
    }
  }
  std::cout << "gradient: max relative error " << format_double(worst) << "\n";
  return worst < 1e-4;
}

int run_oracle(const std::string& suite) {
  bool ok = true;
  if (suite == "dbscan" || suite == "all") ok = dbscan_oracle() && ok;
  if (suite == "gradient" || suite == "all") ok = gradient_oracle() && ok;
  if (!ok) std::cerr << "oracle check failed\n";
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental behavioral clustering and loneliness prediction"};
  app.require_subcommand(1);

  std::uint64_t seed = 42;
  std::string out_dir, plan, config, data_dir, checkpoint, resume, suite = "all";
  bool plot = false;
  bool planted = false;
  int week = 0;

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic cohort as weekly CSV batches");
  synth_cmd->add_option("--seed", seed, "Generator seed");
  synth_cmd->add_option("--out-dir", out_dir, "Output directory")->required();
  synth_cmd->add_option("--plan", plan, "Cohort plan JSON (default: built-in plan)")->check(CLI::ExistingFile);
  synth_cmd->add_flag("--planted", planted, "Plant a group-specific loneliness signal")->excludes("--plan");

  auto* replay_cmd = app.add_subcommand("replay", "Run the weekly loop over a data directory");
  replay_cmd->add_option("--config", config, "EngineConfig JSON")->check(CLI::ExistingFile);
  replay_cmd->add_option("--data-dir", data_dir, "Directory with week_<n>.csv and labels.csv")
      ->required()
      ->check(CLI::ExistingDirectory);
  replay_cmd->add_option("--out-dir", out_dir, "Report directory")->required();
  replay_cmd->add_option("--checkpoint", checkpoint, "Checkpoint written after every week (.csk)");
  replay_cmd->add_option("--resume", resume, "Resume from this checkpoint")->check(CLI::ExistingFile);
  replay_cmd->add_flag("--plot", plot, "Also write SVG charts");

  auto* report_cmd = app.add_subcommand("report", "Print one week's report");
  report_cmd->add_option("--out-dir", out_dir, "Report directory")->required()->check(CLI::ExistingDirectory);
  report_cmd->add_option("--week", week, "Week number")->required()->check(CLI::PositiveNumber);

  auto* oracle_cmd = app.add_subcommand("eval-oracle", "Run the brute-force oracle checks");
  oracle_cmd->add_option("--suite", suite, "dbscan, gradient or all")
      ->check(CLI::IsMember({"dbscan", "gradient", "all"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*synth_cmd) return run_synth(seed, out_dir, plan, planted);
    if (*replay_cmd) return run_replay(config, data_dir, out_dir, checkpoint, resume, plot);
    if (*report_cmd) return run_report(out_dir, week);
    if (*oracle_cmd) return run_oracle(suite);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
