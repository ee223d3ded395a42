#include "cohort/engine.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include "cohort/csv.hpp"
#include "cohort/rng.hpp"

namespace cohort::engine {

EngineState initial_state(const EngineConfig& config) {
  config.validate();
  EngineState s;
  s.config = config;
  s.registry = cluster::ClusterRegistry(config.eps, config.density_fraction, config.min_pts_floor);
  return s;
}

std::set<std::string> choose_holdout(const std::map<std::string, int>& labels, double fraction,
                                     std::uint64_t seed) {
  Rng rng(seed);
  std::set<std::string> out;
  for (int cls : {0, 1}) {
    std::vector<std::string> members;
    for (const auto& [pid, label] : labels) {
      if (label == cls) members.push_back(pid);
    }
    rng.shuffle(std::span<std::string>(members));
    const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    out.insert(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(std::min(take, members.size())));
  }
  return out;
}

namespace {

bool refit_due(const EngineConfig& cfg, int week) {
  const int n = cfg.refit_every_n_weeks;
  return n > 0 && week > 1 && (week - 1) % n == 0;
}

/// Refits scaler and projector on every raw profile so far and re-inserts all
/// earlier points in their original order.
void refit(EngineState& s, const std::vector<prep::SegmentProfile>& fresh, int week) {
  std::vector<prep::SegmentProfile> all = s.raw_profiles;
  all.insert(all.end(), fresh.begin(), fresh.end());
  s.pipeline = prep::refit_pipeline(*s.pipeline, all, s.config.pca_variance_target);
  cluster::ClusterRegistry rebuilt(s.config.eps, s.config.density_fraction,
                                   s.config.min_pts_floor);
  for (const auto& p : s.raw_profiles) {
    rebuilt.insert(cluster::point_id(p.participant_id, p.week),
                   prep::project_profile(p, *s.pipeline).values);
  }
  s.registry = std::move(rebuilt);
  log_event(&s.log, week, "info", "pipeline_refit",
            std::to_string(all.size()) + " profiles, " +
                std::to_string(s.pipeline->projector.dimension()) + " components");
}

}  // namespace

std::pair<EngineState, WeeklyReport> step(const EngineState& state, const WeeklyBatch& batch) {
  if (batch.week != state.current_week + 1) {
    throw ValidationError("expected week " + std::to_string(state.current_week + 1) + ", got week " +
                          std::to_string(batch.week));
  }
  if (batch.records.empty()) {
    throw ValidationError("batch for week " + std::to_string(batch.week) + " is empty");
  }
  validate_batch(batch);

  EngineState s = state;
  const EngineConfig& cfg = s.config;
  const int week = batch.week;

  for (const auto& [pid, score] : batch.labels) {
    s.labels[pid] = to_int(label_from_score(score, cfg.score_threshold));
  }
  if (week == 1) {
    s.holdout = choose_holdout(s.labels, cfg.holdout_fraction, mix_seed(cfg.rng_seed, "holdout"));
    s.pipeline = prep::fit_pipeline(batch, cfg.pca_variance_target, &s.log);
    log_event(&s.log, week, "info", "pipeline_fit",
              std::to_string(s.pipeline->projector.dimension()) + " components");
  }

  const auto raw = prep::raw_week(batch, *s.pipeline, &s.log);
  if (refit_due(cfg, week)) refit(s, raw, week);
  if (cfg.refit_every_n_weeks > 0) s.raw_profiles.insert(s.raw_profiles.end(), raw.begin(), raw.end());

  std::map<std::string, Eigen::VectorXd> this_week;  // point id -> vector
  for (const auto& p : raw) {
    const std::string id = cluster::point_id(p.participant_id, week);
    Eigen::VectorXd v = prep::project_profile(p, *s.pipeline).values;
    const auto outcome = s.registry.insert(id, v);
    if (outcome.kind == cluster::InsertOutcome::Kind::SeededNew ||
        outcome.kind == cluster::InsertOutcome::Kind::MergedClusters) {
      log_event(&s.log, week, "info", std::string(cluster::outcome_name(outcome.kind)), id);
    }
    this_week.emplace(id, std::move(v));
  }

  const cluster::IdentityResult ids = cluster::track_identity(s.identity, s.registry.partition());
  for (const auto& [internal, label] : ids.labels) {
    if (!s.identity.last_membership.contains(label)) {
      log_event(&s.log, week, "info", "cohort_emerged", label);
    }
  }
  s.identity = ids.state;
  s.registry.cohort_ids = ids.labels;

  WeeklyReport report;
  report.week = week;
  report.snapshot = cluster::snapshot(s.registry, week);
  std::map<std::string, std::string> assignment;
  for (const auto& [label, members] : report.snapshot.cohorts) {
    for (const auto& m : members) assignment.emplace(m, label);
  }
  for (const auto& [id, v] : this_week) {
    auto it = assignment.find(id);
    if (it == assignment.end()) {
      ++report.noise_count;
      report.assignments.emplace_back(id, "noise");
    } else {
      ++report.cohort_sizes[it->second];
      report.assignments.emplace_back(id, it->second);
    }
  }
  std::vector<std::string> active;
  for (const auto& [label, n] : report.cohort_sizes) active.push_back(label);

  learn::Dataset train;
  for (const auto& p : s.registry.points()) {
    const auto [pid, wk] = cluster::parse_point_id(p.point_id);
    auto lab = s.labels.find(pid);
    if (lab == s.labels.end() || s.holdout.contains(pid)) continue;
    train.rows.push_back({p.vector, lab->second, p.point_id});
  }
  const std::uint64_t model_seed = mix_seed(cfg.rng_seed, "models");
  s.pool = ens::refresh_generic(s.pool, train, cfg, model_seed, week, &s.log);
  s.pool = ens::refresh_specialized(s.pool, report.snapshot, active, train, cfg, model_seed, week,
                                    &s.log);

  if (s.pool.generic) {
    learn::Dataset holdout;
    for (const auto& [id, v] : this_week) {
      const std::string pid = cluster::parse_point_id(id).first;
      auto lab = s.labels.find(pid);
      std::optional<std::string> cohort;
      if (auto it = assignment.find(id); it != assignment.end()) cohort = it->second;
      report.votes.push_back({id, cohort.value_or("noise"), lab == s.labels.end() ? -1 : lab->second,
                              ens::vote(s.pool, v, cohort)});
      if (lab != s.labels.end() && s.holdout.contains(pid)) holdout.rows.push_back({v, lab->second, id});
    }
    if (!holdout.empty()) report.metrics = ens::evaluate_week(s.pool, holdout, assignment).rows;
    report.trained_through[ens::kGenericScope] = s.pool.generic->trained_through_week;
  } else {
    log_event(&s.log, week, "warning", "no_generic_model", "votes and evaluation skipped");
  }
  for (const auto& [label, set] : s.pool.specialized) report.trained_through[label] = set.trained_through_week;

  s.history.push_back({week, report.cohort_sizes, report.noise_count, report.metrics});
  s.current_week = week;
  return {std::move(s), std::move(report)};
}

std::vector<WeeklyBatch> load_batches(const std::filesystem::path& data_dir) {
  if (!std::filesystem::is_directory(data_dir)) {
    throw ValidationError("data directory " + data_dir.string() + " does not exist");
  }
  static const std::regex pattern(R"(week_(\d+)\.csv)");
  std::map<int, std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(data_dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) files[std::stoi(m[1].str())] = entry.path();
  }
  if (files.empty()) throw ValidationError("no week_<n>.csv files in " + data_dir.string());
  std::vector<WeeklyBatch> out;
  for (const auto& [week, path] : files) {
    out.push_back(batch_from_table(parse_csv(read_text_file(path)), week));
  }
  const auto labels_path = data_dir / "labels.csv";
  if (std::filesystem::exists(labels_path) && out.front().week == 1) {
    out.front().labels = labels_from_table(parse_csv(read_text_file(labels_path)));
  }
  return out;
}

namespace {

void write_reports(const std::filesystem::path& dir, const WeeklyReport& r) {
  const std::string n = std::to_string(r.week);
  write_text_file(dir / ("report_week_" + n + ".csv"), report_csv(r));
  write_text_file(dir / ("clusters_week_" + n + ".csv"), clusters_csv(r));
  write_text_file(dir / ("votes_week_" + n + ".csv"), votes_csv(r));
}

}  // namespace

std::vector<WeeklyReport> run_replay(const EngineConfig& config, std::vector<WeeklyBatch> batches,
                                     const ReplayOptions& options) {
  std::sort(batches.begin(), batches.end(),
            [](const WeeklyBatch& a, const WeeklyBatch& b) { return a.week < b.week; });
  EngineState state = options.resume ? load(*options.resume) : initial_state(config);
  if (options.resume && !(state.config == config)) {
    throw ValidationError("checkpoint was written with a different configuration");
  }
  std::erase_if(batches, [&](const WeeklyBatch& b) { return b.week <= state.current_week; });
  int expected = state.current_week + 1;
  for (const auto& b : batches) {
    if (b.week != expected) throw ValidationError("missing batch for week " + std::to_string(expected));
    ++expected;
  }
  if (batches.empty()) throw ValidationError("no batches after week " + std::to_string(state.current_week));

  std::filesystem::create_directories(options.out_dir);
  std::vector<WeeklyReport> reports;
  for (const auto& b : batches) {
    auto [next, report] = step(state, b);
    state = std::move(next);
    write_reports(options.out_dir, report);
    if (options.checkpoint) save(state, *options.checkpoint);
    reports.push_back(std::move(report));
  }

  const auto rows = summarize(state.history);
  write_text_file(options.out_dir / "summary.csv", summary_csv(rows));
  write_text_file(options.out_dir / "summary.json", summary_json(state.history, rows).dump(2) + "\n");
  write_text_file(options.out_dir / "run_log.jsonl", to_json_lines(state.log));
  if (options.plot) {
    for (const std::string metric : {"accuracy", "precision", "recall", "f1"}) {
      write_text_file(options.out_dir / ("plot_" + metric + ".svg"), metric_svg(rows, metric));
    }
    write_text_file(options.out_dir / "plot_cohorts.svg", cohort_svg(state.history));
  }
  return reports;
}

}  // namespace cohort::engine
