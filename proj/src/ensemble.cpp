#include "cohort/ensemble.hpp"

#include <algorithm>
#include <future>
#include <set>

#include "cohort/core.hpp"
#include "cohort/rng.hpp"

namespace cohort::ens {

using learn::Dataset;
using learn::ModelKind;

ModelSet train_model_set(const std::string& scope, const Dataset& data, const EngineConfig& cfg,
                         std::uint64_t seed, int week, const ModelSet* previous) {
  learn::check_dataset(data);
  const std::size_t smaller = std::min(data.count(0), data.count(1));
  const int k = std::min<int>(cfg.cv_folds, static_cast<int>(smaller));
  if (k < 2) {
    throw ValidationError("model set '" + scope + "' needs at least 2 rows of each class");
  }

  struct Trained {
    learn::TrainedModel model;
    double f1;
  };
  auto run = [&](ModelKind kind) {
    const std::uint64_t s = mix_seed(seed, scope + "/" + std::string(learn::kind_name(kind)));
    auto fit = [&](const Dataset& ds, std::uint64_t fs) {
      return learn::train_kind(kind, ds, fs, cfg.learners);
    };
    const learn::CvResult cv = learn::kfold_cv(data, k, fit, s, cfg.smote_neighbors);
    const Dataset balanced =
        cfg.smote_neighbors > 0 && smaller >= 2 ? learn::smote(data, cfg.smote_neighbors, s) : data;
    const learn::TrainedModel* warm = nullptr;
    if (previous) {
      auto it = previous->models.find(kind);
      if (it != previous->models.end()) warm = &it->second;
    }
    return Trained{learn::train_kind(kind, balanced, s, cfg.learners, warm), cv.metrics.f1};
  };

  // The four kinds share nothing mutable, so they train concurrently.
  std::vector<std::future<Trained>> jobs;
  for (ModelKind kind : learn::kAllKinds) jobs.push_back(std::async(std::launch::async, run, kind));

  ModelSet set;
  set.scope = scope;
  set.trained_through_week = week;
  set.training_rows = data.size();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    Trained t = jobs[i].get();
    set.models.emplace(learn::kAllKinds[i], std::move(t.model));
    set.validation_f1[learn::kAllKinds[i]] = t.f1;
  }
  return set;
}

ModelPool refresh_generic(const ModelPool& pool, const Dataset& data, const EngineConfig& cfg,
                          std::uint64_t seed, int week, RunLog* log) {
  if (std::min(data.count(0), data.count(1)) < 2) {
    log_event(log, week, "warning", "generic_not_refreshed",
              "cumulative data has " + std::to_string(data.count(0)) + " negative and " +
                  std::to_string(data.count(1)) + " positive rows");
    return pool;
  }
  ModelPool out = pool;
  out.generic = train_model_set(kGenericScope, data, cfg, seed, week,
                                pool.generic ? &*pool.generic : nullptr);
  log_event(log, week, "info", "generic_refreshed",
            std::to_string(data.size()) + " rows");
  return out;
}

Dataset cohort_rows(const cluster::ClusterSnapshot& snap, const std::string& cohort,
                    const Dataset& data) {
  Dataset out;
  auto it = snap.cohorts.find(cohort);
  if (it == snap.cohorts.end()) return out;
  const std::set<std::string> members(it->second.begin(), it->second.end());
  for (const auto& r : data.rows) {
    if (members.contains(r.participant_id)) out.rows.push_back(r);
  }
  return out;
}

ModelPool refresh_specialized(const ModelPool& pool, const cluster::ClusterSnapshot& snap,
                              const std::vector<std::string>& active, const Dataset& data,
                              const EngineConfig& cfg, std::uint64_t seed, int week,
                              RunLog* log) {
  ModelPool out = pool;
  for (const auto& label : active) {
    const Dataset rows = cohort_rows(snap, label, data);
    const std::size_t n0 = rows.count(0);
    const std::size_t n1 = rows.count(1);
    if (rows.size() < static_cast<std::size_t>(cfg.min_cohort_size) ||
        std::min(n0, n1) < static_cast<std::size_t>(cfg.min_class_count)) {
      log_event(log, week, "info", "specialized_skipped",
                label + ": " + std::to_string(rows.size()) + " rows (" + std::to_string(n0) +
                    " negative, " + std::to_string(n1) + " positive)");
      continue;
    }
    auto prev = pool.specialized.find(label);
    out.specialized[label] = train_model_set(
        label, rows, cfg, seed, week, prev == pool.specialized.end() ? nullptr : &prev->second);
    log_event(log, week, "info", "specialized_refreshed",
              label + ": " + std::to_string(rows.size()) + " rows");
  }
  return out;
}

std::string_view rule_name(VoteRule r) noexcept {
  switch (r) {
    case VoteRule::Majority: return "majority";
    case VoteRule::WeightedF1: return "weighted_f1";
    case VoteRule::GenericOnly: return "generic_only";
  }
  return "unknown";
}

VoteOutcome decide(std::vector<Ballot> ballots, bool generic_only) {
  if (ballots.empty()) throw ValidationError("vote needs at least one ballot");
  // A fixed summation order keeps the weighted sums independent of voter order.
  std::sort(ballots.begin(), ballots.end(),
            [](const Ballot& a, const Ballot& b) { return a.voter < b.voter; });
  VoteOutcome out;
  int ones = 0;
  for (const auto& b : ballots) {
    if (b.vote != 0 && b.vote != 1) throw ValidationError("votes must be 0 or 1");
    if (!out.tally.emplace(b.voter, b.vote).second) {
      throw ValidationError("duplicate voter '" + b.voter + "'");
    }
    ones += b.vote;
  }
  const int zeros = static_cast<int>(ballots.size()) - ones;
  if (ones != zeros) {
    out.prediction = ones > zeros ? 1 : 0;
    out.rule = VoteRule::Majority;
  } else {
    double w1 = 0;
    double w0 = 0;
    for (const auto& b : ballots) (b.vote == 1 ? w1 : w0) += b.weight;
    out.prediction = w0 > w1 ? 0 : 1;
    out.rule = VoteRule::WeightedF1;
  }
  if (generic_only) out.rule = VoteRule::GenericOnly;
  return out;
}

VoteOutcome vote(const ModelPool& pool, const Eigen::VectorXd& x,
                 const std::optional<std::string>& cohort) {
  if (!pool.generic) throw ValidationError("vote needs a generic model set");
  std::vector<Ballot> ballots;
  auto add = [&](const ModelSet& set) {
    for (const auto& [kind, model] : set.models) {
      ballots.push_back({set.scope + "/" + std::string(learn::kind_name(kind)), model.predict(x),
                         set.validation_f1.at(kind)});
    }
  };
  add(*pool.generic);
  bool specialized = false;
  if (cohort) {
    auto it = pool.specialized.find(*cohort);
    if (it != pool.specialized.end()) {
      add(it->second);
      specialized = true;
    }
  }
  return decide(std::move(ballots), !specialized);
}

Evaluation evaluate_week(const ModelPool& pool, const Dataset& holdout,
                         const std::map<std::string, std::string>& assignment) {
  if (holdout.empty()) throw ValidationError("evaluate_week needs hold-out rows");
  if (!pool.generic) throw ValidationError("evaluate_week needs a generic model set");
  learn::check_dataset(holdout);

  std::map<std::string, std::vector<std::size_t>> by_cohort;
  std::vector<std::optional<std::string>> cohort_of(holdout.size());
  for (std::size_t i = 0; i < holdout.size(); ++i) {
    auto it = assignment.find(holdout.rows[i].participant_id);
    if (it != assignment.end()) {
      cohort_of[i] = it->second;
      by_cohort[it->second].push_back(i);
    }
  }

  auto score = [&](const learn::TrainedModel& m, const std::vector<std::size_t>& idx) {
    std::vector<int> pred, lab;
    for (std::size_t i : idx) {
      pred.push_back(m.predict(holdout.rows[i].x));
      lab.push_back(holdout.rows[i].label);
    }
    return learn::compute_metrics(pred, lab);
  };

  Evaluation ev;
  std::vector<std::size_t> all(holdout.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  for (const auto& [kind, m] : pool.generic->models) {
    ev.rows.push_back({"generic", "all", std::string(learn::kind_name(kind)), score(m, all)});
  }
  for (const auto& [label, idx] : by_cohort) {
    for (const auto& [kind, m] : pool.generic->models) {
      ev.rows.push_back({"generic", label, std::string(learn::kind_name(kind)), score(m, idx)});
    }
    auto sit = pool.specialized.find(label);
    if (sit == pool.specialized.end()) continue;
    for (const auto& [kind, m] : sit->second.models) {
      ev.rows.push_back({"specialized", label, std::string(learn::kind_name(kind)), score(m, idx)});
    }
  }

  std::vector<int> pred(holdout.size());
  std::vector<int> lab(holdout.size());
  for (std::size_t i = 0; i < holdout.size(); ++i) {
    const auto& r = holdout.rows[i];
    VoteOutcome v = vote(pool, r.x, cohort_of[i]);
    pred[i] = v.prediction;
    lab[i] = r.label;
    ev.votes.push_back({r.participant_id, cohort_of[i].value_or("noise"), r.label, std::move(v)});
  }
  ev.rows.push_back({"voting", "all", "vote", learn::compute_metrics(pred, lab)});
  for (const auto& [label, idx] : by_cohort) {
    std::vector<int> p, l;
    for (std::size_t i : idx) {
      p.push_back(pred[i]);
      l.push_back(lab[i]);
    }
    ev.rows.push_back({"voting", label, "vote", learn::compute_metrics(p, l)});
  }
  return ev;
}

nlohmann::json to_json(const ModelSet& s) {
  nlohmann::json models = nlohmann::json::object();
  nlohmann::json f1 = nlohmann::json::object();
  for (const auto& [kind, m] : s.models) models[std::string(learn::kind_name(kind))] = learn::model_to_json(m);
  for (const auto& [kind, v] : s.validation_f1) f1[std::string(learn::kind_name(kind))] = v;
  return {{"scope", s.scope},
          {"trained_through_week", s.trained_through_week},
          {"training_rows", s.training_rows},
          {"validation_f1", f1},
          {"models", models}};
}

ModelSet model_set_from_json(const nlohmann::json& j) {
  ModelSet s;
  s.scope = j.at("scope").get<std::string>();
  s.trained_through_week = j.at("trained_through_week").get<int>();
  s.training_rows = j.at("training_rows").get<std::size_t>();
  for (const auto& [k, v] : j.at("models").items()) {
    s.models.emplace(learn::parse_kind(k), learn::model_from_json(v));
  }
  for (const auto& [k, v] : j.at("validation_f1").items()) {
    s.validation_f1[learn::parse_kind(k)] = v.get<double>();
  }
  if (s.models.size() != learn::kAllKinds.size() || s.validation_f1.size() != s.models.size()) {
    throw ValidationError("model set '" + s.scope + "' must hold all four kinds");
  }
  return s;
}

nlohmann::json to_json(const ModelPool& p) {
  nlohmann::json specialized = nlohmann::json::object();
  for (const auto& [label, s] : p.specialized) specialized[label] = to_json(s);
  return {{"generic", p.generic ? to_json(*p.generic) : nlohmann::json()}, {"specialized", specialized}};
}

ModelPool pool_from_json(const nlohmann::json& j) {
  ModelPool p;
  if (!j.at("generic").is_null()) p.generic = model_set_from_json(j.at("generic"));
  for (const auto& [label, s] : j.at("specialized").items()) {
    p.specialized[label] = model_set_from_json(s);
  }
  return p;
}

nlohmann::json to_json(const VoteOutcome& v) {
  return {{"prediction", v.prediction}, {"rule", rule_name(v.rule)}, {"tally", v.tally}};
}

}  // namespace cohort::ens
