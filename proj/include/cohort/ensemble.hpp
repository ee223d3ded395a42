#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cohort/cluster.hpp"
#include "cohort/config.hpp"
#include "cohort/learners.hpp"
#include "cohort/runlog.hpp"

namespace cohort::ens {

inline const std::string kGenericScope = "generic";

struct ModelSet {
  std::string scope;  ///< "generic" or a cohort label
  std::map<learn::ModelKind, learn::TrainedModel> models;
  std::map<learn::ModelKind, double> validation_f1;
  int trained_through_week = 0;
  std::size_t training_rows = 0;
};

struct ModelPool {
  std::optional<ModelSet> generic;
  std::map<std::string, ModelSet> specialized;
};

/// Trains all four kinds on `data`: validation F1 from stratified k-fold
/// (SMOTE inside training folds, cold start), final models on the
/// SMOTE-balanced data with linear kinds warm-started from `previous`.
/// k is min(cfg.cv_folds, smaller class count).
ModelSet train_model_set(const std::string& scope, const learn::Dataset& data,
                         const EngineConfig& cfg, std::uint64_t seed, int week,
                         const ModelSet* previous);

/// Single-class data leaves the pool unchanged and logs a warning.
ModelPool refresh_generic(const ModelPool& pool, const learn::Dataset& data,
                          const EngineConfig& cfg, std::uint64_t seed, int week,
                          RunLog* log = nullptr);

/// Rows of `data` whose participant_id is a member of `cohort` in `snap`.
learn::Dataset cohort_rows(const cluster::ClusterSnapshot& snap, const std::string& cohort,
                           const learn::Dataset& data);

/// Retrains the set of every cohort in `active` that has at least
/// min_cohort_size rows and min_class_count rows of each class. Other
/// cohorts keep their previous set untouched.
ModelPool refresh_specialized(const ModelPool& pool, const cluster::ClusterSnapshot& snap,
                              const std::vector<std::string>& active,
                              const learn::Dataset& data, const EngineConfig& cfg,
                              std::uint64_t seed, int week, RunLog* log = nullptr);

enum class VoteRule { Majority, WeightedF1, GenericOnly };

std::string_view rule_name(VoteRule r) noexcept;

struct Ballot {
  std::string voter;  ///< "<scope>/<kind>"
  int vote = 0;
  double weight = 0;  ///< validation F1 of the voter
};

struct VoteOutcome {
  int prediction = 0;
  std::map<std::string, int> tally;
  VoteRule rule = VoteRule::Majority;

  friend bool operator==(const VoteOutcome&, const VoteOutcome&) = default;
};

/// Strict majority; on a tie the F1-weighted sums decide; if those tie too,
/// predict 1. `generic_only` only changes the reported rule.
VoteOutcome decide(std::vector<Ballot> ballots, bool generic_only);

/// Generic voters plus, when `cohort` names a cohort with a set, its four
/// specialized voters.
VoteOutcome vote(const ModelPool& pool, const Eigen::VectorXd& x,
                 const std::optional<std::string>& cohort);

struct ScopeMetrics {
  std::string scope;   ///< generic | specialized | voting
  std::string cohort;  ///< "all" or a cohort label
  std::string kind;    ///< model kind, or "vote"
  learn::Metrics metrics;
};

struct ParticipantVote {
  std::string point_id;
  std::string cohort;  ///< label or "noise"
  int label = 0;
  VoteOutcome outcome;
};

struct Evaluation {
  std::vector<ScopeMetrics> rows;
  std::vector<ParticipantVote> votes;
};

/// Metrics of every generic kind, every specialized set on its cohort's
/// rows, the generic kinds on those same rows, and the voting ensemble
/// overall and per cohort. `assignment` maps a hold-out row's id to its
/// cohort (absent = noise).
Evaluation evaluate_week(const ModelPool& pool, const learn::Dataset& holdout,
                         const std::map<std::string, std::string>& assignment);

nlohmann::json to_json(const ModelSet& s);
ModelSet model_set_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelPool& p);
ModelPool pool_from_json(const nlohmann::json& j);
nlohmann::json to_json(const VoteOutcome& v);

}  // namespace cohort::ens
