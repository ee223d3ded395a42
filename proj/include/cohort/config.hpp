#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

namespace cohort {

/// Hyperparameters of the four learners: fixed defaults that keep runs
/// desk-scale.
struct LearnerConfig {
  double l2 = 1e-3;
  int logreg_iterations = 500;
  double logreg_step = 0.1;
  int svm_epochs = 500;
  int forest_trees = 100;
  int forest_max_depth = 8;
  int gbt_rounds = 100;
  int gbt_max_depth = 3;
  double gbt_learning_rate = 0.1;

  friend bool operator==(const LearnerConfig&, const LearnerConfig&) = default;
};

struct EngineConfig {
  double eps = 0.5;
  double density_fraction = 0.1;
  int min_pts_floor = 5;
  int cv_folds = 10;
  int smote_neighbors = 5;
  int score_threshold = 20;
  double pca_variance_target = 0.90;
  std::uint64_t rng_seed = 42;
  int refit_every_n_weeks = 0;
  int min_cohort_size = 15;
  int min_class_count = 5;
  double holdout_fraction = 0.2;
  LearnerConfig learners;

  /// Throws ValidationError if any invariant fails.
  void validate() const;

  friend bool operator==(const EngineConfig&, const EngineConfig&) = default;
};

nlohmann::json to_json(const EngineConfig& c);

/// Unknown keys are rejected with an error listing all of them.
EngineConfig config_from_json(const nlohmann::json& j);

EngineConfig load_config(const std::filesystem::path& path);

}  // namespace cohort
