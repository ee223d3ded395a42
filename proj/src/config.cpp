#include "cohort/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "cohort/core.hpp"

namespace cohort {
namespace {

using nlohmann::json;

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  std::vector<std::string> unknown;
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) unknown.push_back(k);
  }
  if (unknown.empty()) return;
  std::string msg = "unknown " + where + " keys:";
  for (const auto& k : unknown) msg += " " + k;
  throw ValidationError(msg);
}

}  // namespace

void EngineConfig::validate() const {
  if (!(eps > 0)) throw ValidationError("eps must be > 0");
  if (!(density_fraction > 0 && density_fraction < 1)) {
    throw ValidationError("density_fraction must lie in (0, 1)");
  }
  if (min_pts_floor < 1) throw ValidationError("min_pts_floor must be >= 1");
  if (cv_folds < 2) throw ValidationError("cv_folds must be >= 2");
  if (smote_neighbors < 1) throw ValidationError("smote_neighbors must be >= 1");
  if (score_threshold < UclaScore::kMin || score_threshold > UclaScore::kMax) {
    throw ValidationError("score_threshold must lie in [10, 40]");
  }
  if (!(pca_variance_target > 0 && pca_variance_target <= 1)) {
    throw ValidationError("pca_variance_target must lie in (0, 1]");
  }
  if (refit_every_n_weeks < 0) throw ValidationError("refit_every_n_weeks must be >= 0");
  if (min_cohort_size < 1) throw ValidationError("min_cohort_size must be >= 1");
  if (min_class_count < 2) throw ValidationError("min_class_count must be >= 2");
  if (!(holdout_fraction >= 0 && holdout_fraction < 1)) {
    throw ValidationError("holdout_fraction must lie in [0, 1)");
  }
  const auto& l = learners;
  if (!(l.l2 > 0)) throw ValidationError("learners.l2 must be > 0");
  if (l.logreg_iterations < 0 || l.svm_epochs < 0 || l.gbt_rounds < 0) {
    throw ValidationError("learner iteration counts must be >= 0");
  }
  if (!(l.logreg_step > 0)) throw ValidationError("learners.logreg_step must be > 0");
  if (l.forest_trees < 1 || l.forest_max_depth < 1 || l.gbt_max_depth < 1) {
    throw ValidationError("forest_trees, forest_max_depth and gbt_max_depth must be >= 1");
  }
  if (!(l.gbt_learning_rate > 0)) throw ValidationError("learners.gbt_learning_rate must be > 0");
}

nlohmann::json to_json(const EngineConfig& c) {
  const auto& l = c.learners;
  return json{
      {"eps", c.eps},
      {"density_fraction", c.density_fraction},
      {"min_pts_floor", c.min_pts_floor},
      {"cv_folds", c.cv_folds},
      {"smote_neighbors", c.smote_neighbors},
      {"score_threshold", c.score_threshold},
      {"pca_variance_target", c.pca_variance_target},
      {"rng_seed", c.rng_seed},
      {"refit_every_n_weeks", c.refit_every_n_weeks},
      {"min_cohort_size", c.min_cohort_size},
      {"min_class_count", c.min_class_count},
      {"holdout_fraction", c.holdout_fraction},
      {"learners",
       {{"l2", l.l2},
        {"logreg_iterations", l.logreg_iterations},
        {"logreg_step", l.logreg_step},
        {"svm_epochs", l.svm_epochs},
        {"forest_trees", l.forest_trees},
        {"forest_max_depth", l.forest_max_depth},
        {"gbt_rounds", l.gbt_rounds},
        {"gbt_max_depth", l.gbt_max_depth},
        {"gbt_learning_rate", l.gbt_learning_rate}}},
  };
}

EngineConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  reject_unknown(j,
                 {"eps", "density_fraction", "min_pts_floor", "cv_folds", "smote_neighbors",
                  "score_threshold", "pca_variance_target", "rng_seed", "refit_every_n_weeks",
                  "min_cohort_size", "min_class_count", "holdout_fraction", "learners"},
                 "config");
  EngineConfig c;
  read_key(j, "eps", c.eps);
  read_key(j, "density_fraction", c.density_fraction);
  read_key(j, "min_pts_floor", c.min_pts_floor);
  read_key(j, "cv_folds", c.cv_folds);
  read_key(j, "smote_neighbors", c.smote_neighbors);
  read_key(j, "score_threshold", c.score_threshold);
  read_key(j, "pca_variance_target", c.pca_variance_target);
  read_key(j, "rng_seed", c.rng_seed);
  read_key(j, "refit_every_n_weeks", c.refit_every_n_weeks);
  read_key(j, "min_cohort_size", c.min_cohort_size);
  read_key(j, "min_class_count", c.min_class_count);
  read_key(j, "holdout_fraction", c.holdout_fraction);
  if (j.contains("learners")) {
    const auto& lj = j.at("learners");
    if (!lj.is_object()) throw ValidationError("config key 'learners' must be an object");
    reject_unknown(lj,
                   {"l2", "logreg_iterations", "logreg_step", "svm_epochs", "forest_trees",
                    "forest_max_depth", "gbt_rounds", "gbt_max_depth", "gbt_learning_rate"},
                   "learners");
    auto& l = c.learners;
    read_key(lj, "l2", l.l2);
    read_key(lj, "logreg_iterations", l.logreg_iterations);
    read_key(lj, "logreg_step", l.logreg_step);
    read_key(lj, "svm_epochs", l.svm_epochs);
    read_key(lj, "forest_trees", l.forest_trees);
    read_key(lj, "forest_max_depth", l.forest_max_depth);
    read_key(lj, "gbt_rounds", l.gbt_rounds);
    read_key(lj, "gbt_max_depth", l.gbt_max_depth);
    read_key(lj, "gbt_learning_rate", l.gbt_learning_rate);
  }
  c.validate();
  return c;
}

EngineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace cohort
