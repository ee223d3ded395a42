#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cohort/config.hpp"

namespace cohort::learn {

struct Row {
  Eigen::VectorXd x;
  int label = 0;
  std::string participant_id;
};

struct Dataset {
  std::vector<Row> rows;

  std::size_t size() const noexcept { return rows.size(); }
  bool empty() const noexcept { return rows.empty(); }
  Eigen::Index dimension() const noexcept { return rows.empty() ? 0 : rows.front().x.size(); }
  std::size_t count(int label) const;
};

/// Throws ValidationError on ragged vectors or labels outside {0, 1}.
void check_dataset(const Dataset& d);

/// Rows sorted by participant id (then label, then vector), the order every
/// seeded sampling step starts from.
Dataset canonical(const Dataset& d);

/// Design matrix and label vector of a dataset, in its row order.
Eigen::MatrixXd design_matrix(const Dataset& d);
Eigen::VectorXd label_vector(const Dataset& d);

// ---------------------------------------------------------------------------
// Metrics

struct Metrics {
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  long tp = 0, fp = 0, fn = 0, tn = 0;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// precision = 1 when nothing was predicted positive and nothing is positive,
/// 0 when nothing was predicted positive but positives exist; recall mirrors
/// this; f1 = 0 when precision + recall = 0.
Metrics compute_metrics(std::span<const int> predictions, std::span<const int> labels);
Metrics metrics_from_counts(long tp, long fp, long fn, long tn);

nlohmann::json to_json(const Metrics& m);

// ---------------------------------------------------------------------------
// SMOTE

/// Adds minority samples x + u (x_nn - x) until both classes have equal
/// counts. Bases cycle through the minority rows in canonical order, x_nn is
/// one of the k nearest minority neighbors (k capped at minority count - 1),
/// u is uniform in [0, 1). Originals are returned first and unchanged.
Dataset smote(const Dataset& d, int k_neighbors, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Models

enum class ModelKind { LogReg, LinearSVM, RandomForest, GBT };

inline constexpr std::array<ModelKind, 4> kAllKinds = {ModelKind::LogReg, ModelKind::LinearSVM,
                                                       ModelKind::RandomForest, ModelKind::GBT};

std::string_view kind_name(ModelKind k) noexcept;
ModelKind parse_kind(std::string_view name);

struct LinearModel {
  Eigen::VectorXd w;
  double b = 0;
  /// SVM step counter, so a warm start continues the 1/(lambda t) schedule.
  long steps = 0;
};

/// Flat binary tree; node 0 is the root. Leaves have feature == -1.
struct TreeNode {
  int feature = -1;
  double threshold = 0;
  double value = 0;
  int left = -1;
  int right = -1;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict(const Eigen::VectorXd& x) const;
  int depth() const;
};

struct ForestModel {
  std::vector<Tree> trees;  ///< leaf value = fraction of class 1 in the leaf
};

struct BoostModel {
  double base_score = 0;  ///< log-odds of the training base rate
  double learning_rate = 0.1;
  std::vector<Tree> trees;  ///< leaf values already include the learning rate
};

struct TrainedModel {
  ModelKind kind = ModelKind::LogReg;
  std::variant<LinearModel, ForestModel, BoostModel> params;
  std::uint64_t seed = 0;
  int iterations = 0;  ///< gradient steps, epochs, trees or rounds
  Eigen::Index dimension = 0;

  /// Probability for LogReg and GBT, fraction of tree votes for the forest,
  /// decision value for the SVM.
  double score(const Eigen::VectorXd& x) const;
  /// 1 when the score reaches 0.5 (0 for the SVM decision value).
  int predict(const Eigen::VectorXd& x) const;
  std::vector<int> predict(const Dataset& d) const;
};

inline constexpr int kModelSchemaVersion = 1;

nlohmann::json model_to_json(const TrainedModel& m);
TrainedModel model_from_json(const nlohmann::json& j);

/// Mean logistic loss plus l2/2 |w|^2 (bias not penalized).
double logreg_loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                   double b, double l2);
/// Gradient with respect to (w, b), bias last.
Eigen::VectorXd logreg_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& w, double b, double l2);

TrainedModel train_logreg(const Dataset& d, std::uint64_t seed, const LearnerConfig& cfg = {},
                          const LinearModel* warm = nullptr);
TrainedModel train_linear_svm(const Dataset& d, std::uint64_t seed, const LearnerConfig& cfg = {},
                              const LinearModel* warm = nullptr);
TrainedModel train_random_forest(const Dataset& d, std::uint64_t seed,
                                 const LearnerConfig& cfg = {});
TrainedModel train_gbt(const Dataset& d, std::uint64_t seed, const LearnerConfig& cfg = {});

/// Training log-loss after each boosting round (index 0 = before any tree).
std::vector<double> gbt_loss_curve(const TrainedModel& m, const Dataset& d);

/// Dispatches on kind; `warm` is used by the linear kinds only.
TrainedModel train_kind(ModelKind kind, const Dataset& d, std::uint64_t seed,
                        const LearnerConfig& cfg, const TrainedModel* warm = nullptr);

// ---------------------------------------------------------------------------
// Cross-validation

using TrainFn = std::function<TrainedModel(const Dataset&, std::uint64_t)>;

/// Stratified fold index per row of `d` (in d's order). Each class is
/// shuffled in canonical order and dealt round-robin, the dealer continuing
/// from one class to the next.
std::vector<int> stratified_folds(const Dataset& d, int k, std::uint64_t seed);

struct CvResult {
  Metrics metrics;               ///< from pooled test predictions
  std::vector<int> fold;         ///< per row of the input
  std::vector<int> predictions;  ///< per row of the input
};

/// Throws ValidationError when k < 2 or a class has fewer than k rows (the
/// message names the largest usable k). SMOTE runs on training folds only,
/// when `smote_neighbors` > 0.
CvResult kfold_cv(const Dataset& d, int k, const TrainFn& train, std::uint64_t seed,
                  int smote_neighbors = 0);

}  // namespace cohort::learn
