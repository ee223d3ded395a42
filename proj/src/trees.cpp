#include <algorithm>
#include <cmath>
#include <numeric>

#include "cohort/core.hpp"
#include "cohort/learners.hpp"
#include "cohort/rng.hpp"

namespace cohort::learn {

double Tree::predict(const Eigen::VectorXd& x) const {
  int i = 0;
  while (nodes[i].feature >= 0) {
    i = x(nodes[i].feature) <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
  }
  return nodes[i].value;
}

int Tree::depth() const {
  std::vector<int> depth(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, depth[i]);
    if (nodes[i].feature >= 0) {
      depth[nodes[i].left] = depth[i] + 1;
      depth[nodes[i].right] = depth[i] + 1;
    }
  }
  return best;
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Per-feature row orders over the full matrix, ties broken by row index.
std::vector<std::vector<int>> presort(const Eigen::MatrixXd& X) {
  std::vector<std::vector<int>> order(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index f = 0; f < X.cols(); ++f) {
    auto& o = order[f];
    o.resize(static_cast<std::size_t>(X.rows()));
    std::iota(o.begin(), o.end(), 0);
    std::stable_sort(o.begin(), o.end(), [&](int a, int b) { return X(a, f) < X(b, f); });
  }
  return order;
}

/// CART on presorted columns. Every feature's array holds the same rows, and
/// each node owns the same [lo, hi) slice of all of them.
class TreeBuilder {
 public:
  enum class Mode { Gini, Squared };

  TreeBuilder(const Eigen::MatrixXd& X, const std::vector<std::vector<int>>& global_order,
              const std::vector<double>& weight, const std::vector<double>& target, Mode mode,
              int max_depth, int features_per_split, double leaf_scale, Rng* rng)
      : X_(X), weight_(weight), target_(target), mode_(mode), max_depth_(max_depth),
        mtry_(features_per_split), leaf_scale_(leaf_scale), rng_(rng),
        go_left_(static_cast<std::size_t>(X.rows()), 0) {
    sorted_.resize(global_order.size());
    for (std::size_t f = 0; f < global_order.size(); ++f) {
      for (int i : global_order[f]) {
        if (weight_[i] > 0) sorted_[f].push_back(i);
      }
    }
    features_.resize(global_order.size());
    std::iota(features_.begin(), features_.end(), 0);
  }

  Tree build() {
    tree_.nodes.clear();
    const int n = sorted_.empty() ? 0 : static_cast<int>(sorted_[0].size());
    grow(0, n, 0);
    return std::move(tree_);
  }

 private:
  struct Stats {
    double w = 0;   // weight
    double s = 0;   // weighted target sum
    double ss = 0;  // weighted squared target sum
  };

  Stats stats(int lo, int hi) const {
    Stats st;
    for (int k = lo; k < hi; ++k) {
      const int i = sorted_[0][k];
      st.w += weight_[i];
      st.s += weight_[i] * target_[i];
      st.ss += weight_[i] * target_[i] * target_[i];
    }
    return st;
  }

  // Lower is better.
  double cost(const Stats& st) const {
    if (st.w <= 0) return 0;
    if (mode_ == Mode::Gini) {
      const double p = st.s / st.w;
      return st.w * 2.0 * p * (1.0 - p);
    }
    return st.ss - st.s * st.s / st.w;
  }

  double leaf_value(const Stats& st) const {
    return st.w > 0 ? leaf_scale_ * st.s / st.w : 0.0;
  }

  int grow(int lo, int hi, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    const Stats st = stats(lo, hi);
    tree_.nodes[id].value = leaf_value(st);
    const double parent = cost(st);
    if (depth >= max_depth_ || hi - lo < 2 || parent <= 1e-12 * std::max(1.0, st.w)) return id;

    // Feature subset for this split.
    const int d = static_cast<int>(features_.size());
    int m = d;
    if (mtry_ < d) {
      m = mtry_;
      for (int j = 0; j < m; ++j) {
        const int pick = j + static_cast<int>(rng_->below(static_cast<std::size_t>(d - j)));
        std::swap(features_[j], features_[pick]);
      }
    }

    int best_feature = -1;
    int best_pos = -1;
    double best_cost = parent - 1e-12 * std::max(1.0, std::abs(parent));
    for (int j = 0; j < m; ++j) {
      const int f = features_[j];
      const auto& col = sorted_[f];
      Stats left;
      for (int k = lo; k < hi - 1; ++k) {
        const int i = col[k];
        left.w += weight_[i];
        left.s += weight_[i] * target_[i];
        left.ss += weight_[i] * target_[i] * target_[i];
        if (!(X_(col[k + 1], f) > X_(i, f))) continue;
        const Stats right{st.w - left.w, st.s - left.s, st.ss - left.ss};
        const double c = cost(left) + cost(right);
        if (c < best_cost) {
          best_cost = c;
          best_feature = f;
          best_pos = k;
        }
      }
    }
    if (best_feature < 0) return id;

    const auto& col = sorted_[best_feature];
    const double a = X_(col[best_pos], best_feature);
    const double b = X_(col[best_pos + 1], best_feature);
    double threshold = a + 0.5 * (b - a);
    if (!(threshold < b)) threshold = a;

    for (int k = lo; k < hi; ++k) go_left_[col[k]] = k <= best_pos;
    for (auto& c : sorted_) {
      std::stable_partition(c.begin() + lo, c.begin() + hi, [&](int i) { return go_left_[i] != 0; });
    }
    const int mid = best_pos + 1;

    tree_.nodes[id].feature = best_feature;
    tree_.nodes[id].threshold = threshold;
    const int left = grow(lo, mid, depth + 1);
    const int right = grow(mid, hi, depth + 1);
    tree_.nodes[id].left = left;
    tree_.nodes[id].right = right;
    return id;
  }

  const Eigen::MatrixXd& X_;
  const std::vector<double>& weight_;
  const std::vector<double>& target_;
  Mode mode_;
  int max_depth_;
  int mtry_;
  double leaf_scale_;
  Rng* rng_;
  std::vector<std::vector<int>> sorted_;
  std::vector<int> features_;
  std::vector<char> go_left_;
  Tree tree_;
};

}  // namespace

TrainedModel train_random_forest(const Dataset& input, std::uint64_t seed,
                                 const LearnerConfig& cfg) {
  check_dataset(input);
  if (input.empty()) throw ValidationError("train_random_forest: empty dataset");
  if (cfg.forest_trees < 1 || cfg.forest_max_depth < 0) {
    throw ValidationError("train_random_forest: invalid tree count or depth");
  }
  const Dataset d = canonical(input);
  const Eigen::MatrixXd X = design_matrix(d);
  std::vector<double> target(d.rows.size());
  for (std::size_t i = 0; i < d.rows.size(); ++i) target[i] = d.rows[i].label;
  const auto order = presort(X);
  const int n = static_cast<int>(X.rows());
  const int mtry = std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(X.cols())))));

  ForestModel forest;
  forest.trees.reserve(static_cast<std::size_t>(cfg.forest_trees));
  Rng rng(mix_seed(seed, "forest"));
  std::vector<double> weight(static_cast<std::size_t>(n));
  for (int t = 0; t < cfg.forest_trees; ++t) {
    std::fill(weight.begin(), weight.end(), 0.0);
    for (int i = 0; i < n; ++i) weight[rng.below(static_cast<std::size_t>(n))] += 1.0;
    TreeBuilder builder(X, order, weight, target, TreeBuilder::Mode::Gini, cfg.forest_max_depth,
                        mtry, 1.0, &rng);
    forest.trees.push_back(builder.build());
  }

  TrainedModel out;
  out.kind = ModelKind::RandomForest;
  out.params = std::move(forest);
  out.seed = seed;
  out.iterations = cfg.forest_trees;
  out.dimension = X.cols();
  return out;
}

TrainedModel train_gbt(const Dataset& input, std::uint64_t seed, const LearnerConfig& cfg) {
  check_dataset(input);
  if (input.empty()) throw ValidationError("train_gbt: empty dataset");
  const std::size_t pos = input.count(1);
  if (pos == 0 || pos == input.size()) {
    throw ValidationError("train_gbt: both classes must be present");
  }
  if (cfg.gbt_rounds < 0 || cfg.gbt_max_depth < 0) {
    throw ValidationError("train_gbt: invalid round count or depth");
  }
  const Dataset d = canonical(input);
  const Eigen::MatrixXd X = design_matrix(d);
  const Eigen::VectorXd y = label_vector(d);
  const auto order = presort(X);
  const int n = static_cast<int>(X.rows());

  BoostModel boost;
  boost.learning_rate = cfg.gbt_learning_rate;
  const double rate = static_cast<double>(pos) / static_cast<double>(n);
  boost.base_score = std::log(rate / (1.0 - rate));

  std::vector<double> weight(static_cast<std::size_t>(n), 1.0);
  std::vector<double> residual(static_cast<std::size_t>(n));
  Eigen::VectorXd F = Eigen::VectorXd::Constant(n, boost.base_score);
  for (int round = 0; round < cfg.gbt_rounds; ++round) {
    for (int i = 0; i < n; ++i) residual[i] = y(i) - sigmoid(F(i));
    TreeBuilder builder(X, order, weight, residual, TreeBuilder::Mode::Squared, cfg.gbt_max_depth,
                        static_cast<int>(X.cols()), cfg.gbt_learning_rate, nullptr);
    Tree tree = builder.build();
    for (int i = 0; i < n; ++i) F(i) += tree.predict(X.row(i).transpose());
    boost.trees.push_back(std::move(tree));
  }

  TrainedModel out;
  out.kind = ModelKind::GBT;
  out.params = std::move(boost);
  out.seed = seed;
  out.iterations = cfg.gbt_rounds;
  out.dimension = X.cols();
  return out;
}

std::vector<double> gbt_loss_curve(const TrainedModel& m, const Dataset& d) {
  const auto* boost = std::get_if<BoostModel>(&m.params);
  if (!boost) throw ValidationError("gbt_loss_curve needs a GBT model");
  const Eigen::MatrixXd X = design_matrix(d);
  const Eigen::VectorXd y = label_vector(d);
  Eigen::VectorXd F = Eigen::VectorXd::Constant(X.rows(), boost->base_score);
  auto loss = [&] {
    double total = 0;
    for (Eigen::Index i = 0; i < F.size(); ++i) {
      const double z = F(i);
      const double sp = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
      total += sp - y(i) * z;
    }
    return total / static_cast<double>(F.size());
  };
  std::vector<double> curve{loss()};
  for (const auto& tree : boost->trees) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) F(i) += tree.predict(X.row(i).transpose());
    curve.push_back(loss());
  }
  return curve;
}

}  // namespace cohort::learn
