#include <cmath>

#include "cohort/core.hpp"
#include "cohort/learners.hpp"

namespace cohort::learn {
namespace {

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void require_both_classes(const Dataset& d, const char* who) {
  if (d.empty()) throw ValidationError(std::string(who) + ": empty dataset");
  if (d.count(0) == 0 || d.count(1) == 0) {
    throw ValidationError(std::string(who) + ": both classes must be present");
  }
}

bool usable_warm(const LinearModel* warm, Eigen::Index dim) {
  return warm != nullptr && warm->w.size() == dim && warm->w.allFinite() && std::isfinite(warm->b);
}

}  // namespace

double logreg_loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                   double b, double l2) {
  const Eigen::VectorXd z = (X * w).array() + b;
  double total = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) total += softplus(z(i)) - y(i) * z(i);
  return total / static_cast<double>(z.size()) + 0.5 * l2 * w.squaredNorm();
}

Eigen::VectorXd logreg_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& w, double b, double l2) {
  const Eigen::VectorXd z = (X * w).array() + b;
  Eigen::VectorXd r(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) r(i) = sigmoid(z(i)) - y(i);
  const double n = static_cast<double>(z.size());
  Eigen::VectorXd g(w.size() + 1);
  g.head(w.size()) = X.transpose() * r / n + l2 * w;
  g(w.size()) = r.sum() / n;
  return g;
}

TrainedModel train_logreg(const Dataset& input, std::uint64_t seed, const LearnerConfig& cfg,
                          const LinearModel* warm) {
  check_dataset(input);
  require_both_classes(input, "train_logreg");
  const Dataset d = canonical(input);
  const Eigen::MatrixXd X = design_matrix(d);
  const Eigen::VectorXd y = label_vector(d);
  const Eigen::Index dim = X.cols();

  LinearModel m;
  m.w = usable_warm(warm, dim) ? warm->w : Eigen::VectorXd::Zero(dim);
  m.b = usable_warm(warm, dim) ? warm->b : 0.0;

  // Full-batch gradient descent; a step that raises the loss is halved and
  // retried, so accepted steps never increase it.
  double step = cfg.logreg_step;
  double loss = logreg_loss(X, y, m.w, m.b, cfg.l2);
  int taken = 0;
  for (int it = 0; it < cfg.logreg_iterations; ++it) {
    const Eigen::VectorXd g = logreg_gradient(X, y, m.w, m.b, cfg.l2);
    if (!(g.squaredNorm() > 0)) break;
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings) {
      const Eigen::VectorXd w = m.w - step * g.head(dim);
      const double b = m.b - step * g(dim);
      const double trial = logreg_loss(X, y, w, b, cfg.l2);
      if (trial <= loss) {
        m.w = w;
        m.b = b;
        loss = trial;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    ++taken;
  }
  m.steps = (warm ? warm->steps : 0) + taken;

  TrainedModel out;
  out.kind = ModelKind::LogReg;
  out.params = std::move(m);
  out.seed = seed;
  out.iterations = taken;
  out.dimension = dim;
  return out;
}

TrainedModel train_linear_svm(const Dataset& input, std::uint64_t seed, const LearnerConfig& cfg,
                              const LinearModel* warm) {
  check_dataset(input);
  require_both_classes(input, "train_linear_svm");
  if (!(cfg.l2 > 0)) throw ValidationError("train_linear_svm needs l2 > 0");
  const Dataset d = canonical(input);
  const Eigen::Index dim = d.dimension();
  const Eigen::Index n = static_cast<Eigen::Index>(d.size());

  // The bias is folded in as a constant feature and regularized with w.
  Eigen::MatrixXd X(n, dim + 1);
  X.leftCols(dim) = design_matrix(d);
  X.col(dim).setOnes();
  Eigen::VectorXd y = 2.0 * label_vector(d).array() - 1.0;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim + 1);
  long t = 0;
  if (usable_warm(warm, dim)) {
    theta.head(dim) = warm->w;
    theta(dim) = warm->b;
    t = warm->steps;
  }
  const double lambda = cfg.l2;
  const double radius = 1.0 / std::sqrt(lambda);
  for (int epoch = 0; epoch < cfg.svm_epochs; ++epoch) {
    ++t;
    const double eta = 1.0 / (lambda * static_cast<double>(t));
    const Eigen::VectorXd margin = y.cwiseProduct(X * theta);
    Eigen::VectorXd g = lambda * theta;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (margin(i) < 1.0) g -= (y(i) / static_cast<double>(n)) * X.row(i).transpose();
    }
    theta -= eta * g;
    const double norm = theta.norm();
    if (norm > radius) theta *= radius / norm;
  }

  LinearModel m;
  m.w = theta.head(dim);
  m.b = theta(dim);
  m.steps = t;
  TrainedModel out;
  out.kind = ModelKind::LinearSVM;
  out.params = std::move(m);
  out.seed = seed;
  out.iterations = cfg.svm_epochs;
  out.dimension = dim;
  return out;
}

}  // namespace cohort::learn
