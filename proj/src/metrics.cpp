#include <algorithm>
#include <numeric>

#include "cohort/core.hpp"
#include "cohort/learners.hpp"

namespace cohort::learn {

std::size_t Dataset::count(int label) const {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [label](const Row& r) { return r.label == label; }));
}

void check_dataset(const Dataset& d) {
  const Eigen::Index dim = d.dimension();
  for (const auto& r : d.rows) {
    if (r.x.size() != dim) throw ValidationError("dataset rows have different lengths");
    if (r.label != 0 && r.label != 1) throw ValidationError("labels must be 0 or 1");
    if (!r.x.allFinite()) throw ValidationError("row " + r.participant_id + " is not finite");
  }
}

namespace {

bool row_less(const Row& a, const Row& b) {
  if (a.participant_id != b.participant_id) return a.participant_id < b.participant_id;
  if (a.label != b.label) return a.label < b.label;
  return std::lexicographical_compare(a.x.data(), a.x.data() + a.x.size(), b.x.data(),
                                      b.x.data() + b.x.size());
}

}  // namespace

Dataset canonical(const Dataset& d) {
  Dataset out = d;
  std::stable_sort(out.rows.begin(), out.rows.end(), row_less);
  return out;
}

Eigen::MatrixXd design_matrix(const Dataset& d) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(d.size()), d.dimension());
  for (std::size_t i = 0; i < d.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = d.rows[i].x.transpose();
  return X;
}

Eigen::VectorXd label_vector(const Dataset& d) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) y(static_cast<Eigen::Index>(i)) = d.rows[i].label;
  return y;
}

Metrics metrics_from_counts(long tp, long fp, long fn, long tn) {
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  const long total = tp + fp + fn + tn;
  if (total <= 0) throw ValidationError("metrics need at least one prediction");
  m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(total);
  const bool no_positives = tp + fn == 0;
  if (tp + fp == 0) {
    m.precision = no_positives ? 1.0 : 0.0;
  } else {
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  if (no_positives) {
    m.recall = tp + fp == 0 ? 1.0 : 0.0;
  } else {
    m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  }
  const double s = m.precision + m.recall;
  m.f1 = s > 0 ? 2 * m.precision * m.recall / s : 0.0;
  return m;
}

Metrics compute_metrics(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw ValidationError("compute_metrics: " + std::to_string(predictions.size()) +
                          " predictions for " + std::to_string(labels.size()) + " labels");
  }
  if (predictions.empty()) throw ValidationError("compute_metrics: empty input");
  long tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int p = predictions[i];
    const int y = labels[i];
    if ((p != 0 && p != 1) || (y != 0 && y != 1)) {
      throw ValidationError("compute_metrics: values must be 0 or 1");
    }
    if (p == 1 && y == 1) ++tp;
    else if (p == 1) ++fp;
    else if (y == 1) ++fn;
    else ++tn;
  }
  return metrics_from_counts(tp, fp, fn, tn);
}

nlohmann::json to_json(const Metrics& m) {
  return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall},
          {"f1", m.f1},             {"tp", m.tp},               {"fp", m.fp},
          {"fn", m.fn},             {"tn", m.tn}};
}

}  // namespace cohort::learn
