#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cohort/core.hpp"
#include "cohort/runlog.hpp"

namespace cohort::prep {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// ---------------------------------------------------------------------------
// Record-level cleaning

/// Drops every record with a continuous value outside
/// [Q1 - 1.5 IQR, Q3 + 1.5 IQR] of that feature over the batch.
std::vector<FeatureRecord> remove_outliers(std::span<const FeatureRecord> records);

/// Fills gaps with the per-(participant, segment) median (continuous) or mode
/// (categorical, ties to the lexicographically smallest token), falling back
/// to the batch-level median/mode. Observed values are never changed.
std::vector<FeatureRecord> impute(std::span<const FeatureRecord> records);

/// feature -> sorted tokens
using Vocabulary = std::map<std::string, std::vector<std::string>>;

Vocabulary build_vocabulary(std::span<const FeatureRecord> records);

/// Replaces each categorical feature by one indicator column per vocabulary
/// token, named "<feature>=<token>". Unseen tokens give an all-zero row.
std::vector<FeatureRecord> encode_onehot(std::span<const FeatureRecord> records,
                                         const Vocabulary& vocabulary);

// ---------------------------------------------------------------------------
// Min-max scaling

template <typename Scalar>
struct FittedScaler {
  Vec<Scalar> min;
  Vec<Scalar> max;
};

/// Rows are samples.
template <typename Derived>
FittedScaler<typename Derived::Scalar> scaler_fit(const Eigen::MatrixBase<Derived>& rows) {
  if (rows.rows() == 0) throw ValidationError("scaler_fit needs at least one row");
  FittedScaler<typename Derived::Scalar> s;
  s.min = rows.colwise().minCoeff().transpose();
  s.max = rows.colwise().maxCoeff().transpose();
  return s;
}

/// A column is constant when its range is lost in rounding noise relative to
/// its magnitude (averages of equal imputed values can differ in the last bit).
template <typename Scalar>
bool constant_column(Scalar lo, Scalar hi) {
  const Scalar scale = std::max({Scalar(1), std::abs(lo), std::abs(hi)});
  return !(hi - lo > Scalar(1e-12) * scale);
}

/// x -> (x - min) / (max - min), clamped to [0, 1]; constant columns map to 0.
template <typename Scalar, typename Derived>
Mat<Scalar> scaler_apply(const FittedScaler<Scalar>& s, const Eigen::MatrixBase<Derived>& rows) {
  if (rows.cols() != s.min.size()) {
    throw ValidationError("scaler_apply: expected " + std::to_string(s.min.size()) +
                          " columns, got " + std::to_string(rows.cols()));
  }
  Mat<Scalar> out(rows.rows(), rows.cols());
  for (Eigen::Index c = 0; c < rows.cols(); ++c) {
    const Scalar range = s.max(c) - s.min(c);
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
      out(r, c) = constant_column(s.min(c), s.max(c))
                      ? Scalar(0)
                      : std::clamp((rows(r, c) - s.min(c)) / range, Scalar(0), Scalar(1));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// PCA

template <typename Scalar>
struct FittedProjector {
  Vec<Scalar> mean;
  /// Rows are orthonormal components, ordered by decreasing variance.
  Mat<Scalar> components;
  Vec<Scalar> explained_variance_ratio;

  Eigen::Index dimension() const { return components.rows(); }
};

/// Covariance eigendecomposition. Keeps the smallest prefix whose ratios sum
/// to at least `variance_target`, but no fewer than two components when the
/// data has rank two or more. Each component's largest-magnitude entry is
/// made positive.
template <typename Derived>
FittedProjector<typename Derived::Scalar> pca_fit(const Eigen::MatrixBase<Derived>& rows,
                                                  double variance_target) {
  using Scalar = typename Derived::Scalar;
  if (rows.rows() < 2 || rows.cols() < 1) {
    throw ValidationError("pca_fit needs at least 2 rows and 1 column");
  }
  if (!(variance_target > 0 && variance_target <= 1)) {
    throw ValidationError("pca variance target must lie in (0, 1]");
  }
  FittedProjector<Scalar> p;
  p.mean = rows.colwise().mean().transpose();
  const Mat<Scalar> centered = rows.rowwise() - p.mean.transpose();
  const Mat<Scalar> cov = (centered.transpose() * centered) / Scalar(rows.rows() - 1);

  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> solver(cov);
  if (solver.info() != Eigen::Success) throw std::runtime_error("pca eigendecomposition failed");
  // Ascending order from the solver; flip to descending.
  const Vec<Scalar> values = solver.eigenvalues().reverse().cwiseMax(Scalar(0));
  const Mat<Scalar> vectors = solver.eigenvectors().rowwise().reverse();

  const Scalar total = values.sum();
  const Scalar tol = std::max(Scalar(1e-300), values(0) * Scalar(1e-12) * Scalar(values.size()));
  if (!(total > 0) || values(0) <= tol) {
    throw ValidationError("pca_fit: data has rank 0 (all rows equal)");
  }
  Eigen::Index rank = 0;
  while (rank < values.size() && values(rank) > tol) ++rank;

  Eigen::Index keep = 0;
  Scalar cumulative = 0;
  while (keep < rank) {
    cumulative += values(keep) / total;
    ++keep;
    if (cumulative >= Scalar(variance_target) - Scalar(1e-12)) break;
  }
  keep = std::min(std::max<Eigen::Index>(keep, 2), rank);

  p.components.resize(keep, rows.cols());
  p.explained_variance_ratio.resize(keep);
  for (Eigen::Index k = 0; k < keep; ++k) {
    Vec<Scalar> v = vectors.col(k);
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
      if (std::abs(v(i)) > std::abs(v(arg))) arg = i;
    }
    if (v(arg) < 0) v = -v;
    p.components.row(k) = v.transpose();
    p.explained_variance_ratio(k) = values(k) / total;
  }
  return p;
}

template <typename Scalar, typename Derived>
Vec<Scalar> pca_project(const FittedProjector<Scalar>& p, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != p.mean.size()) {
    throw ValidationError("pca_project: expected length " + std::to_string(p.mean.size()) +
                          ", got " + std::to_string(x.size()));
  }
  return p.components * (x - p.mean);
}

template <typename Scalar, typename Derived>
Vec<Scalar> pca_reconstruct(const FittedProjector<Scalar>& p,
                            const Eigen::MatrixBase<Derived>& coords) {
  return p.mean + p.components.transpose() * coords;
}

// ---------------------------------------------------------------------------
// Weekly vectors

struct ParticipantVector {
  std::string participant_id;
  int week = 0;
  Eigen::VectorXd values;
};

/// Per-participant weekly average of each encoded column, one block per day
/// segment (night, morning, afternoon, evening), before scaling.
struct SegmentProfile {
  std::string participant_id;
  int week = 0;
  Eigen::VectorXd raw;
};

struct FittedPipeline {
  std::vector<std::string> continuous;  ///< raw continuous feature order
  Vocabulary vocabulary;
  std::vector<std::string> columns;     ///< encoded columns, one segment block
  FittedScaler<double> scaler;
  FittedProjector<double> projector;

  Eigen::Index raw_dimension() const {
    return static_cast<Eigen::Index>(columns.size()) * kSegmentCount;
  }
};

inline constexpr int kPipelineSchemaVersion = 1;

/// Outlier removal, imputation and one-hot encoding for one batch.
std::vector<FeatureRecord> clean_batch(const WeeklyBatch& batch, const Vocabulary& vocabulary);

/// Segment-block averages for every participant with surviving records.
/// Participants without records are logged and omitted.
std::vector<SegmentProfile> segment_profiles(std::span<const FeatureRecord> encoded,
                                             const std::vector<std::string>& columns, int week,
                                             RunLog* log = nullptr);

/// Fits vocabulary, scaler and projector on one batch.
FittedPipeline fit_pipeline(const WeeklyBatch& batch, double variance_target,
                            RunLog* log = nullptr);

/// Refits scaler and projector on the given raw profiles, keeping vocabulary
/// and column order.
FittedPipeline refit_pipeline(const FittedPipeline& base, std::span<const SegmentProfile> raw,
                              double variance_target);

std::vector<SegmentProfile> raw_week(const WeeklyBatch& batch, const FittedPipeline& pipeline,
                                     RunLog* log = nullptr);

ParticipantVector project_profile(const SegmentProfile& profile, const FittedPipeline& pipeline);

std::vector<ParticipantVector> vectorize_week(const WeeklyBatch& batch,
                                              const FittedPipeline& pipeline,
                                              RunLog* log = nullptr);

nlohmann::json pipeline_to_json(const FittedPipeline& p);
FittedPipeline pipeline_from_json(const nlohmann::json& j);

}  // namespace cohort::prep
