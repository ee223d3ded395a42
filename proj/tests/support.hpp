#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cohort/learners.hpp"
#include "cohort/rng.hpp"
#include "cohort/synthgen.hpp"

namespace testsupport {

/// Every `stride`-th participant of the default plan, so engine tests run fast.
inline cohort::synth::CohortPlan small_plan(int stride) {
  const auto full = cohort::synth::default_plan();
  cohort::synth::CohortPlan plan;
  std::set<std::string> kept;
  const auto all = full.participants();
  for (std::size_t i = 0; i < all.size(); i += static_cast<std::size_t>(stride)) kept.insert(all[i]);
  for (const auto& [week, groups] : full.weekly_group_membership) {
    for (const auto& [g, members] : groups) {
      auto& dst = plan.weekly_group_membership[week][g];
      for (const auto& m : members) {
        if (kept.contains(m)) dst.insert(m);
      }
    }
  }
  plan.total_participants = static_cast<int>(kept.size());
  plan.lonely_count = full.lonely_count * plan.total_participants / full.total_participants;
  return plan;
}

inline cohort::synth::Cohort small_cohort(int stride, std::uint64_t seed) {
  return cohort::synth::generate_cohort(small_plan(stride), cohort::synth::build_default_profiles(),
                                        seed);
}

/// Two Gaussian blobs in `dim` dimensions, labels 0 and 1, `n0` and `n1` rows.
inline cohort::learn::Dataset blobs(int n0, int n1, int dim, double separation, std::uint64_t seed) {
  cohort::Rng rng(seed);
  cohort::learn::Dataset d;
  for (int i = 0; i < n0 + n1; ++i) {
    const int label = i < n0 ? 0 : 1;
    Eigen::VectorXd x(dim);
    for (int c = 0; c < dim; ++c) x(c) = rng.normal() + (label == 1 ? separation : 0.0);
    char id[16];
    std::snprintf(id, sizeof id, "r%04d", i);
    d.rows.push_back({x, label, id});
  }
  return d;
}

/// Record equality that treats two NaNs as equal.
inline bool same_record(const cohort::FeatureRecord& a, const cohort::FeatureRecord& b) {
  if (a.participant_id != b.participant_id || a.week != b.week || a.day != b.day ||
      a.segment != b.segment || a.categorical != b.categorical ||
      a.continuous.size() != b.continuous.size()) {
    return false;
  }
  for (const auto& [k, v] : a.continuous) {
    auto it = b.continuous.find(k);
    if (it == b.continuous.end()) return false;
    if (!(v == it->second || (std::isnan(v) && std::isnan(it->second)))) return false;
  }
  return true;
}

inline bool same_batch(const cohort::WeeklyBatch& a, const cohort::WeeklyBatch& b) {
  if (a.week != b.week || a.labels != b.labels || a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    if (!same_record(a.records[i], b.records[i])) return false;
  }
  return true;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("cohortsense_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testsupport
