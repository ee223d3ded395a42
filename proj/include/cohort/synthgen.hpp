#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cohort/core.hpp"

namespace cohort::synth {

/// Behavioral features emitted by the generator, in a fixed order.
inline constexpr std::array<const char*, 7> kFeatureNames = {
    "physical_activity", "calls", "sms", "bluetooth_unique",
    "location_changes", "phone_usage", "sleep_duration"};
inline constexpr const char* kPlaceFeature = "dominant_place";
inline constexpr std::array<const char*, 3> kPlaceTokens = {"campus", "home", "social"};

inline constexpr int kWeeks = 10;
inline constexpr int kDaysPerWeek = 7;

/// Segments in which each feature is observed; elsewhere the value is absent.
bool observed_in(std::size_t feature, DaySegment segment) noexcept;

struct WeekInterval {
  int first = 1;
  int last = 1;
  bool contains(int week) const noexcept { return week >= first && week <= last; }
  friend bool operator==(const WeekInterval&, const WeekInterval&) = default;
};

/// Numeric level for a behavioral descriptor word ("High", "Fewer", ...).
/// Returns the level and whether the descriptor doubles the spread.
struct Level {
  double mean;
  bool variable;
};
Level descriptor_level(const std::string& descriptor);

inline constexpr double kParticipantSpread = 0.08;
inline constexpr double kDaySpread = 0.15;

struct GroupProfile {
  std::string group_id;
  WeekInterval weeks;
  std::map<std::string, double> feature_means;
  std::map<std::string, double> feature_spreads;
  int score_lo = 10;
  int score_hi = 40;
  std::string dominant_place;
};

/// One profile per (group, week interval) cell of the behavioral profile table.
std::vector<GroupProfile> build_default_profiles();

const GroupProfile* find_profile(const std::vector<GroupProfile>& profiles,
                                 const std::string& group, int week);

struct CohortPlan {
  int total_participants = 205;
  int lonely_count = 87;
  /// week -> group -> participant ids
  std::map<int, std::map<std::string, std::set<std::string>>> weekly_group_membership;
  /// Strength of a planted, group-specific link between loneliness and
  /// behavior. Zero for the default cohort.
  double label_signal = 0.0;

  std::string group_of(const std::string& participant, int week) const;
  std::vector<std::string> participants() const;
};

CohortPlan default_plan();

/// Default plan with a planted group-specific loneliness signal: the sign of
/// the link flips between groups, so pooled linear models see it cancel.
inline constexpr double kPlantedSignal = 0.2;
CohortPlan planted_plan();

/// Throws ConfigError when the plan is inconsistent with itself or with the
/// profiles (overlapping groups, a group without a profile in some week).
void check_plan(const CohortPlan& plan, const std::vector<GroupProfile>& profiles);

struct Cohort {
  std::vector<WeeklyBatch> batches;
  std::map<std::string, UclaScore> scores;
};

Cohort generate_cohort(const CohortPlan& plan, const std::vector<GroupProfile>& profiles,
                       std::uint64_t seed);

/// The 28 records of one participant-week drawn from `group`'s profile.
std::vector<FeatureRecord> participant_week_records(const std::string& participant, int week,
                                                    const GroupProfile& profile,
                                                    double label_offset, std::uint64_t seed);

struct DriftMove {
  std::string participant_id;
  std::string target_group;
};

/// Re-samples the moved participants' records from their target profile.
/// Other records are untouched.
WeeklyBatch inject_drift(const WeeklyBatch& batch, const std::vector<DriftMove>& moves,
                         const std::vector<GroupProfile>& profiles, std::uint64_t seed);

/// Plan with the same moves applied to one week's planted membership.
CohortPlan apply_moves(const CohortPlan& plan, int week, const std::vector<DriftMove>& moves);

nlohmann::json plan_to_json(const CohortPlan& plan);
CohortPlan plan_from_json(const nlohmann::json& j);

}  // namespace cohort::synth
