#include "cohort/core.hpp"

#include <cmath>
#include <set>

namespace cohort {

UclaScore::UclaScore(int value) : value_(value) {
  if (value < kMin || value > kMax) {
    throw ValidationError("UCLA score " + std::to_string(value) + " outside [10, 40]");
  }
}

Loneliness label_from_score(UclaScore score, int threshold) {
  return score.value() > threshold ? Loneliness::Lonely : Loneliness::NotLonely;
}

DaySegment segment_of(int minutes) {
  if (minutes < 0 || minutes >= kMinutesPerDay) {
    throw ValidationError("time of day " + std::to_string(minutes) +
                          " minutes outside [0, 1440)");
  }
  return static_cast<DaySegment>(minutes / 360);
}

std::string_view segment_name(DaySegment s) noexcept {
  switch (s) {
    case DaySegment::Night: return "night";
    case DaySegment::Morning: return "morning";
    case DaySegment::Afternoon: return "afternoon";
    case DaySegment::Evening: return "evening";
  }
  return "night";
}

DaySegment parse_segment(std::string_view name) {
  for (int i = 0; i < kSegmentCount; ++i) {
    auto s = static_cast<DaySegment>(i);
    if (segment_name(s) == name) return s;
  }
  throw ValidationError("unknown day segment '" + std::string(name) + "'");
}

void validate_batch(const WeeklyBatch& batch) {
  std::set<std::string> seen;
  for (const auto& r : batch.records) {
    if (r.week != batch.week) {
      throw ValidationError("record for " + r.participant_id + " has week " +
                            std::to_string(r.week) + " in batch for week " +
                            std::to_string(batch.week));
    }
    seen.insert(r.participant_id);
  }
  for (const auto& [pid, score] : batch.labels) {
    if (!seen.contains(pid)) {
      throw ValidationError("labeled participant " + pid + " has no records in week " +
                            std::to_string(batch.week));
    }
  }
}

bool is_missing(double v) noexcept { return std::isnan(v); }

}  // namespace cohort
