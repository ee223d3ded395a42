#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cohort {

/// Input that violates a documented precondition. The CLI maps this to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inconsistent configuration or plan (e.g. a plan naming a group with no profile).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Summed UCLA loneliness questionnaire score, always within [10, 40].
class UclaScore {
 public:
  static constexpr int kMin = 10;
  static constexpr int kMax = 40;

  explicit UclaScore(int value);

  int value() const noexcept { return value_; }
  friend bool operator==(UclaScore, UclaScore) = default;
  friend auto operator<=>(UclaScore, UclaScore) = default;

 private:
  int value_;
};

enum class Loneliness : int { NotLonely = 0, Lonely = 1 };

inline int to_int(Loneliness l) noexcept { return static_cast<int>(l); }

/// Lonely iff score > threshold (strict).
Loneliness label_from_score(UclaScore score, int threshold);

/// Day segments in chronological order. Vector blocks follow this order.
enum class DaySegment : int { Night = 0, Morning = 1, Afternoon = 2, Evening = 3 };

inline constexpr int kSegmentCount = 4;
inline constexpr int kMinutesPerDay = 1440;

/// Half-open segment boundaries: Night [0,360), Morning [360,720),
/// Afternoon [720,1080), Evening [1080,1440).
DaySegment segment_of(int minutes_since_midnight);

std::string_view segment_name(DaySegment s) noexcept;
DaySegment parse_segment(std::string_view name);

/// One participant-segment-day row. Missing continuous values are NaN,
/// missing categorical values are the empty string (or an absent key).
struct FeatureRecord {
  std::string participant_id;
  int week = 1;
  std::string day;
  DaySegment segment = DaySegment::Night;
  std::map<std::string, double> continuous;
  std::map<std::string, std::string> categorical;

  friend bool operator==(const FeatureRecord&, const FeatureRecord&) = default;
};

struct WeeklyBatch {
  int week = 1;
  std::vector<FeatureRecord> records;
  std::map<std::string, UclaScore> labels;

  friend bool operator==(const WeeklyBatch&, const WeeklyBatch&) = default;
};

/// Checks batch invariants: every record carries the batch week, every
/// labeled participant has at least one record.
void validate_batch(const WeeklyBatch& batch);

bool is_missing(double v) noexcept;

}  // namespace cohort
