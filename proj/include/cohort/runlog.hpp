#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace cohort {

struct LogEvent {
  int week = 0;
  std::string level;  // "info" | "warning"
  std::string event;
  std::string detail;

  friend bool operator==(const LogEvent&, const LogEvent&) = default;
};

using RunLog = std::vector<LogEvent>;

inline void log_event(RunLog* log, int week, std::string level, std::string event,
                      std::string detail) {
  if (log) log->push_back({week, std::move(level), std::move(event), std::move(detail)});
}

inline nlohmann::json to_json(const LogEvent& e) {
  return {{"week", e.week}, {"level", e.level}, {"event", e.event}, {"detail", e.detail}};
}

inline LogEvent log_event_from_json(const nlohmann::json& j) {
  return {j.at("week").get<int>(), j.at("level").get<std::string>(),
          j.at("event").get<std::string>(), j.at("detail").get<std::string>()};
}

/// One JSON object per line.
inline std::string to_json_lines(const RunLog& log) {
  std::string out;
  for (const auto& e : log) out += to_json(e).dump() + "\n";
  return out;
}

}  // namespace cohort
