#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cohort/core.hpp"

namespace cohort {

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws ValidationError if absent.
  std::size_t column(const std::string& name) const;
};

/// RFC-4180: fields containing comma, quote, CR or LF are quoted, quotes doubled.
std::string csv_escape(const std::string& field);
std::string to_csv(const CsvTable& table);
CsvTable parse_csv(const std::string& text);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

/// Categorical columns in batch files carry this header prefix.
inline constexpr std::string_view kCategoricalPrefix = "cat:";

/// One row per record: participant_id,week,day,segment, continuous features
/// (sorted by name), then categorical features. Missing values are empty cells.
CsvTable batch_to_table(const WeeklyBatch& batch);
WeeklyBatch batch_from_table(const CsvTable& table, int week);

CsvTable labels_to_table(const std::map<std::string, UclaScore>& labels);
std::map<std::string, UclaScore> labels_from_table(const CsvTable& table);

}  // namespace cohort
