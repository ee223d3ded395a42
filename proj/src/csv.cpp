#include "cohort/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace cohort {

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw ValidationError("CSV column '" + name + "' not found");
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string to_csv(const CsvTable& table) {
  std::string out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += csv_escape(row[i]);
    }
    out += "\r\n";
  };
  emit(table.header);
  for (const auto& r : table.rows) emit(r);
  return out;
}

CsvTable parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t i = 0;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };
  while (i < text.size()) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          i += 2;
          continue;
        }
        quoted = false;
      } else {
        field += c;
      }
      ++i;
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r' || c == '\n') {
      end_row();
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
    } else {
      field += c;
      field_started = true;
    }
    ++i;
  }
  if (quoted) throw ValidationError("CSV ends inside a quoted field");
  if (field_started || !row.empty()) end_row();

  CsvTable t;
  if (rows.empty()) return t;
  t.header = std::move(rows.front());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() == 1 && rows[r][0].empty()) continue;
    if (rows[r].size() != t.header.size()) {
      throw ValidationError("CSV row " + std::to_string(r + 1) + " has " +
                            std::to_string(rows[r].size()) + " fields, header has " +
                            std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(rows[r]));
  }
  return t;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

double parse_number(const std::string& s, const std::string& what) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ValidationError("cannot parse '" + s + "' as a number in " + what);
  }
  return v;
}

int parse_int(const std::string& s, const std::string& what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ValidationError("cannot parse '" + s + "' as an integer in " + what);
  }
  return v;
}

}  // namespace

CsvTable batch_to_table(const WeeklyBatch& batch) {
  std::set<std::string> cont, cat;
  for (const auto& r : batch.records) {
    for (const auto& [k, v] : r.continuous) cont.insert(k);
    for (const auto& [k, v] : r.categorical) cat.insert(k);
  }
  CsvTable t;
  t.header = {"participant_id", "week", "day", "segment"};
  for (const auto& k : cont) t.header.push_back(k);
  for (const auto& k : cat) t.header.push_back(std::string(kCategoricalPrefix) + k);
  for (const auto& r : batch.records) {
    std::vector<std::string> row = {r.participant_id, std::to_string(r.week), r.day,
                                    std::string(segment_name(r.segment))};
    for (const auto& k : cont) {
      auto it = r.continuous.find(k);
      row.push_back(it == r.continuous.end() ? "" : format_double(it->second));
    }
    for (const auto& k : cat) {
      auto it = r.categorical.find(k);
      row.push_back(it == r.categorical.end() ? "" : it->second);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

WeeklyBatch batch_from_table(const CsvTable& t, int week) {
  const std::size_t pid = t.column("participant_id");
  const std::size_t wk = t.column("week");
  const std::size_t day = t.column("day");
  const std::size_t seg = t.column("segment");
  WeeklyBatch b;
  b.week = week;
  for (const auto& row : t.rows) {
    FeatureRecord r;
    r.participant_id = row[pid];
    r.week = parse_int(row[wk], "week column");
    r.day = row[day];
    r.segment = parse_segment(row[seg]);
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      if (c == pid || c == wk || c == day || c == seg) continue;
      const std::string& name = t.header[c];
      if (name.starts_with(kCategoricalPrefix)) {
        r.categorical[name.substr(kCategoricalPrefix.size())] = row[c];
      } else {
        r.continuous[name] = parse_number(row[c], "column " + name);
      }
    }
    b.records.push_back(std::move(r));
  }
  return b;
}

CsvTable labels_to_table(const std::map<std::string, UclaScore>& labels) {
  CsvTable t;
  t.header = {"participant_id", "score"};
  for (const auto& [pid, s] : labels) t.rows.push_back({pid, std::to_string(s.value())});
  return t;
}

std::map<std::string, UclaScore> labels_from_table(const CsvTable& t) {
  const std::size_t pid = t.column("participant_id");
  const std::size_t score = t.column("score");
  std::map<std::string, UclaScore> out;
  for (const auto& row : t.rows) {
    out.insert_or_assign(row[pid], UclaScore(parse_int(row[score], "labels score column")));
  }
  return out;
}

}  // namespace cohort
