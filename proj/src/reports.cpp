#include <algorithm>
#include <array>
#include <locale>
#include <sstream>

#include "cohort/csv.hpp"
#include "cohort/engine.hpp"

namespace cohort::engine {

using nlohmann::json;

namespace {

const std::vector<std::string> kReportHeader = {"scope",  "cohort", "kind", "accuracy",
                                                "precision", "recall", "f1",   "tp",
                                                "fp",     "fn",     "tn"};

double metric_of(const SummaryRow& r, const std::string& metric) {
  if (metric == "accuracy") return r.accuracy;
  if (metric == "precision") return r.precision;
  if (metric == "recall") return r.recall;
  if (metric == "f1") return r.f1;
  throw ValidationError("unknown metric '" + metric + "'");
}

}  // namespace

std::string report_csv(const WeeklyReport& r) {
  CsvTable t;
  t.header = kReportHeader;
  for (const auto& m : r.metrics) {
    const auto& x = m.metrics;
    t.rows.push_back({m.scope, m.cohort, m.kind, format_double(x.accuracy),
                      format_double(x.precision), format_double(x.recall), format_double(x.f1),
                      std::to_string(x.tp), std::to_string(x.fp), std::to_string(x.fn),
                      std::to_string(x.tn)});
  }
  return to_csv(t);
}

std::string clusters_csv(const WeeklyReport& r) {
  std::vector<std::pair<std::string, std::string>> rows;
  for (const auto& [label, members] : r.snapshot.cohorts) {
    for (const auto& m : members) rows.emplace_back(m, label);
  }
  for (const auto& n : r.snapshot.noise) rows.emplace_back(n, "noise");
  std::sort(rows.begin(), rows.end());
  CsvTable t;
  t.header = {"point_id", "cohort_label"};
  for (auto& [id, label] : rows) t.rows.push_back({id, label});
  return to_csv(t);
}

std::string votes_csv(const WeeklyReport& r) {
  CsvTable t;
  t.header = {"point_id", "cohort", "label", "prediction", "rule", "votes_for_1", "voters"};
  for (const auto& v : r.votes) {
    int ones = 0;
    for (const auto& [voter, b] : v.outcome.tally) ones += b;
    t.rows.push_back({v.point_id, v.cohort, v.label < 0 ? "" : std::to_string(v.label),
                      std::to_string(v.outcome.prediction), std::string(ens::rule_name(v.outcome.rule)),
                      std::to_string(ones), std::to_string(v.outcome.tally.size())});
  }
  return to_csv(t);
}

std::vector<SummaryRow> summarize(const std::vector<WeekDigest>& history) {
  std::vector<SummaryRow> out;
  for (const auto& h : history) {
    std::map<std::string, std::vector<const learn::Metrics*>> specialized;
    std::vector<SummaryRow> generic, voting;
    for (const auto& m : h.metrics) {
      const auto& x = m.metrics;
      if (m.cohort == "all" && m.scope == "generic") {
        generic.push_back({h.week, "generic", m.kind, x.accuracy, x.precision, x.recall, x.f1});
      } else if (m.cohort == "all" && m.scope == "voting") {
        voting.push_back({h.week, "voting", m.kind, x.accuracy, x.precision, x.recall, x.f1});
      } else if (m.scope == "specialized") {
        specialized[m.kind].push_back(&x);
      }
    }
    out.insert(out.end(), generic.begin(), generic.end());
    for (const auto& [kind, ms] : specialized) {
      SummaryRow s{h.week, "specialized_mean", kind};
      for (const auto* x : ms) {
        s.accuracy += x->accuracy;
        s.precision += x->precision;
        s.recall += x->recall;
        s.f1 += x->f1;
      }
      const double n = static_cast<double>(ms.size());
      s.accuracy /= n;
      s.precision /= n;
      s.recall /= n;
      s.f1 /= n;
      out.push_back(s);
    }
    out.insert(out.end(), voting.begin(), voting.end());
  }
  return out;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  CsvTable t;
  t.header = {"week", "scope", "kind", "accuracy", "precision", "recall", "f1"};
  for (const auto& r : rows) {
    t.rows.push_back({std::to_string(r.week), r.scope, r.kind, format_double(r.accuracy),
                      format_double(r.precision), format_double(r.recall), format_double(r.f1)});
  }
  return to_csv(t);
}

json summary_json(const std::vector<WeekDigest>& history, const std::vector<SummaryRow>& rows) {
  json weeks = json::array();
  for (const auto& h : history) {
    json w = {{"week", h.week},
              {"cohort_sizes", h.cohort_sizes},
              {"noise_count", h.noise_count},
              {"cohort_count", h.cohort_sizes.size()},
              {"metrics", json::array()}};
    for (const auto& r : rows) {
      if (r.week != h.week) continue;
      w["metrics"].push_back({{"scope", r.scope},
                              {"kind", r.kind},
                              {"accuracy", r.accuracy},
                              {"precision", r.precision},
                              {"recall", r.recall},
                              {"f1", r.f1}});
    }
    weeks.push_back(std::move(w));
  }
  return {{"weeks", weeks}};
}

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 400;
constexpr double kMargin = 50;
const std::array<const char*, 10> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                              "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                              "#bcbd22", "#17becf"};

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

std::string line_chart(const std::string& title, const std::vector<Series>& series, double y_max) {
  double x_min = 1, x_max = 1;
  bool first = true;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      x_min = first ? x : std::min(x_min, x);
      x_max = first ? x : std::max(x_max, x);
      first = false;
    }
  }
  if (x_max == x_min) x_max = x_min + 1;
  if (y_max <= 0) y_max = 1;
  auto px = [&](double x) { return kMargin + (x - x_min) / (x_max - x_min) * (kWidth - 2 * kMargin); };
  auto py = [&](double y) { return kHeight - kMargin - y / y_max * (kHeight - 2 * kMargin); };

  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\">\n";
  os << "<text x=\"" << kMargin << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << title
     << "</text>\n";
  os << "<line x1=\"" << kMargin << "\" y1=\"" << py(0) << "\" x2=\"" << kWidth - kMargin << "\" y2=\""
     << py(0) << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kMargin << "\" y1=\"" << py(0) << "\" x2=\"" << kMargin << "\" y2=\""
     << py(y_max) << "\" stroke=\"black\"/>\n";
  os << "<text x=\"5\" y=\"" << py(y_max) + 4 << "\" font-family=\"sans-serif\" font-size=\"10\">"
     << format_double(y_max) << "</text>\n";
  for (int w = static_cast<int>(x_min); w <= static_cast<int>(x_max); ++w) {
    os << "<text x=\"" << px(w) - 3 << "\" y=\"" << kHeight - kMargin + 15
       << "\" font-family=\"sans-serif\" font-size=\"10\">" << w << "</text>\n";
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kPalette[i % kPalette.size()];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (const auto& [x, y] : s.points) os << px(x) << "," << py(y) << " ";
    os << "\"/>\n";
    os << "<text x=\"" << kWidth - kMargin + 5 - 120 << "\" y=\"" << 40 + 14 * static_cast<double>(i)
       << "\" fill=\"" << color << "\" font-family=\"sans-serif\" font-size=\"10\">" << s.name << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace

std::string metric_svg(const std::vector<SummaryRow>& rows, const std::string& metric) {
  std::map<std::string, Series> by_name;
  for (const auto& r : rows) {
    const std::string name = r.scope + "/" + r.kind;
    by_name[name].name = name;
    by_name[name].points.emplace_back(r.week, metric_of(r, metric));
  }
  std::vector<Series> series;
  for (auto& [n, s] : by_name) series.push_back(std::move(s));
  return line_chart(metric + " by week", series, 1.0);
}

std::string cohort_svg(const std::vector<WeekDigest>& history) {
  std::map<std::string, Series> by_label;
  double y_max = 0;
  for (const auto& h : history) {
    for (const auto& [label, n] : h.cohort_sizes) {
      by_label[label].name = label;
      by_label[label].points.emplace_back(h.week, n);
      y_max = std::max(y_max, static_cast<double>(n));
    }
  }
  std::vector<Series> series;
  for (auto& [n, s] : by_label) series.push_back(std::move(s));
  return line_chart("cohort sizes by week", series, y_max);
}

std::vector<ens::ScopeMetrics> read_report_csv(const std::string& text) {
  const CsvTable t = parse_csv(text);
  if (t.header != kReportHeader) throw ValidationError("report has an unexpected header");
  std::vector<ens::ScopeMetrics> out;
  for (const auto& row : t.rows) {
    if (row.size() != kReportHeader.size()) throw ValidationError("report row has the wrong width");
    try {
      out.push_back({row[0], row[1], row[2],
                     learn::metrics_from_counts(std::stol(row[7]), std::stol(row[8]),
                                                std::stol(row[9]), std::stol(row[10]))});
    } catch (const std::logic_error&) {
      throw ValidationError("report row has a non-numeric count");
    }
  }
  return out;
}

}  // namespace cohort::engine
