#include "cohort/preprocess.hpp"

#include <limits>
#include <set>
#include <tuple>
#include <unordered_map>

namespace cohort::prep {
namespace {

// Linear-interpolation quantile of sorted values.
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string mode(const std::vector<std::string>& v) {
  std::map<std::string, int> counts;
  for (const auto& s : v) ++counts[s];
  // std::map iterates in lexicographic order, so the first maximum wins ties.
  std::string best;
  int best_count = 0;
  for (const auto& [tok, c] : counts) {
    if (c > best_count) {
      best = tok;
      best_count = c;
    }
  }
  return best;
}

std::set<std::string> continuous_names(std::span<const FeatureRecord> records) {
  std::set<std::string> out;
  for (const auto& r : records)
    for (const auto& [k, v] : r.continuous) out.insert(k);
  return out;
}

std::set<std::string> categorical_names(std::span<const FeatureRecord> records) {
  std::set<std::string> out;
  for (const auto& r : records)
    for (const auto& [k, v] : r.categorical) out.insert(k);
  return out;
}

double value_or_nan(const FeatureRecord& r, const std::string& k) {
  auto it = r.continuous.find(k);
  return it == r.continuous.end() ? std::numeric_limits<double>::quiet_NaN() : it->second;
}

std::string token_or_empty(const FeatureRecord& r, const std::string& k) {
  auto it = r.categorical.find(k);
  return it == r.categorical.end() ? std::string() : it->second;
}

using GroupKey = std::pair<std::string, int>;

GroupKey group_key(const FeatureRecord& r) {
  return {r.participant_id, static_cast<int>(r.segment)};
}

}  // namespace

std::vector<FeatureRecord> remove_outliers(std::span<const FeatureRecord> records) {
  if (records.empty()) return {};
  std::vector<std::tuple<std::string, double, double>> fences;
  for (const auto& name : continuous_names(records)) {
    std::vector<double> values;
    for (const auto& r : records) {
      const double v = value_or_nan(r, name);
      if (!is_missing(v)) values.push_back(v);
    }
    if (values.empty()) throw ValidationError("feature '" + name + "' is missing in every record");
    if (values.size() < 4) {
      throw ValidationError("feature '" + name + "' has fewer than 4 observed values");
    }
    std::sort(values.begin(), values.end());
    const double q1 = quantile(values, 0.25);
    const double q3 = quantile(values, 0.75);
    const double iqr = q3 - q1;
    fences.emplace_back(name, q1 - 1.5 * iqr, q3 + 1.5 * iqr);
  }
  std::vector<FeatureRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    bool keep = true;
    for (const auto& [name, lo, hi] : fences) {
      const double v = value_or_nan(r, name);
      if (!is_missing(v) && (v < lo || v > hi)) {
        keep = false;
        break;
      }
    }
    if (keep) out.push_back(r);
  }
  return out;
}

std::vector<FeatureRecord> impute(std::span<const FeatureRecord> records) {
  std::vector<FeatureRecord> out(records.begin(), records.end());
  if (out.empty()) return out;

  for (const auto& name : continuous_names(records)) {
    std::map<GroupKey, std::vector<double>> groups;
    std::vector<double> all;
    for (const auto& r : records) {
      const double v = value_or_nan(r, name);
      if (is_missing(v)) continue;
      groups[group_key(r)].push_back(v);
      all.push_back(v);
    }
    if (all.empty()) throw ValidationError("feature '" + name + "' is missing in every record");
    const double batch_median = median(all);
    std::map<GroupKey, double> medians;
    for (auto& [k, v] : groups) medians[k] = median(std::move(v));
    for (auto& r : out) {
      if (!is_missing(value_or_nan(r, name))) continue;
      auto it = medians.find(group_key(r));
      r.continuous[name] = it == medians.end() ? batch_median : it->second;
    }
  }

  for (const auto& name : categorical_names(records)) {
    std::map<GroupKey, std::vector<std::string>> groups;
    std::vector<std::string> all;
    for (const auto& r : records) {
      const std::string t = token_or_empty(r, name);
      if (t.empty()) continue;
      groups[group_key(r)].push_back(t);
      all.push_back(t);
    }
    if (all.empty()) throw ValidationError("feature '" + name + "' is missing in every record");
    const std::string batch_mode = mode(all);
    std::map<GroupKey, std::string> modes;
    for (const auto& [k, v] : groups) modes[k] = mode(v);
    for (auto& r : out) {
      if (!token_or_empty(r, name).empty()) continue;
      auto it = modes.find(group_key(r));
      r.categorical[name] = it == modes.end() ? batch_mode : it->second;
    }
  }
  return out;
}

Vocabulary build_vocabulary(std::span<const FeatureRecord> records) {
  std::map<std::string, std::set<std::string>> tokens;
  for (const auto& r : records) {
    for (const auto& [k, v] : r.categorical) {
      auto& set = tokens[k];
      if (!v.empty()) set.insert(v);
    }
  }
  Vocabulary vocab;
  for (auto& [k, set] : tokens) vocab[k] = std::vector<std::string>(set.begin(), set.end());
  return vocab;
}

std::vector<FeatureRecord> encode_onehot(std::span<const FeatureRecord> records,
                                         const Vocabulary& vocabulary) {
  std::vector<FeatureRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    FeatureRecord e = r;
    e.categorical.clear();
    for (const auto& [feature, tokens] : vocabulary) {
      const std::string value = token_or_empty(r, feature);
      for (const auto& t : tokens) e.continuous[feature + "=" + t] = value == t ? 1.0 : 0.0;
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<FeatureRecord> clean_batch(const WeeklyBatch& batch, const Vocabulary& vocabulary) {
  auto kept = remove_outliers(batch.records);
  auto filled = impute(kept);
  return encode_onehot(filled, vocabulary);
}

std::vector<SegmentProfile> segment_profiles(std::span<const FeatureRecord> encoded,
                                             const std::vector<std::string>& columns, int week,
                                             RunLog* log) {
  const std::size_t width = columns.size();
  struct Acc {
    std::array<Eigen::VectorXd, kSegmentCount> sum;
    std::array<int, kSegmentCount> count{};
  };
  std::map<std::string, Acc> acc;
  for (const auto& r : encoded) {
    auto [it, inserted] = acc.try_emplace(r.participant_id);
    if (inserted) {
      for (auto& s : it->second.sum) s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(width));
    }
    const int seg = static_cast<int>(r.segment);
    auto& sum = it->second.sum[seg];
    for (std::size_t c = 0; c < width; ++c) {
      auto f = r.continuous.find(columns[c]);
      if (f == r.continuous.end() || is_missing(f->second)) {
        throw ValidationError("record for " + r.participant_id + " lacks column '" + columns[c] +
                              "'");
      }
      sum(static_cast<Eigen::Index>(c)) += f->second;
    }
    ++it->second.count[seg];
  }

  // Segment blocks with no surviving records take the batch-wide block mean.
  std::array<Eigen::VectorXd, kSegmentCount> fallback;
  for (int s = 0; s < kSegmentCount; ++s) {
    Eigen::VectorXd total = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(width));
    int n = 0;
    for (const auto& [pid, a] : acc) {
      if (a.count[s] > 0) {
        total += a.sum[s] / a.count[s];
        ++n;
      }
    }
    fallback[s] = n > 0 ? Eigen::VectorXd(total / n) : total;
  }

  std::vector<SegmentProfile> out;
  out.reserve(acc.size());
  for (const auto& [pid, a] : acc) {
    SegmentProfile p{pid, week, Eigen::VectorXd(static_cast<Eigen::Index>(width) * kSegmentCount)};
    for (int s = 0; s < kSegmentCount; ++s) {
      auto block = p.raw.segment(static_cast<Eigen::Index>(s * width), static_cast<Eigen::Index>(width));
      if (a.count[s] > 0) {
        block = a.sum[s] / a.count[s];
      } else {
        block = fallback[s];
        log_event(log, week, "info", "segment_block_filled",
                  pid + " has no records in segment " +
                      std::string(segment_name(static_cast<DaySegment>(s))));
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

Eigen::MatrixXd stack(std::span<const SegmentProfile> profiles) {
  if (profiles.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(profiles.size()), profiles.front().raw.size());
  for (std::size_t i = 0; i < profiles.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = profiles[i].raw.transpose();
  return m;
}

void log_omitted(const WeeklyBatch& batch, std::span<const SegmentProfile> kept, RunLog* log) {
  std::set<std::string> have;
  for (const auto& p : kept) have.insert(p.participant_id);
  std::set<std::string> seen;
  for (const auto& r : batch.records) {
    if (!have.contains(r.participant_id) && seen.insert(r.participant_id).second) {
      log_event(log, batch.week, "warning", "participant_omitted",
                r.participant_id + " has no records left after outlier removal");
    }
  }
}

}  // namespace

FittedPipeline fit_pipeline(const WeeklyBatch& batch, double variance_target, RunLog* log) {
  if (batch.records.empty()) throw ValidationError("cannot fit a pipeline on an empty batch");
  FittedPipeline p;
  auto kept = remove_outliers(batch.records);
  auto filled = impute(kept);
  p.vocabulary = build_vocabulary(filled);
  const auto cont = continuous_names(filled);
  p.continuous.assign(cont.begin(), cont.end());
  p.columns = p.continuous;
  for (const auto& [feature, tokens] : p.vocabulary) {
    for (const auto& t : tokens) p.columns.push_back(feature + "=" + t);
  }
  auto encoded = encode_onehot(filled, p.vocabulary);
  auto profiles = segment_profiles(encoded, p.columns, batch.week, log);
  log_omitted(batch, profiles, log);
  const Eigen::MatrixXd raw = stack(profiles);
  p.scaler = scaler_fit(raw);
  const Eigen::MatrixXd scaled = scaler_apply(p.scaler, raw);
  p.projector = pca_fit(scaled, variance_target);
  return p;
}

FittedPipeline refit_pipeline(const FittedPipeline& base, std::span<const SegmentProfile> raw,
                              double variance_target) {
  FittedPipeline p = base;
  const Eigen::MatrixXd m = stack(raw);
  p.scaler = scaler_fit(m);
  p.projector = pca_fit(scaler_apply(p.scaler, m), variance_target);
  return p;
}

std::vector<SegmentProfile> raw_week(const WeeklyBatch& batch, const FittedPipeline& pipeline,
                                     RunLog* log) {
  auto encoded = clean_batch(batch, pipeline.vocabulary);
  for (const auto& r : encoded) {
    for (const auto& name : pipeline.continuous) {
      if (!r.continuous.contains(name)) {
        throw ValidationError("week " + std::to_string(batch.week) + " lacks feature '" + name + "'");
      }
    }
  }
  auto profiles = segment_profiles(encoded, pipeline.columns, batch.week, log);
  log_omitted(batch, profiles, log);
  return profiles;
}

ParticipantVector project_profile(const SegmentProfile& profile, const FittedPipeline& pipeline) {
  if (profile.raw.size() != pipeline.raw_dimension()) {
    throw ValidationError("segment profile length mismatch for " + profile.participant_id);
  }
  const Eigen::MatrixXd scaled = scaler_apply(pipeline.scaler, profile.raw.transpose());
  return {profile.participant_id, profile.week,
          pca_project(pipeline.projector, scaled.row(0).transpose())};
}

std::vector<ParticipantVector> vectorize_week(const WeeklyBatch& batch,
                                              const FittedPipeline& pipeline, RunLog* log) {
  std::vector<ParticipantVector> out;
  for (const auto& p : raw_week(batch, pipeline, log)) out.push_back(project_profile(p, pipeline));
  return out;
}

namespace {

nlohmann::json vec_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vec_from(const nlohmann::json& j) {
  auto v = j.get<std::vector<double>>();
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json pipeline_to_json(const FittedPipeline& p) {
  nlohmann::json comps = nlohmann::json::array();
  for (Eigen::Index k = 0; k < p.projector.components.rows(); ++k) {
    comps.push_back(vec_json(p.projector.components.row(k).transpose()));
  }
  return {{"schema_version", kPipelineSchemaVersion},
          {"continuous", p.continuous},
          {"vocabulary", p.vocabulary},
          {"columns", p.columns},
          {"segment_order", {"night", "morning", "afternoon", "evening"}},
          {"scaler", {{"min", vec_json(p.scaler.min)}, {"max", vec_json(p.scaler.max)}}},
          {"pca",
           {{"mean", vec_json(p.projector.mean)},
            {"components", comps},
            {"explained_variance_ratio", vec_json(p.projector.explained_variance_ratio)}}}};
}

FittedPipeline pipeline_from_json(const nlohmann::json& j) {
  if (j.at("schema_version").get<int>() != kPipelineSchemaVersion) {
    throw ValidationError("unsupported pipeline schema_version");
  }
  FittedPipeline p;
  p.continuous = j.at("continuous").get<std::vector<std::string>>();
  p.vocabulary = j.at("vocabulary").get<Vocabulary>();
  p.columns = j.at("columns").get<std::vector<std::string>>();
  p.scaler.min = vec_from(j.at("scaler").at("min"));
  p.scaler.max = vec_from(j.at("scaler").at("max"));
  const auto& pca = j.at("pca");
  p.projector.mean = vec_from(pca.at("mean"));
  p.projector.explained_variance_ratio = vec_from(pca.at("explained_variance_ratio"));
  const auto& comps = pca.at("components");
  p.projector.components.resize(static_cast<Eigen::Index>(comps.size()), p.projector.mean.size());
  for (std::size_t k = 0; k < comps.size(); ++k) {
    p.projector.components.row(static_cast<Eigen::Index>(k)) = vec_from(comps[k]).transpose();
  }
  return p;
}

}  // namespace cohort::prep
