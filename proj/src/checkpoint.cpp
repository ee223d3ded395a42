#include <zlib.h>

#include "cohort/csv.hpp"
#include "cohort/engine.hpp"

namespace cohort::engine {

using nlohmann::json;

std::string gzip_compress(const std::string& data) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_BEST_COMPRESSION, Z_DEFLATED, 31, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw std::runtime_error("deflateInit2 failed");
  }
  std::string out;
  out.resize(deflateBound(&zs, static_cast<uLong>(data.size())) + 32);
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw std::runtime_error("gzip compression failed");
  out.resize(zs.total_out);
  return out;
}

std::string gzip_decompress(const std::string& data) {
  z_stream zs{};
  if (inflateInit2(&zs, 47) != Z_OK) throw std::runtime_error("inflateInit2 failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  std::string out;
  char buf[1 << 16];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof buf;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw ValidationError("checkpoint is not valid gzip data");
    }
    out.append(buf, sizeof buf - zs.avail_out);
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw ValidationError("checkpoint is truncated");
    }
  }
  inflateEnd(&zs);
  return out;
}

namespace {

json vector_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from(const json& j) {
  const auto xs = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

json metrics_rows_json(const std::vector<ens::ScopeMetrics>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"scope", r.scope}, {"cohort", r.cohort}, {"kind", r.kind},
                   {"metrics", learn::to_json(r.metrics)}});
  }
  return out;
}

std::vector<ens::ScopeMetrics> metrics_rows_from(const json& j) {
  std::vector<ens::ScopeMetrics> out;
  for (const auto& r : j) {
    const auto& m = r.at("metrics");
    out.push_back({r.at("scope").get<std::string>(), r.at("cohort").get<std::string>(),
                   r.at("kind").get<std::string>(),
                   learn::metrics_from_counts(m.at("tp").get<int>(), m.at("fp").get<int>(),
                                              m.at("fn").get<int>(), m.at("tn").get<int>())});
  }
  return out;
}

}  // namespace

json state_to_json(const EngineState& s) {
  json profiles = json::array();
  for (const auto& p : s.raw_profiles) {
    profiles.push_back({{"participant_id", p.participant_id}, {"week", p.week}, {"raw", vector_json(p.raw)}});
  }
  json history = json::array();
  for (const auto& h : s.history) {
    history.push_back({{"week", h.week},
                       {"cohort_sizes", h.cohort_sizes},
                       {"noise_count", h.noise_count},
                       {"metrics", metrics_rows_json(h.metrics)}});
  }
  json log = json::array();
  for (const auto& e : s.log) log.push_back(to_json(e));
  return {{"schema_version", kCheckpointSchemaVersion},
          {"config", to_json(s.config)},
          {"current_week", s.current_week},
          {"pipeline", s.pipeline ? prep::pipeline_to_json(*s.pipeline) : json()},
          {"registry", s.registry.to_json()},
          {"identity", cluster::to_json(s.identity)},
          {"pool", ens::to_json(s.pool)},
          {"labels", s.labels},
          {"holdout", s.holdout},
          {"raw_profiles", profiles},
          {"history", history},
          {"log", log}};
}

EngineState state_from_json(const json& j) {
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kCheckpointSchemaVersion) {
      throw ValidationError("unsupported checkpoint schema version " + std::to_string(version));
    }
    EngineState s;
    s.config = config_from_json(j.at("config"));
    s.current_week = j.at("current_week").get<int>();
    if (!j.at("pipeline").is_null()) s.pipeline = prep::pipeline_from_json(j.at("pipeline"));
    s.registry = cluster::ClusterRegistry::from_json(j.at("registry"));
    s.identity = cluster::identity_from_json(j.at("identity"));
    s.pool = ens::pool_from_json(j.at("pool"));
    s.labels = j.at("labels").get<std::map<std::string, int>>();
    s.holdout = j.at("holdout").get<std::set<std::string>>();
    for (const auto& p : j.at("raw_profiles")) {
      s.raw_profiles.push_back({p.at("participant_id").get<std::string>(), p.at("week").get<int>(),
                                vector_from(p.at("raw"))});
    }
    for (const auto& h : j.at("history")) {
      s.history.push_back({h.at("week").get<int>(), h.at("cohort_sizes").get<std::map<std::string, int>>(),
                           h.at("noise_count").get<int>(), metrics_rows_from(h.at("metrics"))});
    }
    for (const auto& e : j.at("log")) s.log.push_back(log_event_from_json(e));
    if (s.current_week < 0) throw ValidationError("checkpoint has a negative week");
    if (s.current_week > 0 && !s.pipeline) throw ValidationError("checkpoint past week 0 has no pipeline");
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw ValidationError(std::string("checkpoint config: ") + e.what());
  }
}

void save(const EngineState& s, const std::filesystem::path& path) {
  // Write to a sibling file first so a crash never leaves a half-written checkpoint.
  const std::filesystem::path tmp = path.string() + ".tmp";
  write_text_file(tmp, gzip_compress(state_to_json(s).dump()));
  std::filesystem::rename(tmp, path);
}

EngineState load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("checkpoint " + path.string() + " does not exist");
  const std::string text = gzip_decompress(read_text_file(path));
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  return state_from_json(j);
}

}  // namespace cohort::engine
