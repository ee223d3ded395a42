#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cohort/cluster.hpp"
#include "cohort/config.hpp"
#include "cohort/core.hpp"
#include "cohort/ensemble.hpp"
#include "cohort/preprocess.hpp"
#include "cohort/runlog.hpp"

namespace cohort::engine {

/// What the summary needs from each finished week.
struct WeekDigest {
  int week = 0;
  std::map<std::string, int> cohort_sizes;
  int noise_count = 0;
  std::vector<ens::ScopeMetrics> metrics;
};

struct EngineState {
  EngineConfig config;
  std::optional<prep::FittedPipeline> pipeline;
  cluster::ClusterRegistry registry;
  cluster::IdentityState identity;
  ens::ModelPool pool;
  int current_week = 0;
  RunLog log;
  std::map<std::string, int> labels;  ///< participant -> 0/1
  std::set<std::string> holdout;      ///< fixed after week 1
  /// Raw segment profiles of every inserted point, kept only when periodic
  /// refitting is enabled.
  std::vector<prep::SegmentProfile> raw_profiles;
  std::vector<WeekDigest> history;
};

EngineState initial_state(const EngineConfig& config);

struct WeeklyReport {
  int week = 0;
  std::map<std::string, int> cohort_sizes;  ///< this week's participants per cohort
  int noise_count = 0;
  std::vector<std::pair<std::string, std::string>> assignments;  ///< this week's point id -> cohort or "noise"
  cluster::ClusterSnapshot snapshot;                             ///< cumulative
  std::vector<ens::ParticipantVote> votes;  ///< every participant in the batch
  std::vector<ens::ScopeMetrics> metrics;   ///< hold-out evaluation
  std::map<std::string, int> trained_through;  ///< scope -> week
};

/// One weekly iteration. The input state is never modified, so a failed step
/// leaves the caller with the pre-step state.
std::pair<EngineState, WeeklyReport> step(const EngineState& state, const WeeklyBatch& batch);

/// Stratified hold-out: per class, participants in id order are shuffled and
/// round(fraction * count) are taken.
std::set<std::string> choose_holdout(const std::map<std::string, int>& labels, double fraction,
                                     std::uint64_t seed);

inline constexpr int kCheckpointSchemaVersion = 1;

nlohmann::json state_to_json(const EngineState& s);
EngineState state_from_json(const nlohmann::json& j);

/// gzip-compressed JSON (.csk).
void save(const EngineState& s, const std::filesystem::path& path);
EngineState load(const std::filesystem::path& path);

std::string gzip_compress(const std::string& data);
std::string gzip_decompress(const std::string& data);

struct ReplayOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> checkpoint;  ///< written after every week
  std::optional<std::filesystem::path> resume;      ///< start from this checkpoint
  bool plot = false;
};

/// Folds `step` over consecutive batches starting at week 1 (or after the
/// resumed week) and writes every report plus the summary. Returns the
/// reports produced by this call.
std::vector<WeeklyReport> run_replay(const EngineConfig& config, std::vector<WeeklyBatch> batches,
                                     const ReplayOptions& options);

/// Loads week_<n>.csv files and labels.csv from a directory. Labels are
/// attached to week 1.
std::vector<WeeklyBatch> load_batches(const std::filesystem::path& data_dir);

// ---------------------------------------------------------------------------
// Reports

std::string report_csv(const WeeklyReport& r);
std::string clusters_csv(const WeeklyReport& r);
std::string votes_csv(const WeeklyReport& r);

/// Per week: generic metrics per kind, the mean over cohorts of specialized
/// metrics per kind, and the voting ensemble.
struct SummaryRow {
  int week = 0;
  std::string scope;  ///< generic | specialized_mean | voting
  std::string kind;
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
};

std::vector<SummaryRow> summarize(const std::vector<WeekDigest>& history);
std::string summary_csv(const std::vector<SummaryRow>& rows);
nlohmann::json summary_json(const std::vector<WeekDigest>& history,
                            const std::vector<SummaryRow>& rows);

/// Line chart of one metric over weeks, one line per (scope, kind).
std::string metric_svg(const std::vector<SummaryRow>& rows, const std::string& metric);
/// Cohort sizes over weeks.
std::string cohort_svg(const std::vector<WeekDigest>& history);

/// Reads a written report_week_<n>.csv back.
std::vector<ens::ScopeMetrics> read_report_csv(const std::string& text);

/// Cohorts holding at least one of that week's points.
inline int cohort_count(const WeeklyReport& r) { return static_cast<int>(r.cohort_sizes.size()); }

}  // namespace cohort::engine
