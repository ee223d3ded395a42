#pragma once

#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace cohort::cluster {

inline constexpr int kNoise = -1;

struct ClusterPoint {
  std::string point_id;
  Eigen::VectorXd vector;
  bool core = false;
  int cluster = kNoise;  ///< internal id, or kNoise
};

/// Internal cluster id -> member point ids (sorted), plus noise.
struct Partition {
  std::map<int, std::vector<std::string>> clusters;
  std::vector<std::string> noise;
};

/// Membership sets only, for comparisons up to relabeling.
std::set<std::set<std::string>> membership_sets(const Partition& p);

struct InsertOutcome {
  enum class Kind { Noise, JoinedExisting, SeededNew, MergedClusters };
  Kind kind = Kind::Noise;
  int cluster = kNoise;       ///< internal id the new point ended up in
  std::vector<int> merged;    ///< pre-insert internal ids folded together
};

std::string_view outcome_name(InsertOutcome::Kind k) noexcept;

/// Insertion-only DBSCAN. min_pts grows with the number of stored points:
/// max(min_pts_floor, ceil(density_fraction * n)). A point counts itself as a
/// neighbor. Internal cluster ids are the insertion index of the cluster's
/// lexicographically smallest core point id. A border point within eps of
/// several clusters belongs to the one whose smallest core id is smallest.
class ClusterRegistry {
 public:
  ClusterRegistry() = default;
  ClusterRegistry(double eps, double density_fraction, int min_pts_floor);

  InsertOutcome insert(const std::string& point_id, const Eigen::VectorXd& vector);

  double eps() const noexcept { return eps_; }
  double density_fraction() const noexcept { return density_fraction_; }
  int min_pts_floor() const noexcept { return min_pts_floor_; }
  int min_pts() const noexcept { return min_pts_for(points_.size()); }
  std::size_t size() const noexcept { return points_.size(); }
  Eigen::Index dimension() const noexcept { return dim_; }
  bool contains(const std::string& point_id) const { return index_.contains(point_id); }

  /// Points in insertion order with current core flags and assignments.
  std::vector<ClusterPoint> points() const;
  int assignment(const std::string& point_id) const;
  Partition partition() const;

  /// Stable cohort label per internal id, maintained by the caller.
  std::map<int, std::string> cohort_ids;

  nlohmann::json to_json() const;
  static ClusterRegistry from_json(const nlohmann::json& j);

 private:
  struct Stored {
    std::string id;
    Eigen::VectorXd v;
  };
  using CellKey = std::vector<long long>;
  struct CellHash {
    std::size_t operator()(const CellKey& k) const noexcept;
  };

  int min_pts_for(std::size_t n) const noexcept;
  CellKey cell_of(const Eigen::VectorXd& v) const;
  std::vector<int> range_query(const Eigen::VectorXd& v) const;
  int find(int i) const;
  void unite(int a, int b);
  void rebuild_cores();
  int cluster_of(int i) const;

  double eps_ = 0.5;
  double density_fraction_ = 0.1;
  int min_pts_floor_ = 5;
  Eigen::Index dim_ = -1;
  std::vector<Stored> points_;
  std::unordered_map<std::string, int> index_;
  std::unordered_map<CellKey, std::vector<int>, CellHash> grid_;
  std::vector<std::vector<int>> neighbors_;  ///< includes self
  std::vector<char> core_;
  int core_threshold_ = 0;  ///< min_pts the core flags were computed for
  mutable std::vector<int> parent_;
  std::vector<int> min_core_;  ///< per root: core with smallest id
};

/// Textbook DBSCAN visiting points in ascending point-id order; a border
/// point goes to the first cluster that claims it. Linear-scan neighbors.
Partition batch_dbscan(const std::vector<std::pair<std::string, Eigen::VectorXd>>& points,
                       double eps, int min_pts);

// ---------------------------------------------------------------------------
// Cohort identity

struct ClusterSnapshot {
  int week = 0;
  std::map<std::string, std::vector<std::string>> cohorts;  ///< label -> sorted point ids
  std::vector<std::string> noise;
};

/// Snapshot using registry.cohort_ids; clusters without a label are reported
/// as "C<internal id>".
ClusterSnapshot snapshot(const ClusterRegistry& registry, int week);

/// Last known membership of every label ever issued, and the next free index.
struct IdentityState {
  std::map<std::string, std::set<std::string>> last_membership;
  int next_index = 1;
};

IdentityState identity_from_snapshot(const ClusterSnapshot& snap);

struct IdentityResult {
  std::map<int, std::string> labels;  ///< internal id -> cohort label
  IdentityState state;
};

/// Matches current clusters to labels. First a one-to-one greedy pass on
/// Jaccard overlap >= 0.5 against every label's last membership (largest
/// overlap first). Clusters still unmatched inherit the largest unmatched
/// label whose last membership lies at least half inside them, which covers
/// growth and merges. Anything left gets a fresh "G<k>".
IdentityResult track_identity(const IdentityState& prev, const Partition& current);
IdentityResult track_identity(const ClusterSnapshot& prev, const Partition& current);

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

/// Point id for a participant's vector in a given week.
std::string point_id(const std::string& participant, int week);
/// Inverse of point_id; throws on malformed ids.
std::pair<std::string, int> parse_point_id(const std::string& id);

nlohmann::json to_json(const ClusterSnapshot& s);
nlohmann::json to_json(const IdentityState& s);
IdentityState identity_from_json(const nlohmann::json& j);

}  // namespace cohort::cluster
