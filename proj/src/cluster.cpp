#include "cohort/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cohort/core.hpp"

namespace cohort::cluster {

std::set<std::set<std::string>> membership_sets(const Partition& p) {
  std::set<std::set<std::string>> out;
  for (const auto& [id, members] : p.clusters) out.emplace(members.begin(), members.end());
  return out;
}

std::string_view outcome_name(InsertOutcome::Kind k) noexcept {
  switch (k) {
    case InsertOutcome::Kind::Noise: return "noise";
    case InsertOutcome::Kind::JoinedExisting: return "joined_existing";
    case InsertOutcome::Kind::SeededNew: return "seeded_new";
    case InsertOutcome::Kind::MergedClusters: return "merged_clusters";
  }
  return "unknown";
}

ClusterRegistry::ClusterRegistry(double eps, double density_fraction, int min_pts_floor)
    : eps_(eps), density_fraction_(density_fraction), min_pts_floor_(min_pts_floor) {
  if (!(eps > 0) || !std::isfinite(eps)) throw ValidationError("eps must be positive");
  if (!(density_fraction >= 0 && density_fraction <= 1)) {
    throw ValidationError("density_fraction must lie in [0, 1]");
  }
  if (min_pts_floor < 1) throw ValidationError("min_pts_floor must be at least 1");
  core_threshold_ = min_pts_for(0);
}

int ClusterRegistry::min_pts_for(std::size_t n) const noexcept {
  const double scaled = std::ceil(density_fraction_ * static_cast<double>(n) - 1e-9);
  return std::max(min_pts_floor_, static_cast<int>(scaled));
}

std::size_t ClusterRegistry::CellHash::operator()(const CellKey& k) const noexcept {
  std::size_t h = 1469598103934665603ull;
  for (long long c : k) {
    h ^= static_cast<std::size_t>(c) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  }
  return h;
}

ClusterRegistry::CellKey ClusterRegistry::cell_of(const Eigen::VectorXd& v) const {
  // Slightly oversized cells keep every eps-neighbor in an adjacent cell
  // despite rounding in the division.
  const double size = eps_ * (1.0 + 1e-7);
  const Eigen::Index k = std::min<Eigen::Index>(v.size(), 3);
  CellKey key(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) key[i] = static_cast<long long>(std::floor(v(i) / size));
  return key;
}

std::vector<int> ClusterRegistry::range_query(const Eigen::VectorXd& v) const {
  const CellKey base = cell_of(v);
  const double eps2 = eps_ * eps_;
  std::vector<int> out;
  CellKey probe = base;
  const std::size_t k = base.size();
  std::size_t combos = 1;
  for (std::size_t i = 0; i < k; ++i) combos *= 3;
  for (std::size_t c = 0; c < combos; ++c) {
    std::size_t rest = c;
    for (std::size_t i = 0; i < k; ++i) {
      probe[i] = base[i] + static_cast<long long>(rest % 3) - 1;
      rest /= 3;
    }
    auto it = grid_.find(probe);
    if (it == grid_.end()) continue;
    for (int j : it->second) {
      if ((points_[j].v - v).squaredNorm() <= eps2) out.push_back(j);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

int ClusterRegistry::find(int i) const {
  while (parent_[i] != i) {
    parent_[i] = parent_[parent_[i]];
    i = parent_[i];
  }
  return i;
}

void ClusterRegistry::unite(int a, int b) {
  int ra = find(a);
  int rb = find(b);
  if (ra == rb) return;
  if (ra > rb) std::swap(ra, rb);
  parent_[rb] = ra;
  if (points_[min_core_[rb]].id < points_[min_core_[ra]].id) min_core_[ra] = min_core_[rb];
}

void ClusterRegistry::rebuild_cores() {
  const int m = min_pts();
  core_threshold_ = m;
  const int n = static_cast<int>(points_.size());
  for (int i = 0; i < n; ++i) {
    core_[i] = static_cast<int>(neighbors_[i].size()) >= m;
    parent_[i] = i;
    min_core_[i] = i;
  }
  for (int i = 0; i < n; ++i) {
    if (!core_[i]) continue;
    for (int q : neighbors_[i]) {
      if (q > i && core_[q]) unite(i, q);
    }
  }
}

int ClusterRegistry::cluster_of(int i) const {
  if (core_[i]) return min_core_[find(i)];
  int best = kNoise;
  for (int q : neighbors_[i]) {
    if (!core_[q]) continue;
    const int c = min_core_[find(q)];
    if (best == kNoise || points_[c].id < points_[best].id) best = c;
  }
  return best;
}

InsertOutcome ClusterRegistry::insert(const std::string& point_id, const Eigen::VectorXd& vector) {
  if (index_.contains(point_id)) throw ValidationError("duplicate point id '" + point_id + "'");
  if (vector.size() == 0) throw ValidationError("empty vector for point '" + point_id + "'");
  if (dim_ >= 0 && vector.size() != dim_) {
    throw ValidationError("point '" + point_id + "' has dimension " +
                          std::to_string(vector.size()) + ", registry expects " +
                          std::to_string(dim_));
  }
  if (!vector.allFinite()) throw ValidationError("point '" + point_id + "' is not finite");
  dim_ = vector.size();

  const int idx = static_cast<int>(points_.size());
  std::vector<int> before(static_cast<std::size_t>(idx), kNoise);
  for (int i = 0; i < idx; ++i) {
    if (core_[i]) before[i] = min_core_[find(i)];
  }

  points_.push_back({point_id, vector});
  index_.emplace(point_id, idx);
  grid_[cell_of(vector)].push_back(idx);
  core_.push_back(0);
  parent_.push_back(idx);
  min_core_.push_back(idx);
  neighbors_.emplace_back();
  const std::vector<int> near = range_query(vector);
  for (int j : near) {
    if (j != idx) neighbors_[j].push_back(idx);
  }
  neighbors_[idx] = near;

  const int m = min_pts();
  if (m != core_threshold_) {
    rebuild_cores();
  } else {
    std::vector<int> fresh;
    for (int p : near) {
      if (!core_[p] && static_cast<int>(neighbors_[p].size()) >= m) {
        core_[p] = 1;
        fresh.push_back(p);
      }
    }
    for (int p : fresh) {
      for (int q : neighbors_[p]) {
        if (core_[q]) unite(p, q);
      }
    }
  }

  InsertOutcome out;
  out.cluster = cluster_of(idx);
  if (out.cluster == kNoise) return out;
  const int root = find(out.cluster);
  std::set<int> prior;
  for (int i = 0; i < idx; ++i) {
    if (before[i] != kNoise && core_[i] && find(i) == root) prior.insert(before[i]);
  }
  out.merged.assign(prior.begin(), prior.end());
  if (prior.empty()) {
    out.kind = InsertOutcome::Kind::SeededNew;
  } else if (prior.size() == 1) {
    out.kind = InsertOutcome::Kind::JoinedExisting;
  } else {
    out.kind = InsertOutcome::Kind::MergedClusters;
  }
  return out;
}

std::vector<ClusterPoint> ClusterRegistry::points() const {
  std::vector<ClusterPoint> out;
  out.reserve(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const int ii = static_cast<int>(i);
    out.push_back({points_[i].id, points_[i].v, core_[i] != 0, cluster_of(ii)});
  }
  return out;
}

int ClusterRegistry::assignment(const std::string& point_id) const {
  auto it = index_.find(point_id);
  if (it == index_.end()) throw ValidationError("unknown point id '" + point_id + "'");
  return cluster_of(it->second);
}

Partition ClusterRegistry::partition() const {
  Partition p;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const int c = cluster_of(static_cast<int>(i));
    if (c == kNoise) {
      p.noise.push_back(points_[i].id);
    } else {
      p.clusters[c].push_back(points_[i].id);
    }
  }
  for (auto& [c, members] : p.clusters) std::sort(members.begin(), members.end());
  std::sort(p.noise.begin(), p.noise.end());
  return p;
}

nlohmann::json ClusterRegistry::to_json() const {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : points_) {
    pts.push_back({{"id", p.id}, {"vector", std::vector<double>(p.v.data(), p.v.data() + p.v.size())}});
  }
  nlohmann::json labels = nlohmann::json::object();
  for (const auto& [id, label] : cohort_ids) labels[std::to_string(id)] = label;
  return {{"eps", eps_},
          {"density_fraction", density_fraction_},
          {"min_pts_floor", min_pts_floor_},
          {"points", pts},
          {"cohort_ids", labels}};
}

ClusterRegistry ClusterRegistry::from_json(const nlohmann::json& j) {
  ClusterRegistry r(j.at("eps").get<double>(), j.at("density_fraction").get<double>(),
                    j.at("min_pts_floor").get<int>());
  for (const auto& p : j.at("points")) {
    auto v = p.at("vector").get<std::vector<double>>();
    r.insert(p.at("id").get<std::string>(),
             Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  for (const auto& [k, v] : j.at("cohort_ids").items()) r.cohort_ids[std::stoi(k)] = v.get<std::string>();
  return r;
}

Partition batch_dbscan(const std::vector<std::pair<std::string, Eigen::VectorXd>>& points,
                       double eps, int min_pts) {
  const int n = static_cast<int>(points.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return points[a].first < points[b].first; });

  const double eps2 = eps * eps;
  auto region = [&](int p) {
    std::vector<int> out;
    for (int q : order) {
      if ((points[q].second - points[p].second).squaredNorm() <= eps2) out.push_back(q);
    }
    return out;
  };

  constexpr int kUndefined = -2;
  std::vector<int> label(static_cast<std::size_t>(n), kUndefined);
  int next = 0;
  for (int p : order) {
    if (label[p] != kUndefined) continue;
    const auto seed_region = region(p);
    if (static_cast<int>(seed_region.size()) < min_pts) {
      label[p] = kNoise;
      continue;
    }
    const int c = next++;
    label[p] = c;
    std::vector<int> queue = seed_region;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      const int q = queue[qi];
      if (label[q] == kNoise) label[q] = c;
      if (label[q] != kUndefined) continue;
      label[q] = c;
      const auto r = region(q);
      if (static_cast<int>(r.size()) >= min_pts) queue.insert(queue.end(), r.begin(), r.end());
    }
  }

  Partition out;
  for (int i = 0; i < n; ++i) {
    if (label[i] == kNoise) {
      out.noise.push_back(points[i].first);
    } else {
      out.clusters[label[i]].push_back(points[i].first);
    }
  }
  for (auto& [c, members] : out.clusters) std::sort(members.begin(), members.end());
  std::sort(out.noise.begin(), out.noise.end());
  return out;
}

}  // namespace cohort::cluster
