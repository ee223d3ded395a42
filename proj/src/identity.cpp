#include <algorithm>
#include <tuple>

#include "cohort/cluster.hpp"
#include "cohort/core.hpp"

namespace cohort::cluster {

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& x : a) common += b.contains(x);
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

namespace {

std::size_t overlap(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::size_t common = 0;
  for (const auto& x : a) common += b.contains(x);
  return common;
}

int label_index(const std::string& label) {
  if (label.size() < 2 || label[0] != 'G') return 0;
  try {
    return std::stoi(label.substr(1));
  } catch (const std::exception&) {
    return 0;
  }
}

}  // namespace

IdentityResult track_identity(const IdentityState& prev, const Partition& current) {
  std::map<int, std::set<std::string>> members;
  for (const auto& [id, m] : current.clusters) members[id] = {m.begin(), m.end()};

  IdentityResult out;
  out.state = prev;
  std::set<std::string> used;

  std::vector<std::tuple<double, std::string, int>> pairs;
  for (const auto& [id, m] : members) {
    for (const auto& [label, old] : prev.last_membership) {
      const double j = jaccard(m, old);
      if (j >= 0.5) pairs.emplace_back(j, label, id);
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
    return std::get<2>(a) < std::get<2>(b);
  });
  for (const auto& [j, label, id] : pairs) {
    if (out.labels.contains(id) || used.contains(label)) continue;
    out.labels[id] = label;
    used.insert(label);
  }

  // Larger clusters pick first among containment candidates.
  std::vector<int> rest;
  for (const auto& [id, m] : members) {
    if (!out.labels.contains(id)) rest.push_back(id);
  }
  std::stable_sort(rest.begin(), rest.end(),
                   [&](int a, int b) { return members[a].size() > members[b].size(); });
  for (int id : rest) {
    const std::string* best = nullptr;
    std::size_t best_size = 0;
    for (const auto& [label, old] : prev.last_membership) {
      if (used.contains(label) || old.empty()) continue;
      if (2 * overlap(old, members[id]) < old.size()) continue;
      if (best == nullptr || old.size() > best_size) {
        best = &label;
        best_size = old.size();
      }
    }
    if (best) {
      out.labels[id] = *best;
      used.insert(*best);
    }
  }

  for (const auto& [id, m] : members) {
    if (out.labels.contains(id)) continue;
    out.labels[id] = "G" + std::to_string(out.state.next_index++);
  }
  for (const auto& [id, label] : out.labels) out.state.last_membership[label] = members[id];
  return out;
}

IdentityState identity_from_snapshot(const ClusterSnapshot& snap) {
  IdentityState s;
  for (const auto& [label, m] : snap.cohorts) {
    s.last_membership[label] = {m.begin(), m.end()};
    s.next_index = std::max(s.next_index, label_index(label) + 1);
  }
  return s;
}

IdentityResult track_identity(const ClusterSnapshot& prev, const Partition& current) {
  return track_identity(identity_from_snapshot(prev), current);
}

ClusterSnapshot snapshot(const ClusterRegistry& registry, int week) {
  ClusterSnapshot s;
  s.week = week;
  Partition p = registry.partition();
  for (auto& [id, m] : p.clusters) {
    auto it = registry.cohort_ids.find(id);
    const std::string label = it != registry.cohort_ids.end() ? it->second : "C" + std::to_string(id);
    auto& dst = s.cohorts[label];
    dst.insert(dst.end(), m.begin(), m.end());
    std::sort(dst.begin(), dst.end());
  }
  s.noise = std::move(p.noise);
  return s;
}

std::string point_id(const std::string& participant, int week) {
  return participant + "@w" + std::to_string(week);
}

std::pair<std::string, int> parse_point_id(const std::string& id) {
  const auto at = id.rfind("@w");
  if (at == std::string::npos || at == 0 || at + 2 >= id.size()) {
    throw ValidationError("malformed point id '" + id + "'");
  }
  std::size_t used = 0;
  int week = 0;
  try {
    week = std::stoi(id.substr(at + 2), &used);
  } catch (const std::exception&) {
    throw ValidationError("malformed point id '" + id + "'");
  }
  if (used != id.size() - at - 2) throw ValidationError("malformed point id '" + id + "'");
  return {id.substr(0, at), week};
}

nlohmann::json to_json(const ClusterSnapshot& s) {
  return {{"week", s.week}, {"cohorts", s.cohorts}, {"noise", s.noise}};
}

nlohmann::json to_json(const IdentityState& s) {
  return {{"last_membership", s.last_membership}, {"next_index", s.next_index}};
}

IdentityState identity_from_json(const nlohmann::json& j) {
  IdentityState s;
  s.last_membership = j.at("last_membership").get<std::map<std::string, std::set<std::string>>>();
  s.next_index = j.at("next_index").get<int>();
  return s;
}

}  // namespace cohort::cluster
