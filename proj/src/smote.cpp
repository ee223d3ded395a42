#include <algorithm>
#include <numeric>

#include "cohort/core.hpp"
#include "cohort/learners.hpp"
#include "cohort/rng.hpp"

namespace cohort::learn {

Dataset smote(const Dataset& d, int k_neighbors, std::uint64_t seed) {
  check_dataset(d);
  if (k_neighbors < 1) throw ValidationError("smote needs k_neighbors >= 1");
  const std::size_t n1 = d.count(1);
  const std::size_t n0 = d.size() - n1;
  if (n0 == n1) return d;
  const int minority = n1 < n0 ? 1 : 0;
  const std::size_t have = std::min(n0, n1);
  const std::size_t need = std::max(n0, n1) - have;
  if (have < 2) {
    throw ValidationError("smote needs at least 2 minority samples, got " + std::to_string(have));
  }

  std::vector<Row> pool;
  for (const auto& r : canonical(d).rows) {
    if (r.label == minority) pool.push_back(r);
  }
  const std::size_t m = pool.size();
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(k_neighbors), m - 1);

  // k nearest minority neighbors of each minority row; distance ties go to
  // the earlier row in canonical order.
  std::vector<std::vector<std::size_t>> nn(m);
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t i = 0; i < m; ++i) {
    dist.clear();
    for (std::size_t j = 0; j < m; ++j) {
      if (j != i) dist.emplace_back((pool[j].x - pool[i].x).squaredNorm(), j);
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    for (std::size_t t = 0; t < k; ++t) nn[i].push_back(dist[t].second);
  }

  Rng rng(mix_seed(seed, "smote"));
  Dataset out = d;
  out.rows.reserve(d.size() + need);
  for (std::size_t s = 0; s < need; ++s) {
    const std::size_t base = s % m;
    const std::size_t other = nn[base][rng.below(k)];
    const double u = rng.uniform();
    Row r;
    r.x = pool[base].x + u * (pool[other].x - pool[base].x);
    r.label = minority;
    r.participant_id = pool[base].participant_id + "#smote" + std::to_string(s);
    out.rows.push_back(std::move(r));
  }
  return out;
}

}  // namespace cohort::learn
