#include <algorithm>
#include <numeric>

#include "cohort/core.hpp"
#include "cohort/learners.hpp"
#include "cohort/rng.hpp"

namespace cohort::learn {
namespace {

/// Row indices of `d` in canonical order.
std::vector<std::size_t> canonical_order(const Dataset& d) {
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const Row& ra = d.rows[a];
    const Row& rb = d.rows[b];
    if (ra.participant_id != rb.participant_id) return ra.participant_id < rb.participant_id;
    if (ra.label != rb.label) return ra.label < rb.label;
    return std::lexicographical_compare(ra.x.data(), ra.x.data() + ra.x.size(), rb.x.data(),
                                        rb.x.data() + rb.x.size());
  });
  return idx;
}

}  // namespace

std::vector<int> stratified_folds(const Dataset& d, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("k-fold needs k >= 2, got " + std::to_string(k));
  const std::size_t smaller = std::min(d.count(0), d.count(1));
  if (smaller < static_cast<std::size_t>(k)) {
    throw ValidationError("k-fold with k = " + std::to_string(k) + " needs at least k rows of each class; the smaller class has " +
                          std::to_string(smaller) + ", so use k <= " + std::to_string(smaller));
  }
  const auto order = canonical_order(d);
  std::vector<int> fold(d.size(), -1);
  Rng rng(mix_seed(seed, "folds"));
  std::size_t dealer = 0;
  for (int label : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i : order) {
      if (d.rows[i].label == label) members.push_back(i);
    }
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t i : members) fold[i] = static_cast<int>(dealer++ % static_cast<std::size_t>(k));
  }
  return fold;
}

CvResult kfold_cv(const Dataset& d, int k, const TrainFn& train, std::uint64_t seed,
                  int smote_neighbors) {
  check_dataset(d);
  CvResult out;
  out.fold = stratified_folds(d, k, seed);
  out.predictions.assign(d.size(), 0);
  for (int f = 0; f < k; ++f) {
    Dataset tr;
    std::vector<std::size_t> test;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (out.fold[i] == f) {
        test.push_back(i);
      } else {
        tr.rows.push_back(d.rows[i]);
      }
    }
    const std::uint64_t fold_seed = mix_seed(seed, static_cast<std::uint64_t>(f) + 1);
    if (smote_neighbors > 0 && std::min(tr.count(0), tr.count(1)) >= 2) {
      tr = smote(tr, smote_neighbors, fold_seed);
    }
    const TrainedModel m = train(tr, fold_seed);
    for (std::size_t i : test) out.predictions[i] = m.predict(d.rows[i].x);
  }
  std::vector<int> labels;
  labels.reserve(d.size());
  for (const auto& r : d.rows) labels.push_back(r.label);
  out.metrics = compute_metrics(out.predictions, labels);
  return out;
}

}  // namespace cohort::learn
