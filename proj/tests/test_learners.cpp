#include <doctest.h>

#include <cmath>
#include <map>

#include "cohort/core.hpp"
#include "cohort/learners.hpp"
#include "cohort/rng.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cohort;
using namespace cohort::learn;

namespace {

std::vector<int> labels_of(const Dataset& d) {
  std::vector<int> out;
  for (const auto& r : d.rows) out.push_back(r.label);
  return out;
}

double accuracy(const TrainedModel& m, const Dataset& d) {
  return compute_metrics(m.predict(d), labels_of(d)).accuracy;
}

/// Four points per class, linearly separable with a wide margin.
Dataset separable() {
  Dataset d;
  const double pts[8][2] = {{-3, -1}, {-2, 0}, {-3, 1}, {-4, 0}, {3, -1}, {2, 0}, {3, 1}, {4, 0}};
  for (int i = 0; i < 8; ++i) {
    Eigen::VectorXd x(2);
    x << pts[i][0], pts[i][1];
    d.rows.push_back({x, i < 4 ? 0 : 1, "s" + std::to_string(i)});
  }
  return d;
}

/// Reference check of SMOTE output: balanced, originals first, and every
/// synthetic row on a segment from its base to one of the base's k nearest
/// minority neighbors.
void check_smote(const Dataset& in, const Dataset& out, int k) {
  const std::size_t n1 = in.count(1), n0 = in.count(0);
  const int minority = n1 < n0 ? 1 : 0;
  REQUIRE(out.count(0) == out.count(1));
  REQUIRE(out.size() == 2 * std::max(n0, n1));
  for (std::size_t i = 0; i < in.size(); ++i) {
    CHECK(out.rows[i].participant_id == in.rows[i].participant_id);
    CHECK(out.rows[i].x == in.rows[i].x);
  }
  std::map<std::string, Eigen::VectorXd> minority_rows;
  for (const auto& r : in.rows) {
    if (r.label == minority) minority_rows[r.participant_id] = r.x;
  }
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), minority_rows.size() - 1);
  for (std::size_t i = in.size(); i < out.size(); ++i) {
    const Row& s = out.rows[i];
    CHECK(s.label == minority);
    const std::string base_id = s.participant_id.substr(0, s.participant_id.find('#'));
    REQUIRE(minority_rows.contains(base_id));
    const Eigen::VectorXd& base = minority_rows.at(base_id);
    std::vector<std::pair<double, std::string>> dist;
    for (const auto& [id, x] : minority_rows) {
      if (id != base_id) dist.emplace_back((x - base).squaredNorm(), id);
    }
    std::sort(dist.begin(), dist.end());
    bool on_segment = false;
    for (std::size_t t = 0; t < kk && !on_segment; ++t) {
      const Eigen::VectorXd dir = minority_rows.at(dist[t].second) - base;
      const double u = dir.dot(s.x - base) / dir.squaredNorm();
      on_segment = u >= -1e-9 && u <= 1 + 1e-9 && (base + u * dir - s.x).norm() <= 1e-9;
    }
    CHECK(on_segment);
  }
}

}  // namespace

TEST_SUITE("learners") {
  TEST_CASE("metrics of a worked confusion matrix") {
    // TP 2, FP 1, FN 1, TN 6.
    const std::vector<int> pred = {1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
    const std::vector<int> lab = {1, 1, 0, 1, 0, 0, 0, 0, 0, 0};
    const Metrics m = compute_metrics(pred, lab);
    CHECK(m.tp == 2);
    CHECK(m.fp == 1);
    CHECK(m.fn == 1);
    CHECK(m.tn == 6);
    CHECK(m.accuracy == doctest::Approx(0.8));
    CHECK(m.precision == doctest::Approx(2.0 / 3));
    CHECK(m.recall == doctest::Approx(2.0 / 3));
    CHECK(m.f1 == doctest::Approx(2.0 / 3));
  }

  TEST_CASE("metrics degenerate rules") {
    const Metrics none = metrics_from_counts(0, 0, 0, 5);
    CHECK(none.precision == 1.0);
    CHECK(none.recall == 1.0);
    CHECK(none.f1 == 1.0);
    const Metrics missed = metrics_from_counts(0, 0, 3, 2);
    CHECK(missed.precision == 0.0);
    CHECK(missed.recall == 0.0);
    CHECK(missed.f1 == 0.0);
    const Metrics false_alarm = metrics_from_counts(0, 2, 0, 3);
    CHECK(false_alarm.precision == 0.0);
    CHECK(false_alarm.recall == 0.0);
    CHECK(false_alarm.f1 == 0.0);
    const Metrics constant = compute_metrics(std::vector<int>{1, 1, 1, 1}, std::vector<int>{1, 0, 1, 0});
    CHECK(constant.accuracy == 0.5);
    CHECK(constant.recall == 1.0);
    CHECK(constant.precision == 0.5);
    CHECK_THROWS_AS(compute_metrics(std::vector<int>{1}, std::vector<int>{1, 0}), ValidationError);
  }

  TEST_CASE("metrics agree with the counting oracle") {
    Rng rng(7);
    for (int t = 0; t < 50; ++t) {
      const std::size_t n = 1 + rng.below(40);
      std::vector<int> pred(n), lab(n);
      for (std::size_t i = 0; i < n; ++i) {
        pred[i] = static_cast<int>(rng.below(2));
        lab[i] = static_cast<int>(rng.below(2));
      }
      const auto c = oracle::confusion(pred, lab);
      const Metrics m = compute_metrics(pred, lab);
      CHECK(m.tp == c.tp);
      CHECK(m.fp == c.fp);
      CHECK(m.fn == c.fn);
      CHECK(m.tn == c.tn);
      CHECK(m.accuracy == doctest::Approx(static_cast<double>(c.tp + c.tn) / static_cast<double>(n)));
      if (c.tp > 0) {
        const double p = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
        const double r = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
        CHECK(m.f1 == doctest::Approx(2 * p * r / (p + r)));
      }
    }
  }

  TEST_CASE("smote balances and interpolates") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const Dataset d = testsupport::blobs(90, 30, 3, 2.0, seed);
      const Dataset out = smote(d, 5, seed);
      CHECK(out.count(0) == 90);
      CHECK(out.count(1) == 90);
      check_smote(d, out, 5);
    }
  }

  TEST_CASE("smote with two minority points stays on their segment") {
    Dataset d;
    Eigen::VectorXd a(2), b(2);
    a << 0, 0;
    b << 1, 1;
    d.rows.push_back({a, 1, "a"});
    d.rows.push_back({b, 1, "b"});
    for (int i = 0; i < 6; ++i) d.rows.push_back({Eigen::VectorXd::Constant(2, 5.0 + i), 0, "n" + std::to_string(i)});
    const Dataset out = smote(d, 5, 3);
    REQUIRE(out.count(1) == 6);
    for (std::size_t i = d.size(); i < out.size(); ++i) {
      const auto& x = out.rows[i].x;
      CHECK(x(0) == doctest::Approx(x(1)));
      CHECK(x(0) >= 0.0);
      CHECK(x(0) <= 1.0);
    }
    check_smote(d, out, 5);
  }

  TEST_CASE("smote edge cases") {
    const Dataset balanced = testsupport::blobs(10, 10, 2, 1.0, 1);
    CHECK(smote(balanced, 5, 1).size() == 20);
    const Dataset lonely = testsupport::blobs(10, 1, 2, 1.0, 1);
    CHECK_THROWS_AS(smote(lonely, 5, 1), ValidationError);
    CHECK_THROWS_AS(smote(testsupport::blobs(10, 3, 2, 1.0, 1), 0, 1), ValidationError);
  }

  TEST_CASE("logistic gradient matches central differences") {
    Rng rng(11);
    for (int t = 0; t < 10; ++t) {
      const Dataset d = testsupport::blobs(15, 12, 4, 1.0, 100 + static_cast<std::uint64_t>(t));
      const Eigen::MatrixXd X = design_matrix(d);
      const Eigen::VectorXd y = label_vector(d);
      Eigen::VectorXd w(4);
      for (int j = 0; j < 4; ++j) w(j) = rng.normal();
      const double b = rng.normal();
      const double l2 = 0.01;
      const Eigen::VectorXd g = logreg_gradient(X, y, w, b, l2);
      const double h = 1e-5;
      for (int j = 0; j <= 4; ++j) {
        Eigen::VectorXd wp = w, wm = w;
        double bp = b, bm = b;
        if (j < 4) {
          wp(j) += h;
          wm(j) -= h;
        } else {
          bp += h;
          bm -= h;
        }
        const double fd = (logreg_loss(X, y, wp, bp, l2) - logreg_loss(X, y, wm, bm, l2)) / (2 * h);
        CHECK(std::abs(fd - g(j)) <= 1e-6 * std::max(1.0, std::abs(fd)));
      }
    }
  }

  TEST_CASE("every kind separates a separable fixture") {
    const Dataset d = separable();
    for (ModelKind k : kAllKinds) {
      LearnerConfig cfg;
      const TrainedModel m = train_kind(k, d, 1, cfg);
      CAPTURE(kind_name(k));
      CHECK(accuracy(m, d) == 1.0);
      CHECK(m.dimension == 2);
    }
  }

  TEST_CASE("logistic bias is near zero on symmetric data") {
    const Dataset d = separable();
    const TrainedModel m = train_logreg(d, 1);
    CHECK(std::abs(std::get<LinearModel>(m.params).b) < 1e-6);
  }

  TEST_CASE("linear models ignore row order and duplication of the whole set") {
    const Dataset d = testsupport::blobs(30, 30, 3, 1.5, 4);
    Dataset shuffled = d;
    Rng rng(9);
    rng.shuffle(std::span(shuffled.rows));
    Dataset doubled = d;
    doubled.rows.insert(doubled.rows.end(), d.rows.begin(), d.rows.end());
    for (ModelKind k : {ModelKind::LogReg, ModelKind::LinearSVM}) {
      const auto a = train_kind(k, d, 1, {});
      const auto b = train_kind(k, shuffled, 1, {});
      const auto c = train_kind(k, doubled, 1, {});
      CHECK(std::get<LinearModel>(a.params).w == std::get<LinearModel>(b.params).w);
      CHECK(a.predict(d) == c.predict(d));
    }
  }

  TEST_CASE("linear trainers reject single-class data") {
    const Dataset d = testsupport::blobs(10, 0, 2, 1.0, 1);
    CHECK_THROWS_AS(train_logreg(d, 1), ValidationError);
    CHECK_THROWS_AS(train_linear_svm(d, 1), ValidationError);
    CHECK_THROWS_AS(train_gbt(d, 1), ValidationError);
  }

  TEST_CASE("forest on single-class data predicts that class") {
    const Dataset d = testsupport::blobs(0, 12, 2, 1.0, 1);
    const TrainedModel m = train_random_forest(d, 1);
    for (const auto& r : d.rows) CHECK(m.predict(r.x) == 1);
  }

  TEST_CASE("forest is deterministic and generalizes on blobs") {
    const Dataset train = testsupport::blobs(60, 60, 4, 2.0, 21);
    const Dataset test = testsupport::blobs(50, 50, 4, 2.0, 22);
    const TrainedModel a = train_random_forest(train, 5);
    const TrainedModel b = train_random_forest(train, 5);
    CHECK(model_to_json(a) == model_to_json(b));
    CHECK(accuracy(a, test) >= 0.85);
    const TrainedModel c = train_random_forest(train, 6);
    CHECK(model_to_json(a) != model_to_json(c));
  }

  TEST_CASE("gbt with zero rounds predicts the base rate") {
    const Dataset d = testsupport::blobs(30, 10, 2, 1.0, 3);
    LearnerConfig cfg;
    cfg.gbt_rounds = 0;
    const TrainedModel m = train_gbt(d, 1, cfg);
    for (const auto& r : d.rows) CHECK(m.score(r.x) == doctest::Approx(0.25));
  }

  TEST_CASE("gbt training loss does not increase") {
    const Dataset d = testsupport::blobs(40, 40, 3, 1.0, 8);
    const TrainedModel m = train_gbt(d, 1);
    const auto curve = gbt_loss_curve(m, d);
    REQUIRE(curve.size() == 101);
    for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i] <= curve[i - 1] + 1e-12);
    CHECK(curve.back() < curve.front());
  }

  TEST_CASE("stratified folds on 205 rows") {
    const Dataset d = testsupport::blobs(118, 87, 2, 1.0, 1);
    const auto fold = stratified_folds(d, 10, 42);
    std::vector<int> sizes(10);
    std::vector<int> positives(10);
    for (std::size_t i = 0; i < fold.size(); ++i) {
      REQUIRE(fold[i] >= 0);
      REQUIRE(fold[i] < 10);
      ++sizes[static_cast<std::size_t>(fold[i])];
      positives[static_cast<std::size_t>(fold[i])] += d.rows[i].label;
    }
    for (int s : sizes) CHECK((s == 20 || s == 21));
    for (int p : positives) CHECK((p == 8 || p == 9));
    CHECK_THROWS_AS(stratified_folds(d, 1, 42), ValidationError);
    CHECK_THROWS_AS(stratified_folds(testsupport::blobs(20, 5, 2, 1.0, 1), 10, 42), ValidationError);
  }

  TEST_CASE("cross-validation predicts every row once from a model that never saw it") {
    const Dataset d = testsupport::blobs(30, 20, 2, 3.0, 2);
    std::map<int, std::set<std::string>> trained_on;
    int calls = 0;
    auto fit = [&](const Dataset& tr, std::uint64_t s) {
      for (const auto& r : tr.rows) trained_on[calls].insert(r.participant_id);
      ++calls;
      return train_logreg(tr, s);
    };
    const CvResult cv = kfold_cv(d, 5, fit, 1);
    CHECK(calls == 5);
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK_FALSE(trained_on[cv.fold[i]].contains(d.rows[i].participant_id));
    }
    CHECK(cv.metrics.tp + cv.metrics.fp + cv.metrics.fn + cv.metrics.tn == 50);
    CHECK(cv.metrics.accuracy >= 0.9);
  }

  TEST_CASE("model json round trip predicts identically") {
    const Dataset d = testsupport::blobs(25, 25, 3, 1.0, 6);
    for (ModelKind k : kAllKinds) {
      const TrainedModel m = train_kind(k, d, 3, {});
      const TrainedModel back = model_from_json(nlohmann::json::parse(model_to_json(m).dump()));
      CHECK(back.kind == k);
      for (const auto& r : d.rows) CHECK(back.score(r.x) == m.score(r.x));
    }
    nlohmann::json bad = model_to_json(train_logreg(d, 1));
    bad["schema_version"] = 99;
    CHECK_THROWS(model_from_json(bad));
  }

  TEST_CASE("warm start continues from the previous model") {
    const Dataset d = testsupport::blobs(40, 40, 2, 1.0, 12);
    const TrainedModel cold = train_logreg(d, 1);
    const auto& lm = std::get<LinearModel>(cold.params);
    const TrainedModel warm = train_logreg(d, 1, {}, &lm);
    const Eigen::MatrixXd X = design_matrix(d);
    const Eigen::VectorXd y = label_vector(d);
    const auto& wm = std::get<LinearModel>(warm.params);
    CHECK(logreg_loss(X, y, wm.w, wm.b, 1e-3) <= logreg_loss(X, y, lm.w, lm.b, 1e-3));
    CHECK(wm.steps == lm.steps + warm.iterations);
    const TrainedModel svm = train_linear_svm(d, 1);
    const TrainedModel svm2 = train_linear_svm(d, 1, {}, &std::get<LinearModel>(svm.params));
    CHECK(std::get<LinearModel>(svm2.params).steps == 1000);
  }

  TEST_CASE("kind names round trip") {
    for (ModelKind k : kAllKinds) CHECK(parse_kind(kind_name(k)) == k);
    CHECK_THROWS(parse_kind("knn"));
  }
}
