#include <doctest.h>

#include <cmath>
#include <limits>

#include "cohort/config.hpp"
#include "cohort/core.hpp"
#include "cohort/csv.hpp"
#include "cohort/rng.hpp"
#include "support.hpp"

using namespace cohort;

TEST_SUITE("core") {
  TEST_CASE("ucla score range is enforced") {
    CHECK_NOTHROW(UclaScore(10));
    CHECK_NOTHROW(UclaScore(40));
    CHECK_THROWS_AS(UclaScore(9), ValidationError);
    CHECK_THROWS_AS(UclaScore(41), ValidationError);
  }

  TEST_CASE("label threshold is strict") {
    CHECK(label_from_score(UclaScore(20), 20) == Loneliness::NotLonely);
    CHECK(label_from_score(UclaScore(21), 20) == Loneliness::Lonely);
    CHECK(label_from_score(UclaScore(10), 20) == Loneliness::NotLonely);
    CHECK(label_from_score(UclaScore(40), 20) == Loneliness::Lonely);
  }

  TEST_CASE("day segments are half-open six-hour windows") {
    CHECK(segment_of(0) == DaySegment::Night);
    CHECK(segment_of(359) == DaySegment::Night);
    CHECK(segment_of(360) == DaySegment::Morning);
    CHECK(segment_of(719) == DaySegment::Morning);
    CHECK(segment_of(720) == DaySegment::Afternoon);
    CHECK(segment_of(1079) == DaySegment::Afternoon);
    CHECK(segment_of(1080) == DaySegment::Evening);
    CHECK(segment_of(1439) == DaySegment::Evening);
    CHECK_THROWS_AS(segment_of(1440), ValidationError);
    CHECK_THROWS_AS(segment_of(-1), ValidationError);
    for (int i = 0; i < kSegmentCount; ++i) {
      const auto s = static_cast<DaySegment>(i);
      CHECK(parse_segment(segment_name(s)) == s);
    }
    CHECK_THROWS_AS(parse_segment("noon"), ValidationError);
  }

  TEST_CASE("batch validation") {
    WeeklyBatch b;
    b.week = 2;
    FeatureRecord r;
    r.participant_id = "P001";
    r.week = 2;
    b.records.push_back(r);
    b.labels.emplace("P001", UclaScore(25));
    CHECK_NOTHROW(validate_batch(b));
    b.labels.emplace("P999", UclaScore(25));
    CHECK_THROWS_AS(validate_batch(b), ValidationError);
    b.labels.erase("P999");
    b.records[0].week = 3;
    CHECK_THROWS_AS(validate_batch(b), ValidationError);
  }

  TEST_CASE("config defaults validate and round-trip through json") {
    EngineConfig c;
    CHECK_NOTHROW(c.validate());
    c.eps = 0.75;
    c.learners.forest_trees = 7;
    CHECK(config_from_json(to_json(c)) == c);
  }

  TEST_CASE("config rejects unknown keys, listing all of them") {
    nlohmann::json j = {{"eps", 0.4}, {"epsilon", 1}, {"seed", 3}};
    try {
      config_from_json(j);
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("epsilon") != std::string::npos);
      CHECK(msg.find("seed") != std::string::npos);
    }
  }

  TEST_CASE("config rejects out-of-range values") {
    CHECK_THROWS_AS(config_from_json({{"eps", 0}}), ValidationError);
    CHECK_THROWS_AS(config_from_json({{"cv_folds", 1}}), ValidationError);
    CHECK_THROWS_AS(config_from_json({{"density_fraction", 1.0}}), ValidationError);
    CHECK_THROWS_AS(config_from_json({{"pca_variance_target", 1.5}}), ValidationError);
    CHECK_THROWS_AS(config_from_json({{"holdout_fraction", 1.0}}), ValidationError);
    CHECK_THROWS_AS(config_from_json({{"eps", "wide"}}), ValidationError);
  }

  TEST_CASE("format_double is the shortest round-trip decimal") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(std::numeric_limits<double>::quiet_NaN()).empty());
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
      const double v = rng.normal() * std::pow(10.0, static_cast<double>(rng.below(20)) - 10);
      CHECK(std::stod(format_double(v)) == v);
    }
  }

  TEST_CASE("csv escaping round-trips awkward fields") {
    CsvTable t;
    t.header = {"a", "b"};
    t.rows = {{"plain", "with,comma"}, {"with \"quote\"", "line\nbreak"}, {"", "x"}};
    const CsvTable back = parse_csv(to_csv(t));
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
    CHECK(csv_escape("a,b") == "\"a,b\"");
    CHECK(csv_escape("q\"") == "\"q\"\"\"");
  }

  TEST_CASE("batches and labels round-trip through csv tables") {
    const auto cohort = testsupport::small_cohort(10, 3);
    const WeeklyBatch& b = cohort.batches[2];
    WeeklyBatch back = batch_from_table(parse_csv(to_csv(batch_to_table(b))), b.week);
    REQUIRE(back.records.size() == b.records.size());
    for (std::size_t i = 0; i < b.records.size(); ++i) {
      const auto& x = b.records[i];
      const auto& y = back.records[i];
      CHECK(x.participant_id == y.participant_id);
      CHECK(x.day == y.day);
      CHECK(x.segment == y.segment);
      CHECK(x.categorical == y.categorical);
      for (const auto& [k, v] : x.continuous) {
        if (std::isnan(v)) {
          CHECK((!y.continuous.contains(k) || std::isnan(y.continuous.at(k))));
        } else {
          CHECK(y.continuous.at(k) == v);
        }
      }
    }
    CHECK(labels_from_table(parse_csv(to_csv(labels_to_table(cohort.scores)))) == cohort.scores);
  }

  TEST_CASE("seed mixing and rng are deterministic") {
    CHECK(mix_seed(42, "a") == mix_seed(42, "a"));
    CHECK(mix_seed(42, "a") != mix_seed(42, "b"));
    CHECK(mix_seed(42, 1) != mix_seed(43, 1));
    Rng a(5), b(5);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    Rng u(9);
    for (int i = 0; i < 10000; ++i) {
      const double x = u.uniform();
      CHECK((x >= 0.0 && x < 1.0));
      CHECK(u.below(7) < 7u);
    }
  }
}
