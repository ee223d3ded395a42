#include <doctest.h>

#include <cmath>

#include "cohort/synthgen.hpp"
#include "support.hpp"

using namespace cohort;
using namespace cohort::synth;

namespace {

std::set<std::string> nonempty_groups(const CohortPlan& plan, int week) {
  std::set<std::string> out;
  for (const auto& [g, members] : plan.weekly_group_membership.at(week)) {
    if (!members.empty()) out.insert(g);
  }
  return out;
}

/// Mean of one feature over a participant's observed records.
double feature_mean(const WeeklyBatch& b, const std::string& pid, const std::string& feature) {
  double sum = 0;
  int n = 0;
  for (const auto& r : b.records) {
    if (r.participant_id != pid) continue;
    auto it = r.continuous.find(feature);
    if (it == r.continuous.end() || std::isnan(it->second)) continue;
    sum += it->second;
    ++n;
  }
  return n ? sum / n : std::nan("");
}

}  // namespace

TEST_SUITE("synthgen") {
  TEST_CASE("profile table score ranges") {
    const auto profiles = build_default_profiles();
    const GroupProfile* g1 = find_profile(profiles, "G1", 2);
    REQUIRE(g1);
    CHECK(g1->score_lo == 10);
    CHECK(g1->score_hi == 18);
    const GroupProfile* g3 = find_profile(profiles, "G3", 9);
    REQUIRE(g3);
    CHECK(g3->score_lo == 18);
    CHECK(g3->score_hi == 36);
    for (int w = 1; w <= 4; ++w) CHECK(find_profile(profiles, "G4", w) == nullptr);
    CHECK(find_profile(profiles, "G4", 5) != nullptr);
    CHECK(find_profile(profiles, "G4", 8) == nullptr);
  }

  TEST_CASE("descriptor levels") {
    CHECK(descriptor_level("High").mean > descriptor_level("Moderate").mean);
    CHECK(descriptor_level("Moderate").mean > descriptor_level("Low").mean);
    CHECK(descriptor_level("Variable").variable);
    CHECK_FALSE(descriptor_level("High").variable);
    CHECK_THROWS_AS(descriptor_level("Enormous"), ConfigError);
  }

  TEST_CASE("default plan shape") {
    const CohortPlan plan = default_plan();
    CHECK(plan.total_participants == 205);
    CHECK(plan.lonely_count == 87);
    CHECK(plan.weekly_group_membership.at(1).at("G1").size() == 84);
    const std::vector<std::size_t> expected = {3, 3, 3, 3, 4, 4, 4, 3, 4, 4};
    for (int w = 1; w <= kWeeks; ++w) {
      CHECK(nonempty_groups(plan, w).size() == expected[static_cast<std::size_t>(w - 1)]);
      std::size_t members = 0;
      for (const auto& [g, m] : plan.weekly_group_membership.at(w)) members += m.size();
      CHECK(members == 205);
    }
    CHECK_NOTHROW(check_plan(plan, build_default_profiles()));
  }

  TEST_CASE("plan checks") {
    const auto profiles = build_default_profiles();
    CohortPlan plan = default_plan();
    plan.weekly_group_membership[2]["G4"].insert("P001");  // no G4 profile in week 2
    CHECK_THROWS_AS(check_plan(plan, profiles), ConfigError);
    plan = default_plan();
    plan.weekly_group_membership[3]["G2"].insert("P001");  // also in G1
    CHECK_THROWS_AS(check_plan(plan, profiles), ConfigError);
    plan = default_plan();
    plan.total_participants = 300;
    CHECK_THROWS_AS(check_plan(plan, profiles), ConfigError);
  }

  TEST_CASE("plan json round trip") {
    const CohortPlan plan = planted_plan();
    const CohortPlan back = plan_from_json(plan_to_json(plan));
    CHECK(back.weekly_group_membership == plan.weekly_group_membership);
    CHECK(back.total_participants == plan.total_participants);
    CHECK(back.lonely_count == plan.lonely_count);
    CHECK(back.label_signal == plan.label_signal);
  }

  TEST_CASE("generation is deterministic and matches the plan") {
    const auto a = testsupport::small_cohort(5, 11);
    const auto b = testsupport::small_cohort(5, 11);
    REQUIRE(a.batches.size() == b.batches.size());
    for (std::size_t i = 0; i < a.batches.size(); ++i) {
      CHECK(testsupport::same_batch(a.batches[i], b.batches[i]));
    }
    CHECK(a.scores == b.scores);
    const auto c = testsupport::small_cohort(5, 12);
    CHECK_FALSE(testsupport::same_batch(a.batches[0], c.batches[0]));
    REQUIRE(a.batches.size() == static_cast<std::size_t>(kWeeks));
    const auto plan = testsupport::small_plan(5);
    for (const auto& batch : a.batches) {
      std::map<std::string, int> per_participant;
      for (const auto& r : batch.records) {
        CHECK(r.week == batch.week);
        ++per_participant[r.participant_id];
      }
      CHECK(per_participant.size() == static_cast<std::size_t>(plan.total_participants));
      for (const auto& [pid, n] : per_participant) CHECK(n == kDaysPerWeek * kSegmentCount);
    }
  }

  TEST_CASE("scores follow the lonely count and the final-week score ranges") {
    const auto cohort = generate_cohort(default_plan(), build_default_profiles(), 42);
    const auto plan = default_plan();
    const auto profiles = build_default_profiles();
    int lonely = 0;
    for (const auto& [pid, score] : cohort.scores) {
      if (score.value() > 20) ++lonely;
      const GroupProfile* p = find_profile(profiles, plan.group_of(pid, kWeeks), kWeeks);
      REQUIRE(p);
      CHECK(score.value() >= p->score_lo);
      CHECK(score.value() <= p->score_hi);
    }
    CHECK(cohort.scores.size() == 205);
    CHECK(lonely == 87);
  }

  TEST_CASE("empty drift leaves the batch unchanged") {
    const auto cohort = testsupport::small_cohort(5, 3);
    const auto& b = cohort.batches[1];
    CHECK(testsupport::same_batch(inject_drift(b, {}, build_default_profiles(), 3), b));
  }

  TEST_CASE("drift to G3 raises phone usage and lowers activity") {
    const auto cohort = generate_cohort(default_plan(), build_default_profiles(), 5);
    const auto& b = cohort.batches[0];
    const std::string pid = "P001";  // a G1 member
    REQUIRE(default_plan().group_of(pid, 1) == "G1");
    const WeeklyBatch moved = inject_drift(b, {{pid, "G3"}}, build_default_profiles(), 5);
    CHECK(feature_mean(moved, pid, "phone_usage") > feature_mean(b, pid, "phone_usage"));
    CHECK(feature_mean(moved, pid, "physical_activity") < feature_mean(b, pid, "physical_activity"));
    REQUIRE(moved.records.size() == b.records.size());
    for (std::size_t i = 0; i < b.records.size(); ++i) {
      if (b.records[i].participant_id != pid) CHECK(testsupport::same_record(moved.records[i], b.records[i]));
    }
    CHECK_THROWS_AS(inject_drift(b, {{"P999", "G3"}}, build_default_profiles(), 5), ValidationError);
  }

  TEST_CASE("moving all G2 members to G1 removes a group") {
    const CohortPlan plan = default_plan();
    std::vector<DriftMove> moves;
    for (const auto& m : plan.weekly_group_membership.at(2).at("G2")) moves.push_back({m, "G1"});
    const CohortPlan moved = apply_moves(plan, 2, moves);
    CHECK(nonempty_groups(moved, 2).size() + 1 == nonempty_groups(plan, 2).size());
  }
}
