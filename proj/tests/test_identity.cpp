#include <doctest.h>

#include "cohort/cluster.hpp"
#include "cohort/core.hpp"

using namespace cohort;
using namespace cohort::cluster;

namespace {

std::vector<std::string> ids(const std::string& prefix, int from, int to) {
  std::vector<std::string> out;
  for (int i = from; i < to; ++i) out.push_back(prefix + std::to_string(1000 + i));
  return out;
}

Partition partition_of(std::vector<std::vector<std::string>> clusters) {
  Partition p;
  int id = 0;
  for (auto& c : clusters) {
    std::sort(c.begin(), c.end());
    p.clusters[id++] = c;
  }
  return p;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_SUITE("identity") {
  TEST_CASE("jaccard") {
    CHECK(jaccard({"a", "b"}, {"b", "c"}) == doctest::Approx(1.0 / 3));
    CHECK(jaccard({"a"}, {"a"}) == 1.0);
    CHECK(jaccard({"a"}, {"b"}) == 0.0);
    CHECK(jaccard({}, {}) == 1.0);
  }

  TEST_CASE("first week issues fresh labels in cluster order") {
    const auto r = track_identity(IdentityState{}, partition_of({ids("a", 0, 10), ids("b", 0, 5)}));
    CHECK(r.labels.at(0) == "G1");
    CHECK(r.labels.at(1) == "G2");
    CHECK(r.state.next_index == 3);
  }

  TEST_CASE("identical partitions keep their labels") {
    const Partition p = partition_of({ids("a", 0, 10), ids("b", 0, 8), ids("c", 0, 6)});
    const auto first = track_identity(IdentityState{}, p);
    // Relabel internal ids to show matching is by membership, not id.
    Partition shuffled;
    shuffled.clusters[7] = p.clusters.at(2);
    shuffled.clusters[3] = p.clusters.at(0);
    shuffled.clusters[5] = p.clusters.at(1);
    const auto second = track_identity(first.state, shuffled);
    CHECK(second.labels.at(3) == first.labels.at(0));
    CHECK(second.labels.at(5) == first.labels.at(1));
    CHECK(second.labels.at(7) == first.labels.at(2));
    CHECK(second.state.next_index == first.state.next_index);
  }

  TEST_CASE("a 90/10 split keeps the label on the large part") {
    const auto big = ids("a", 0, 90);
    const auto small = ids("a", 90, 100);
    const auto first = track_identity(IdentityState{}, partition_of({concat(big, small)}));
    const auto second = track_identity(first.state, partition_of({small, big}));
    CHECK(second.labels.at(1) == "G1");  // the 90-member part
    CHECK(second.labels.at(0) == "G2");
  }

  TEST_CASE("growth by new members keeps the label through containment") {
    // Old membership of 10 lies inside a cluster of 30: Jaccard 1/3 but containment 1.
    const auto first = track_identity(IdentityState{}, partition_of({ids("a", 0, 10), ids("z", 0, 40)}));
    const auto second =
        track_identity(first.state, partition_of({concat(ids("a", 0, 10), ids("n", 0, 20)), ids("z", 0, 40)}));
    CHECK(second.labels.at(0) == "G1");
    CHECK(second.labels.at(1) == "G2");
  }

  TEST_CASE("a vanished cohort that re-forms with 80% of its members regains its label") {
    const auto g1 = ids("a", 0, 50);
    const auto g4 = ids("d", 0, 20);
    const auto wk7 = track_identity(IdentityState{}, partition_of({g1, g4}));
    REQUIRE(wk7.labels.at(1) == "G2");
    // Week 8: the small cohort is absorbed.
    const auto wk8 = track_identity(wk7.state, partition_of({concat(g1, g4)}));
    CHECK(wk8.labels.size() == 1);
    CHECK(wk8.labels.at(0) == "G1");
    // Week 9: 16 of the 20 old members plus 4 new ones form a cluster again.
    const auto back = concat(ids("d", 0, 16), ids("e", 0, 4));
    const auto wk9 = track_identity(wk8.state, partition_of({g1, back}));
    CHECK(wk9.labels.at(0) == "G1");
    CHECK(wk9.labels.at(1) == "G2");
    CHECK(wk9.state.next_index == 3);
  }

  TEST_CASE("labels are never issued twice in one week") {
    const auto first = track_identity(IdentityState{}, partition_of({ids("a", 0, 20)}));
    // Both halves overlap the old cohort by exactly half.
    const auto second = track_identity(first.state, partition_of({ids("a", 0, 10), ids("a", 10, 20)}));
    std::set<std::string> labels;
    for (const auto& [id, l] : second.labels) labels.insert(l);
    CHECK(labels.size() == 2);
    CHECK(labels.contains("G1"));
  }

  TEST_CASE("snapshot overload and json round trip") {
    ClusterSnapshot snap;
    snap.week = 3;
    snap.cohorts = {{"G1", ids("a", 0, 5)}, {"G4", ids("b", 0, 5)}};
    const IdentityState s = identity_from_snapshot(snap);
    CHECK(s.next_index == 5);
    const auto r = track_identity(snap, partition_of({ids("b", 0, 5), ids("c", 0, 5)}));
    CHECK(r.labels.at(0) == "G4");
    CHECK(r.labels.at(1) == "G5");
    const IdentityState back = identity_from_json(nlohmann::json::parse(to_json(r.state).dump()));
    CHECK(back.last_membership == r.state.last_membership);
    CHECK(back.next_index == r.state.next_index);
    CHECK(to_json(snap)["cohorts"]["G1"].size() == 5);
  }

  TEST_CASE("point ids") {
    CHECK(point_id("P001", 3) == "P001@w3");
    CHECK(parse_point_id("P001@w3") == std::pair<std::string, int>{"P001", 3});
    CHECK(parse_point_id("a@wb@w10") == std::pair<std::string, int>{"a@wb", 10});
    CHECK_THROWS_AS(parse_point_id("P001"), ValidationError);
    CHECK_THROWS_AS(parse_point_id("P001@w"), ValidationError);
    CHECK_THROWS_AS(parse_point_id("P001@wx"), ValidationError);
    CHECK_THROWS_AS(parse_point_id("@w3"), ValidationError);
  }

  TEST_CASE("snapshot names unlabeled clusters by internal id") {
    ClusterRegistry reg(1.0, 0.01, 2);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(2);
    reg.insert("x", v);
    reg.insert("y", v);
    auto snap = snapshot(reg, 1);
    REQUIRE(snap.cohorts.size() == 1);
    CHECK(snap.cohorts.begin()->first == "C0");
    reg.cohort_ids[0] = "G1";
    snap = snapshot(reg, 1);
    CHECK(snap.cohorts.begin()->first == "G1");
    CHECK(snap.cohorts.at("G1") == std::vector<std::string>{"x", "y"});
  }
}
