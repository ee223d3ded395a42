#include "cohort/synthgen.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "cohort/rng.hpp"

namespace cohort::synth {
namespace {

constexpr double kMissingRate = 0.05;
constexpr double kOutlierRate = 0.01;
constexpr double kOutlierFactor = 10.0;
constexpr double kPlaceFidelity = 0.85;

using Seg = DaySegment;

// Observation windows, indexed like kFeatureNames.
constexpr std::array<std::array<bool, kSegmentCount>, 7> kObserved = {{
    // night, morning, afternoon, evening
    {false, true, true, true},    // physical_activity
    {false, false, false, true},  // calls
    {false, false, true, false},  // sms
    {true, true, true, true},     // bluetooth_unique
    {false, true, true, false},   // location_changes
    {true, true, true, true},     // phone_usage
    {true, false, false, false},  // sleep_duration
}};

// Feature each group's planted loneliness signal moves, and its sign.
struct Signal {
  std::size_t feature;
  double sign;
};
Signal signal_for(const std::string& group) {
  if (group == "G1") return {5, +1.0};
  if (group == "G2") return {5, -1.0};
  if (group == "G3") return {3, +1.0};
  return {3, -1.0};
}

std::string participant_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "P%03d", i);
  return buf;
}

std::string study_day(int week, int day) {
  using namespace std::chrono;
  const sys_days start = year{2019} / April / 1;
  const year_month_day ymd{start + days{7 * (week - 1) + day}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

struct Cell {
  const char* group;
  WeekInterval weeks;
  // activity, calls & sms, bluetooth, location, phone, sleep
  std::array<const char*, 6> descriptors;
  int lo, hi;
  const char* place;
};

GroupProfile make_profile(const Cell& c) {
  GroupProfile p;
  p.group_id = c.group;
  p.weeks = c.weeks;
  p.score_lo = c.lo;
  p.score_hi = c.hi;
  p.dominant_place = c.place;
  // calls and sms share a descriptor in the profile table.
  const std::array<int, 7> source = {0, 1, 1, 2, 3, 4, 5};
  for (std::size_t f = 0; f < kFeatureNames.size(); ++f) {
    Level lv = descriptor_level(c.descriptors[source[f]]);
    p.feature_means[kFeatureNames[f]] = lv.mean;
    p.feature_spreads[kFeatureNames[f]] = lv.variable ? 2 * kParticipantSpread : kParticipantSpread;
  }
  return p;
}

}  // namespace

bool observed_in(std::size_t feature, DaySegment segment) noexcept {
  return feature < kObserved.size() && kObserved[feature][static_cast<int>(segment)];
}

Level descriptor_level(const std::string& d) {
  if (d == "High" || d == "Frequent") return {1.0, false};
  if (d == "Moderate" || d == "Average" || d == "Regular") return {0.6, false};
  if (d == "Low" || d == "Fewer" || d == "Short") return {0.3, false};
  if (d == "Variable") return {0.6, true};
  // Relative descriptors: a step away from the neighboring level.
  if (d == "Reduced" || d == "Increased") return {0.8, false};
  throw ConfigError("unknown behavioral descriptor '" + d + "'");
}

std::vector<GroupProfile> build_default_profiles() {
  // Descriptor order: activity, calls & SMS, bluetooth, location, phone, sleep.
  // Cells that leave a descriptor unstated use "Moderate"/"Fewer" as noted.
  static const std::array<Cell, 14> cells = {{
      {"G1", {1, 4}, {"High", "Frequent", "High", "Regular", "Moderate", "Average"}, 10, 18, "campus"},
      {"G2", {1, 4}, {"High", "Average", "Average", "Moderate", "Moderate", "Average"}, 15, 26, "home"},
      {"G3", {1, 4}, {"Low", "Fewer", "Fewer", "Moderate", "High", "Short"}, 16, 30, "home"},
      {"G1", {5, 7}, {"High", "Frequent", "High", "Regular", "Moderate", "Average"}, 10, 22, "campus"},
      {"G2", {5, 7}, {"Reduced", "Fewer", "Average", "Moderate", "Increased", "Reduced"}, 15, 32, "home"},
      {"G3", {5, 7}, {"Low", "Fewer", "Average", "Fewer", "High", "Short"}, 18, 36, "home"},
      {"G4", {5, 7}, {"Moderate", "Variable", "High", "Regular", "Moderate", "Variable"}, 14, 28, "social"},
      {"G1", {8, 8}, {"High", "Frequent", "High", "Regular", "Moderate", "Average"}, 10, 20, "campus"},
      {"G2", {8, 8}, {"High", "Average", "Average", "Moderate", "Regular", "Average"}, 15, 25, "home"},
      {"G3", {8, 8}, {"Low", "Variable", "Fewer", "Moderate", "High", "Short"}, 18, 36, "home"},
      {"G1", {9, 10}, {"High", "Frequent", "High", "Regular", "Moderate", "Average"}, 10, 20, "campus"},
      {"G2", {9, 10}, {"High", "Average", "Average", "Moderate", "Regular", "Average"}, 16, 32, "home"},
      {"G3", {9, 10}, {"Low", "Variable", "Fewer", "Moderate", "High", "Short"}, 18, 36, "home"},
      {"G4", {9, 10}, {"Low", "Variable", "Variable", "Moderate", "Moderate", "Average"}, 14, 35, "social"},
  }};
  std::vector<GroupProfile> out;
  out.reserve(cells.size());
  for (const auto& c : cells) out.push_back(make_profile(c));
  return out;
}

const GroupProfile* find_profile(const std::vector<GroupProfile>& profiles,
                                 const std::string& group, int week) {
  for (const auto& p : profiles) {
    if (p.group_id == group && p.weeks.contains(week)) return &p;
  }
  return nullptr;
}

std::string CohortPlan::group_of(const std::string& participant, int week) const {
  auto wit = weekly_group_membership.find(week);
  if (wit == weekly_group_membership.end()) return {};
  for (const auto& [g, members] : wit->second) {
    if (members.contains(participant)) return g;
  }
  return {};
}

std::vector<std::string> CohortPlan::participants() const {
  std::set<std::string> all;
  for (const auto& [w, groups] : weekly_group_membership) {
    for (const auto& [g, members] : groups) all.insert(members.begin(), members.end());
  }
  return {all.begin(), all.end()};
}

CohortPlan default_plan() {
  // Week-1 sizes: G1 = 84 follows the reported group size; G2 = 70 and
  // G3 = 51 are synthetic. Later sizes are synthetic as well.
  CohortPlan plan;
  std::vector<std::string> g1, g2, g3;
  for (int i = 1; i <= 84; ++i) g1.push_back(participant_name(i));
  for (int i = 85; i <= 154; ++i) g2.push_back(participant_name(i));
  for (int i = 155; i <= 205; ++i) g3.push_back(participant_name(i));

  auto slice = [](const std::vector<std::string>& v, std::size_t from, std::size_t to) {
    return std::set<std::string>(v.begin() + from, v.begin() + to);
  };
  auto join = [](std::initializer_list<std::set<std::string>> parts) {
    std::set<std::string> out;
    for (const auto& p : parts) out.insert(p.begin(), p.end());
    return out;
  };

  for (int w = 1; w <= 4; ++w) {
    plan.weekly_group_membership[w] = {
        {"G1", slice(g1, 0, 84)}, {"G2", slice(g2, 0, 70)}, {"G3", slice(g3, 0, 51)}};
  }
  // Weeks 5-7: G4 forms from the tail of each baseline group (39 + 50 + 26).
  const auto g4_core = join({slice(g1, 45, 84), slice(g2, 20, 70), slice(g3, 25, 51)});
  for (int w = 5; w <= 7; ++w) {
    plan.weekly_group_membership[w] = {{"G1", slice(g1, 0, 45)},
                                       {"G2", slice(g2, 0, 20)},
                                       {"G3", slice(g3, 0, 25)},
                                       {"G4", g4_core}};
  }
  // Week 8: G4 is reabsorbed; six baseline-G2 members move to G1, four to G3.
  plan.weekly_group_membership[8] = {
      {"G1", join({slice(g1, 0, 84), slice(g2, 60, 66)})},
      {"G2", slice(g2, 0, 60)},
      {"G3", join({slice(g3, 0, 51), slice(g2, 66, 70)})}};
  // Weeks 9-10: G4 re-forms around its weeks 5-7 members plus ten more.
  const auto g4_late = join({g4_core, slice(g1, 40, 45), slice(g2, 15, 20)});
  for (int w = 9; w <= 10; ++w) {
    plan.weekly_group_membership[w] = {{"G1", slice(g1, 0, 40)},
                                       {"G2", slice(g2, 0, 15)},
                                       {"G3", slice(g3, 0, 25)},
                                       {"G4", g4_late}};
  }
  return plan;
}

CohortPlan planted_plan() {
  CohortPlan plan = default_plan();
  plan.label_signal = kPlantedSignal;
  return plan;
}

void check_plan(const CohortPlan& plan, const std::vector<GroupProfile>& profiles) {
  for (const auto& [week, groups] : plan.weekly_group_membership) {
    if (week < 1 || week > kWeeks) {
      throw ConfigError("plan week " + std::to_string(week) + " outside [1, 10]");
    }
    std::set<std::string> seen;
    for (const auto& [g, members] : groups) {
      if (!members.empty() && !find_profile(profiles, g, week)) {
        throw ConfigError("plan places participants in group " + g + " in week " +
                          std::to_string(week) + ", which has no profile");
      }
      for (const auto& m : members) {
        if (!seen.insert(m).second) {
          throw ConfigError("participant " + m + " is in two groups in week " +
                            std::to_string(week));
        }
      }
    }
  }
  const auto all = plan.participants();
  if (static_cast<int>(all.size()) != plan.total_participants) {
    throw ConfigError("plan lists " + std::to_string(all.size()) + " participants, expected " +
                      std::to_string(plan.total_participants));
  }
  if (plan.lonely_count < 0 || plan.lonely_count > plan.total_participants) {
    throw ConfigError("lonely_count outside [0, total_participants]");
  }
}

std::vector<FeatureRecord> participant_week_records(const std::string& participant, int week,
                                                    const GroupProfile& profile,
                                                    double label_offset, std::uint64_t seed) {
  // Participant offsets persist across weeks; day noise is per participant-week.
  Rng offset_rng(mix_seed(seed, "offset#" + participant));
  std::array<double, kFeatureNames.size()> offset{};
  for (auto& o : offset) o = offset_rng.normal();

  Rng rng(mix_seed(seed, participant + "#week" + std::to_string(week)));
  const Signal signal = signal_for(profile.group_id);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::vector<FeatureRecord> out;
  out.reserve(kDaysPerWeek * kSegmentCount);
  for (int d = 0; d < kDaysPerWeek; ++d) {
    for (int s = 0; s < kSegmentCount; ++s) {
      FeatureRecord r;
      r.participant_id = participant;
      r.week = week;
      r.day = study_day(week, d);
      r.segment = static_cast<DaySegment>(s);
      for (std::size_t f = 0; f < kFeatureNames.size(); ++f) {
        const char* name = kFeatureNames[f];
        const double spread = profile.feature_spreads.at(name);
        const double day_sd = kDaySpread * spread / kParticipantSpread;
        double v = profile.feature_means.at(name) + spread * offset[f] + day_sd * rng.normal();
        if (f == signal.feature) v += signal.sign * label_offset;
        r.continuous[name] = observed_in(f, r.segment) ? v : nan;
      }
      const double u = rng.uniform();
      const std::size_t alt = rng.below(kPlaceTokens.size());
      r.categorical[kPlaceFeature] = u < kPlaceFidelity ? profile.dominant_place : kPlaceTokens[alt];

      if (rng.uniform() < kMissingRate) {
        // Blank one observed value (the categorical slot is index 7).
        std::vector<std::size_t> slots;
        for (std::size_t f = 0; f < kFeatureNames.size(); ++f) {
          if (observed_in(f, r.segment)) slots.push_back(f);
        }
        slots.push_back(kFeatureNames.size());
        const std::size_t pick = slots[rng.below(slots.size())];
        if (pick == kFeatureNames.size()) {
          r.categorical[kPlaceFeature].clear();
        } else {
          r.continuous[kFeatureNames[pick]] = nan;
        }
      }
      if (rng.uniform() < kOutlierRate) {
        for (auto& [k, v] : r.continuous) v *= kOutlierFactor;
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

namespace {

// Chooses exactly plan.lonely_count lonely participants, apportioned across
// final-week groups by the share of each group's score range above the
// threshold, then draws each score uniformly from the matching sub-range.
std::map<std::string, UclaScore> draw_scores(const CohortPlan& plan,
                                             const std::vector<GroupProfile>& profiles,
                                             std::uint64_t seed, int threshold = 20) {
  const int final_week = kWeeks;
  std::map<std::string, std::vector<std::string>> by_group;
  for (const auto& pid : plan.participants()) {
    std::string g = plan.group_of(pid, final_week);
    if (g.empty()) throw ConfigError("participant " + pid + " has no group in week 10");
    by_group[g].push_back(pid);
  }
  struct Share {
    std::string group;
    const GroupProfile* profile;
    int capacity;
    double quota;
    int take;
  };
  std::vector<Share> shares;
  double expected = 0;
  for (const auto& [g, members] : by_group) {
    const GroupProfile* p = find_profile(profiles, g, final_week);
    if (!p) throw ConfigError("group " + g + " has no profile in week 10");
    const int width = p->score_hi - p->score_lo + 1;
    const int above = std::max(0, p->score_hi - std::max(threshold, p->score_lo - 1));
    const double frac = static_cast<double>(above) / width;
    const int capacity = above > 0 ? static_cast<int>(members.size()) : 0;
    shares.push_back({g, p, capacity, frac * members.size(), 0});
    expected += frac * members.size();
  }
  int capacity_total = 0;
  for (const auto& s : shares) capacity_total += s.capacity;
  if (plan.lonely_count > capacity_total) {
    throw ConfigError("lonely_count exceeds the number of participants whose group can score > 20");
  }
  // Largest-remainder apportionment of lonely_count.
  int assigned = 0;
  std::vector<std::pair<double, std::size_t>> remainders;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    const double q = expected > 0 ? shares[i].quota * plan.lonely_count / expected : 0;
    shares[i].take = std::min(shares[i].capacity, static_cast<int>(std::floor(q)));
    assigned += shares[i].take;
    remainders.emplace_back(q - std::floor(q), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  while (assigned < plan.lonely_count) {
    bool progressed = false;
    for (const auto& [rem, i] : remainders) {
      if (assigned == plan.lonely_count) break;
      if (shares[i].take < shares[i].capacity) {
        ++shares[i].take;
        ++assigned;
        progressed = true;
      }
    }
    if (!progressed) break;
  }

  std::map<std::string, UclaScore> scores;
  Rng rng(mix_seed(seed, "scores"));
  for (const auto& s : shares) {
    std::vector<std::string> members = by_group[s.group];
    rng.shuffle(std::span<std::string>(members));
    const int lonely_lo = std::max(threshold + 1, s.profile->score_lo);
    const int calm_hi = std::min(threshold, s.profile->score_hi);
    for (std::size_t i = 0; i < members.size(); ++i) {
      const bool lonely = static_cast<int>(i) < s.take;
      const int lo = lonely ? lonely_lo : s.profile->score_lo;
      const int hi = lonely ? s.profile->score_hi : calm_hi;
      if (lo > hi) throw ConfigError("group " + s.group + " cannot host the requested labels");
      const int score = lo + static_cast<int>(rng.below(static_cast<std::size_t>(hi - lo + 1)));
      scores.emplace(members[i], UclaScore(score));
    }
  }
  return scores;
}

}  // namespace

Cohort generate_cohort(const CohortPlan& plan, const std::vector<GroupProfile>& profiles,
                       std::uint64_t seed) {
  check_plan(plan, profiles);
  Cohort cohort;
  cohort.scores = draw_scores(plan, profiles, seed);
  for (int w = 1; w <= kWeeks; ++w) {
    WeeklyBatch batch;
    batch.week = w;
    auto wit = plan.weekly_group_membership.find(w);
    if (wit == plan.weekly_group_membership.end()) {
      throw ConfigError("plan has no membership for week " + std::to_string(w));
    }
    std::map<std::string, std::string> group_of;
    for (const auto& [g, members] : wit->second) {
      for (const auto& m : members) group_of[m] = g;
    }
    for (const auto& [pid, g] : group_of) {
      const GroupProfile* p = find_profile(profiles, g, w);
      const bool lonely = cohort.scores.at(pid).value() > 20;
      const double offset = plan.label_signal * (lonely ? 1.0 : -1.0);
      auto recs = participant_week_records(pid, w, *p, offset, seed);
      batch.records.insert(batch.records.end(), std::make_move_iterator(recs.begin()),
                           std::make_move_iterator(recs.end()));
      batch.labels.emplace(pid, cohort.scores.at(pid));
    }
    cohort.batches.push_back(std::move(batch));
  }
  return cohort;
}

WeeklyBatch inject_drift(const WeeklyBatch& batch, const std::vector<DriftMove>& moves,
                         const std::vector<GroupProfile>& profiles, std::uint64_t seed) {
  std::map<std::string, const GroupProfile*> targets;
  for (const auto& m : moves) {
    const bool present = std::any_of(batch.records.begin(), batch.records.end(),
                                     [&](const auto& r) { return r.participant_id == m.participant_id; });
    if (!present) {
      throw ValidationError("drift move names unknown participant " + m.participant_id);
    }
    const GroupProfile* p = find_profile(profiles, m.target_group, batch.week);
    if (!p) {
      throw ConfigError("drift target " + m.target_group + " has no profile in week " +
                        std::to_string(batch.week));
    }
    targets[m.participant_id] = p;
  }
  if (targets.empty()) return batch;

  WeeklyBatch out;
  out.week = batch.week;
  out.labels = batch.labels;
  std::set<std::string> emitted;
  for (const auto& r : batch.records) {
    auto it = targets.find(r.participant_id);
    if (it == targets.end()) {
      out.records.push_back(r);
      continue;
    }
    if (!emitted.insert(r.participant_id).second) continue;
    auto recs = participant_week_records(r.participant_id, batch.week, *it->second, 0.0, seed);
    out.records.insert(out.records.end(), recs.begin(), recs.end());
  }
  return out;
}

CohortPlan apply_moves(const CohortPlan& plan, int week, const std::vector<DriftMove>& moves) {
  CohortPlan out = plan;
  auto& groups = out.weekly_group_membership[week];
  for (const auto& m : moves) {
    for (auto& [g, members] : groups) members.erase(m.participant_id);
    groups[m.target_group].insert(m.participant_id);
  }
  return out;
}

nlohmann::json plan_to_json(const CohortPlan& plan) {
  nlohmann::json weeks = nlohmann::json::object();
  for (const auto& [w, groups] : plan.weekly_group_membership) {
    nlohmann::json gj = nlohmann::json::object();
    for (const auto& [g, members] : groups) gj[g] = std::vector<std::string>(members.begin(), members.end());
    weeks[std::to_string(w)] = gj;
  }
  return {{"total_participants", plan.total_participants},
          {"lonely_count", plan.lonely_count},
          {"label_signal", plan.label_signal},
          {"weekly_group_membership", weeks}};
}

CohortPlan plan_from_json(const nlohmann::json& j) {
  CohortPlan plan;
  try {
    plan.total_participants = j.at("total_participants").get<int>();
    plan.lonely_count = j.at("lonely_count").get<int>();
    plan.label_signal = j.value("label_signal", 0.0);
    for (const auto& [w, groups] : j.at("weekly_group_membership").items()) {
      auto& dst = plan.weekly_group_membership[std::stoi(w)];
      for (const auto& [g, members] : groups.items()) {
        auto v = members.get<std::vector<std::string>>();
        dst[g] = std::set<std::string>(v.begin(), v.end());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed plan: ") + e.what());
  }
  return plan;
}

}  // namespace cohort::synth
