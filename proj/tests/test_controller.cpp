#include <algorithm>
#include <optional>
#include <vector>

#include "doctest.h"
#include "swqkd/controller.hpp"
#include "swqkd/errors.hpp"

using namespace swqkd;

namespace {

ControllerSnapshot snap(SwitchConfiguration config, std::uint64_t l1, std::uint64_t l2,
                        std::uint64_t l3, std::uint64_t l4, double time_s = 1000.0) {
  ControllerSnapshot s;
  s.time_s = time_s;
  s.stable = true;
  s.config = config;
  s.level_bytes = {l1, l2, l3, l4};
  return s;
}

SwitchPolicy policy_8k_6k() {
  SwitchPolicy p;
  p.bar_threshold_bytes = 8000;
  p.cross_threshold_bytes = 6000;
  p.min_dwell_s = 60.0;
  return p;
}

}  // namespace

TEST_CASE("aggregate names parse and print") {
  CHECK(to_string(LevelAggregate::Min) == "min");
  CHECK(to_string(LevelAggregate::Max) == "max");
  CHECK(to_string(LevelAggregate::Either) == "either");
  CHECK(parse_aggregate("min") == LevelAggregate::Min);
  CHECK(parse_aggregate("max") == LevelAggregate::Max);
  CHECK(parse_aggregate("either") == LevelAggregate::Either);
  CHECK_THROWS_AS(parse_aggregate("median"), ParamError);
}

TEST_CASE("aggregate level reads the right pair of buffers") {
  ControllerSnapshot s = snap(SwitchConfiguration::Bar, 100, 200, 300, 400);
  CHECK(aggregate_level(s, SwitchConfiguration::Bar, LevelAggregate::Min) == 100.0);
  CHECK(aggregate_level(s, SwitchConfiguration::Bar, LevelAggregate::Max) == 200.0);
  CHECK(aggregate_level(s, SwitchConfiguration::Bar, LevelAggregate::Either) == 100.0);
  CHECK(aggregate_level(s, SwitchConfiguration::Cross, LevelAggregate::Min) == 300.0);
  CHECK(aggregate_level(s, SwitchConfiguration::Cross, LevelAggregate::Max) == 400.0);
}

TEST_CASE("decisions are deferred while bring-up or a switch is running") {
  SwitchPolicy p = policy_8k_6k();
  ControllerSnapshot starving = snap(SwitchConfiguration::Bar, 50000, 50000, 0, 0);

  SwitchDecision d = decide(starving, p, std::nullopt, false);
  CHECK_FALSE(d.is_switch());
  CHECK(d.reason == "bring-up in progress");

  starving.stable = false;
  d = decide(starving, p, std::nullopt, true);
  CHECK_FALSE(d.is_switch());
  CHECK(d.reason == "switch in progress");
}

TEST_CASE("minimum dwell blocks strictly and allows at equality") {
  SwitchPolicy p = policy_8k_6k();
  ControllerSnapshot starving = snap(SwitchConfiguration::Bar, 50000, 50000, 0, 0, 159.999);

  SwitchDecision d = decide(starving, p, 100.0, true);
  CHECK_FALSE(d.is_switch());
  CHECK(d.reason == "min dwell not elapsed");

  starving.time_s = 160.0;  // exactly min_dwell after the last switch activity
  d = decide(starving, p, 100.0, true);
  CHECK(d.is_switch());

  // Without any prior switch there is no dwell to respect.
  starving.time_s = 0.0;
  d = decide(starving, p, std::nullopt, true);
  CHECK(d.is_switch());
}

TEST_CASE("threshold comparison is strict") {
  SwitchPolicy p = policy_8k_6k();

  SwitchDecision at = decide(snap(SwitchConfiguration::Bar, 50000, 50000, 6000, 6000), p,
                             std::nullopt, true);
  CHECK_FALSE(at.is_switch());
  CHECK(at.reason == "no threshold breached");

  SwitchDecision below = decide(snap(SwitchConfiguration::Bar, 50000, 50000, 5999, 6000), p,
                                std::nullopt, true);
  CHECK(below.is_switch());
  CHECK(below.target == SwitchConfiguration::Cross);
  CHECK(below.reason == "L3 level 5999 below cross threshold 6000");
}

TEST_CASE("the starving configuration is the switch target, in either direction") {
  SwitchPolicy p = policy_8k_6k();

  SwitchDecision to_cross = decide(snap(SwitchConfiguration::Bar, 9000, 9000, 7000, 100), p,
                                   std::nullopt, true);
  CHECK(to_cross.is_switch());
  CHECK(to_cross.target == SwitchConfiguration::Cross);
  CHECK(to_cross.reason == "L4 level 100 below cross threshold 6000");

  SwitchDecision to_bar = decide(snap(SwitchConfiguration::Cross, 7999, 9000, 7000, 7000), p,
                                 std::nullopt, true);
  CHECK(to_bar.is_switch());
  CHECK(to_bar.target == SwitchConfiguration::Bar);
  CHECK(to_bar.reason == "L1 level 7999 below bar threshold 8000");

  // The standing configuration's own levels never trigger a switch.
  SwitchDecision own = decide(snap(SwitchConfiguration::Bar, 0, 0, 50000, 50000), p,
                              std::nullopt, true);
  CHECK_FALSE(own.is_switch());
}

TEST_CASE("breaching link naming follows the aggregate and ties go to the first link") {
  SwitchPolicy p = policy_8k_6k();

  // Min aggregate names the smaller level; tie names the pair's first link.
  SwitchDecision d = decide(snap(SwitchConfiguration::Bar, 9000, 9000, 5000, 5000), p,
                            std::nullopt, true);
  CHECK(d.reason == "L3 level 5000 below cross threshold 6000");

  d = decide(snap(SwitchConfiguration::Bar, 9000, 9000, 5500, 5000), p, std::nullopt, true);
  CHECK(d.reason == "L4 level 5000 below cross threshold 6000");

  // Max aggregate requires both below and names the larger level.
  p.aggregate = LevelAggregate::Max;
  d = decide(snap(SwitchConfiguration::Bar, 9000, 9000, 5000, 7000), p, std::nullopt, true);
  CHECK_FALSE(d.is_switch());
  d = decide(snap(SwitchConfiguration::Bar, 9000, 9000, 5000, 5500), p, std::nullopt, true);
  CHECK(d.is_switch());
  CHECK(d.reason == "L4 level 5500 below cross threshold 6000");
  d = decide(snap(SwitchConfiguration::Bar, 9000, 9000, 5500, 5500), p, std::nullopt, true);
  CHECK(d.reason == "L3 level 5500 below cross threshold 6000");
}

TEST_CASE("decide matches a flat re-derivation over a level and mode grid") {
  const std::uint64_t grid[] = {0, 5999, 6000, 7999, 8000, 50000};
  for (SwitchConfiguration current : {SwitchConfiguration::Bar, SwitchConfiguration::Cross}) {
    for (SwitchConfiguration priority : {SwitchConfiguration::Bar, SwitchConfiguration::Cross}) {
      for (LevelAggregate agg :
           {LevelAggregate::Min, LevelAggregate::Max, LevelAggregate::Either}) {
        SwitchPolicy p = policy_8k_6k();
        p.priority = priority;
        p.aggregate = agg;
        for (std::uint64_t l1 : grid)
          for (std::uint64_t l2 : grid)
            for (std::uint64_t l3 : grid)
              for (std::uint64_t l4 : grid) {
                // Re-derivation: only the non-standing configuration can be a
                // target, and it breaches when its pair level (min of the two,
                // or max under the Max mode) sits strictly below its threshold.
                std::uint64_t bar_pair =
                    agg == LevelAggregate::Max ? std::max(l1, l2) : std::min(l1, l2);
                std::uint64_t cross_pair =
                    agg == LevelAggregate::Max ? std::max(l3, l4) : std::min(l3, l4);
                bool expect_switch = current == SwitchConfiguration::Bar
                                         ? cross_pair < 6000
                                         : bar_pair < 8000;

                SwitchDecision d =
                    decide(snap(current, l1, l2, l3, l4), p, std::nullopt, true);
                CHECK(d.is_switch() == expect_switch);
                if (expect_switch) CHECK(d.target == other_config(current));
              }
      }
    }
  }
}
