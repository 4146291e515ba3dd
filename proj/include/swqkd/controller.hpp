#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "swqkd/domain.hpp"
#include "swqkd/kms.hpp"

namespace swqkd {

enum class LevelAggregate { Min, Max, Either };  // Either is any-below, same test as Min

std::string_view to_string(LevelAggregate agg);
LevelAggregate parse_aggregate(std::string_view name);  // throws ParamError

struct SwitchPolicy {
  std::uint64_t bar_threshold_bytes = 0;
  std::uint64_t cross_threshold_bytes = 0;
  SwitchConfiguration priority = SwitchConfiguration::Bar;
  double poll_interval_s = 5.0;
  double min_dwell_s = 60.0;
  LevelAggregate aggregate = LevelAggregate::Min;

  std::uint64_t threshold_for(SwitchConfiguration config) const {
    return config == SwitchConfiguration::Bar ? bar_threshold_bytes : cross_threshold_bytes;
  }
};

// Sub-phase durations of one switching procedure, seconds. `pba` is pinned
// to the authentication profile's verification_total at load; the last
// sub-phase absorbs rounding so the five durations sum to `total` exactly.
struct SwitchTiming {
  double total = 123.5;
  double deactivate = 10.0;
  double fabric_reconfigure = 60.0;
  double pba = 27.0;
  double key_install = 16.5;
  double reactivate = 10.0;
};

struct ControllerSnapshot {
  double time_s = 0.0;
  bool stable = true;
  SwitchConfiguration config = SwitchConfiguration::Bar;  // stable config, or switch target
  std::array<std::uint64_t, 4> level_bytes{};
  std::array<BufferStatus, 4> status{};
};

struct SwitchDecision {
  enum class Action { Stay, Switch };

  Action action = Action::Stay;
  SwitchConfiguration target = SwitchConfiguration::Bar;
  std::string reason;

  bool is_switch() const { return action == Action::Switch; }
};

// Threshold rule, priority configuration checked first (default Bar):
// standing in the other configuration with the priority side's aggregate
// level below its threshold wins; otherwise the symmetric check; else Stay.
// Deferred (Stay with reason) while switching, during bring-up, and until
// min_dwell has elapsed since the last switch activity.
SwitchDecision decide(const ControllerSnapshot& snapshot, const SwitchPolicy& policy,
                      std::optional<double> last_switch_end, bool bringup_done);

double aggregate_level(const ControllerSnapshot& snapshot, SwitchConfiguration config,
                       LevelAggregate agg);

}  // namespace swqkd
