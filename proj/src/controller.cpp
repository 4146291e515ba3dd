#include "swqkd/controller.hpp"

#include <algorithm>

#include "swqkd/errors.hpp"

namespace swqkd {

std::string_view to_string(LevelAggregate agg) {
  switch (agg) {
    case LevelAggregate::Min:
      return "min";
    case LevelAggregate::Max:
      return "max";
    case LevelAggregate::Either:
      return "either";
  }
  return "?";
}

LevelAggregate parse_aggregate(std::string_view name) {
  if (name == "min") return LevelAggregate::Min;
  if (name == "max") return LevelAggregate::Max;
  if (name == "either") return LevelAggregate::Either;
  throw ParamError("unknown aggregate: " + std::string(name));
}

double aggregate_level(const ControllerSnapshot& snapshot, SwitchConfiguration config,
                       LevelAggregate agg) {
  auto pair = links_for(config);
  double a = static_cast<double>(snapshot.level_bytes[link_index(pair[0].link)]);
  double b = static_cast<double>(snapshot.level_bytes[link_index(pair[1].link)]);
  switch (agg) {
    case LevelAggregate::Max:
      return std::max(a, b);
    case LevelAggregate::Min:
    case LevelAggregate::Either:
      return std::min(a, b);
  }
  return std::min(a, b);
}

namespace {

// Link whose level drives the aggregate, for the decision reason text.
LinkId breaching_link(const ControllerSnapshot& snapshot, SwitchConfiguration config,
                      LevelAggregate agg) {
  auto pair = links_for(config);
  std::uint64_t a = snapshot.level_bytes[link_index(pair[0].link)];
  std::uint64_t b = snapshot.level_bytes[link_index(pair[1].link)];
  if (agg == LevelAggregate::Max) return a >= b ? pair[0].link : pair[1].link;
  return a <= b ? pair[0].link : pair[1].link;
}

}  // namespace

SwitchDecision decide(const ControllerSnapshot& snapshot, const SwitchPolicy& policy,
                      std::optional<double> last_switch_end, bool bringup_done) {
  SwitchDecision d;
  if (!bringup_done) {
    d.reason = "bring-up in progress";
    return d;
  }
  if (!snapshot.stable) {
    d.reason = "switch in progress";
    return d;
  }
  if (last_switch_end &&
      snapshot.time_s - *last_switch_end < policy.min_dwell_s) {
    d.reason = "min dwell not elapsed";
    return d;
  }

  const SwitchConfiguration order[2] = {policy.priority, other_config(policy.priority)};
  for (SwitchConfiguration candidate : order) {
    if (snapshot.config == candidate) continue;
    double level = aggregate_level(snapshot, candidate, policy.aggregate);
    std::uint64_t threshold = policy.threshold_for(candidate);
    if (level < static_cast<double>(threshold)) {
      d.action = SwitchDecision::Action::Switch;
      d.target = candidate;
      LinkId trigger = breaching_link(snapshot, candidate, policy.aggregate);
      d.reason = std::string(to_string(trigger)) + " level " +
                 std::to_string(snapshot.level_bytes[link_index(trigger)]) + " below " +
                 std::string(to_string(candidate)) + " threshold " + std::to_string(threshold);
      return d;
    }
  }
  d.reason = "no threshold breached";
  return d;
}

}  // namespace swqkd
