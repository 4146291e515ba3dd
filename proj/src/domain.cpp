#include "swqkd/domain.hpp"

#include "swqkd/errors.hpp"

namespace swqkd {

std::string to_string(const NodeId& node) {
  return (node.role == NodeRole::Alice ? "A" : "B") + std::to_string(node.index);
}

std::array<LinkEndpoints, 2> links_for(SwitchConfiguration config) {
  if (config == SwitchConfiguration::Bar)
    return {link_endpoints(LinkId::L1), link_endpoints(LinkId::L2)};
  return {link_endpoints(LinkId::L3), link_endpoints(LinkId::L4)};
}

SwitchConfiguration config_of(LinkId link) {
  switch (link) {
    case LinkId::L1:
    case LinkId::L2:
      return SwitchConfiguration::Bar;
    case LinkId::L3:
    case LinkId::L4:
      return SwitchConfiguration::Cross;
  }
  throw ParamError("unknown link id");
}

LinkEndpoints link_endpoints(LinkId link) {
  switch (link) {
    case LinkId::L1:
      return {link, {NodeRole::Alice, 1}, {NodeRole::Bob, 1}};
    case LinkId::L2:
      return {link, {NodeRole::Alice, 2}, {NodeRole::Bob, 2}};
    case LinkId::L3:
      return {link, {NodeRole::Alice, 1}, {NodeRole::Bob, 2}};
    case LinkId::L4:
      return {link, {NodeRole::Alice, 2}, {NodeRole::Bob, 1}};
  }
  throw ParamError("unknown link id");
}

SwitchConfiguration other_config(SwitchConfiguration config) {
  return config == SwitchConfiguration::Bar ? SwitchConfiguration::Cross
                                            : SwitchConfiguration::Bar;
}

std::string_view to_string(LinkId link) {
  switch (link) {
    case LinkId::L1:
      return "L1";
    case LinkId::L2:
      return "L2";
    case LinkId::L3:
      return "L3";
    case LinkId::L4:
      return "L4";
  }
  return "?";
}

std::string_view to_string(SwitchConfiguration config) {
  return config == SwitchConfiguration::Bar ? "bar" : "cross";
}

LinkId parse_link(std::string_view name) {
  for (LinkId link : all_links())
    if (name == to_string(link)) return link;
  throw ParamError("unknown link name: " + std::string(name));
}

SwitchConfiguration parse_config(std::string_view name) {
  if (name == "bar") return SwitchConfiguration::Bar;
  if (name == "cross") return SwitchConfiguration::Cross;
  throw ParamError("unknown configuration name: " + std::string(name));
}

std::uint64_t psk_requirement(std::uint64_t n_alice, std::uint64_t n_bob) {
  return n_alice * n_bob;
}

std::uint64_t pba_requirement(std::uint64_t n_nodes) { return n_nodes; }

SwitchConfiguration SwitchFabric::stable_config() const {
  if (!stable_) throw StateError("fabric is switching; no stable configuration");
  return from_;
}

SwitchConfiguration SwitchFabric::switching_from() const {
  if (stable_) throw StateError("fabric is stable; no switch in progress");
  return from_;
}

SwitchConfiguration SwitchFabric::switching_to() const {
  if (stable_) throw StateError("fabric is stable; no switch in progress");
  return to_;
}

double SwitchFabric::started_at() const {
  if (stable_) throw StateError("fabric is stable; no switch in progress");
  return started_at_;
}

void SwitchFabric::begin_switch(SwitchConfiguration target, double now) {
  if (!stable_) throw StateError("begin_switch: fabric already switching");
  if (target == from_) throw StateError("begin_switch: target equals current configuration");
  to_ = target;
  started_at_ = now;
  stable_ = false;
}

void SwitchFabric::complete_switch() {
  if (stable_) throw StateError("complete_switch: no switch in progress");
  from_ = to_;
  stable_ = true;
}

void SwitchFabric::abort_switch() {
  if (stable_) throw StateError("abort_switch: no switch in progress");
  to_ = from_;
  stable_ = true;
}

}  // namespace swqkd
