#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace swqkd {

enum class NodeRole { Alice, Bob };

struct NodeId {
  NodeRole role;
  int index;  // 1-based

  bool operator==(const NodeId&) const = default;
};

std::string to_string(const NodeId& node);  // "A1", "B2", ...

// The four point-to-point links of the 2x2 switched topology.
enum class LinkId : int { L1 = 0, L2 = 1, L3 = 2, L4 = 3 };

enum class SwitchConfiguration { Bar, Cross };

constexpr std::array<LinkId, 4> all_links() {
  return {LinkId::L1, LinkId::L2, LinkId::L3, LinkId::L4};
}

constexpr std::size_t link_index(LinkId link) { return static_cast<std::size_t>(link); }

struct LinkEndpoints {
  LinkId link;
  NodeId alice;
  NodeId bob;

  bool operator==(const LinkEndpoints&) const = default;
};

// Bar connects same-index pairs, cross the swapped pairs. The two sets
// partition the four links; each link lives in exactly one configuration.
std::array<LinkEndpoints, 2> links_for(SwitchConfiguration config);
SwitchConfiguration config_of(LinkId link);
LinkEndpoints link_endpoints(LinkId link);
SwitchConfiguration other_config(SwitchConfiguration config);

std::string_view to_string(LinkId link);
std::string_view to_string(SwitchConfiguration config);  // "bar" / "cross"
LinkId parse_link(std::string_view name);                 // throws ParamError
SwitchConfiguration parse_config(std::string_view name);  // throws ParamError

// Pre-shared classical startup keys: one per ordered (transmitter, receiver)
// pair. PUF-based startup authentication: one authenticator per node.
std::uint64_t psk_requirement(std::uint64_t n_alice, std::uint64_t n_bob);
std::uint64_t pba_requirement(std::uint64_t n_nodes);

// Fabric state machine. Legal transitions:
//   Stable(x) -> Switching(x, y)   via begin_switch, x != y
//   Switching(x, y) -> Stable(y)   via complete_switch
//   Switching(x, y) -> Stable(x)   via abort_switch
class SwitchFabric {
 public:
  explicit SwitchFabric(SwitchConfiguration initial) : stable_(true), from_(initial), to_(initial) {}

  bool is_stable() const { return stable_; }
  bool is_switching() const { return !stable_; }

  SwitchConfiguration stable_config() const;  // StateError unless stable
  SwitchConfiguration switching_from() const; // StateError unless switching
  SwitchConfiguration switching_to() const;   // StateError unless switching
  double started_at() const;                  // StateError unless switching

  void begin_switch(SwitchConfiguration target, double now);
  void complete_switch();
  void abort_switch();

 private:
  bool stable_;
  SwitchConfiguration from_;
  SwitchConfiguration to_;
  double started_at_ = 0.0;
};

}  // namespace swqkd
