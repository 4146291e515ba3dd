#pragma once

#include <atomic>
#include <map>
#include <ostream>
#include <string>

#include "swqkd/scenario.hpp"
#include "swqkd/simulation.hpp"

namespace swqkd {

struct ServeOptions {
  double time_scale = 1.0;  // virtual seconds per wall-clock second
  std::string host = "127.0.0.1";
  int base_port = 8010;  // one port per KME identity, ascending
};

struct ServeResult {
  bool completed = false;  // false when stopped early
  RunOutput output;
  std::map<std::string, int> kme_ports;
};

// Paced run: schedules the scenario's events against the wall clock (scaled
// by time_scale) while every KME identity serves the key-delivery API on its
// own port over the one shared store. External requests are answered from
// live state and logged at the current virtual time. Returns once the run
// completes or `stop` flips; ports that fail to bind roll the whole service
// back (ScenarioError). `info`, when given, receives one line per endpoint.
ServeResult serve_scenario(ScenarioConfig config, const ServeOptions& options,
                           const std::atomic<bool>& stop, std::ostream* info);

}  // namespace swqkd
