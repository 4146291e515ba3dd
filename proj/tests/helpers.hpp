#pragma once

#include <string>

#include "swqkd/scenario.hpp"

namespace testutil {

// Minimal valid scenario: jitterless 376 bps links (47 B/s, carry-free),
// noise-free devices so authentication always succeeds, no consumers.
inline swqkd::ScenarioConfig base_config() {
  using namespace swqkd;
  ScenarioConfig cfg;
  cfg.name = "unit";
  cfg.seed = 1;
  cfg.duration_s = 0.0;
  cfg.capacity_bytes = 200000;
  const char* sae[][4] = {
      {"SAE_A1_L1", "SAE_B1_L1", "KME_A1", "KME_B1"},
      {"SAE_A2_L2", "SAE_B2_L2", "KME_A2", "KME_B2"},
      {"SAE_A1_L3", "SAE_B2_L3", "KME_A1", "KME_B2"},
      {"SAE_A2_L4", "SAE_B1_L4", "KME_A2", "KME_B1"},
  };
  for (LinkId link : all_links()) {
    std::size_t i = link_index(link);
    cfg.links.push_back(SaeBinding{sae[i][0], sae[i][1], link, sae[i][2], sae[i][3]});
    RateModel m;
    m.mean_skr_bps = 376.0;
    m.skr_rel_jitter = 0.0;
    m.qber_rel_jitter = 0.0;
    m.snr_jitter_db = 0.0;
    cfg.rates[i] = m;
  }
  cfg.policy.bar_threshold_bytes = 8000;
  cfg.policy.cross_threshold_bytes = 6000;
  cfg.policy.min_dwell_s = 300.0;
  cfg.puf.flip_probability = 0.0;
  return cfg;
}

inline swqkd::ScenarioConfig validated(swqkd::ScenarioConfig cfg) {
  swqkd::validate_scenario(cfg, "unit");
  return cfg;
}

inline std::string repo_path(const std::string& rel) {
  return std::string(SWQKD_SOURCE_DIR) + "/" + rel;
}

}  // namespace testutil
