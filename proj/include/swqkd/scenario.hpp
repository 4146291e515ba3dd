#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "swqkd/controller.hpp"
#include "swqkd/domain.hpp"
#include "swqkd/kms.hpp"
#include "swqkd/link_engine.hpp"
#include "swqkd/puf.hpp"

namespace swqkd {

struct ConsumerSpec {
  enum class Mode { Enc, EncThenDec };
  enum class Arrival { FixedInterval, Poisson };

  std::string name;
  std::string sae_id;  // must be a master SAE id
  double rate_per_s = 1.0;
  Mode mode = Mode::Enc;
  Arrival arrival = Arrival::FixedInterval;
  std::uint32_t keys_per_request = 1;
  double delay_mean_s = 0.1147;   // modeled network delay, reporting only
  double delay_jitter_s = 0.0186;
};

struct PufParams {
  std::size_t cell_count = 32768;
  double flip_probability = 0.02;
  CodeParams code;        // repetition 5, key_bits 256
  bool bidirectional = true;
};

struct ScenarioConfig {
  int version = 1;
  std::string name;
  std::uint64_t seed = 0;
  double duration_s = 0.0;
  SwitchConfiguration start_config = SwitchConfiguration::Bar;

  std::size_t key_size_bytes = 32;
  std::uint64_t capacity_bytes = 0;
  std::uint32_t max_key_per_request = 128;
  std::array<std::uint64_t, 4> initial_level_bytes{};

  std::vector<SaeBinding> links;          // exactly L1..L4
  std::array<RateModel, 4> rates{};

  SwitchPolicy policy;
  SwitchTiming switch_timing;             // normalized: pba == verification_total, exact sum
  PufTimingProfile puf_timing;
  PufParams puf;

  double base_agreement_s = 20.0;
  double tick_s = 1.0;
  std::size_t auth_key_len_bytes = 32;

  std::vector<ConsumerSpec> consumers;

  // Fully resolved config (defaults filled in), echoed into reports.
  nlohmann::json echo() const;
};

// Parse + validate. Parse errors carry line:column; validation errors name
// the violated constraint and the offending element.
ScenarioConfig load_scenario(const std::string& path);
ScenarioConfig parse_scenario(const std::string& text, const std::string& source_name);
ScenarioConfig scenario_from_json(const nlohmann::json& j, const std::string& source_name);

// Re-checks cross-field constraints and pins the switch sub-phase timing
// (pba := verification_total, remaining phases scaled, last one assigned the
// exact residual). Called by the loaders; public for programmatic configs.
void validate_scenario(ScenarioConfig& config, const std::string& source_name);

}  // namespace swqkd
