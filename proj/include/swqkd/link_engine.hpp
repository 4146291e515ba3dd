#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "swqkd/domain.hpp"
#include "swqkd/rng.hpp"

namespace swqkd {

enum class LinkPhase { Inactive, Authenticating, BaseAgreement, KeyGeneration };

std::string_view to_string(LinkPhase phase);

struct RateModel {
  double mean_skr_bps = 0.0;
  double skr_rel_jitter = 0.05;   // relative, uniform
  double mean_qber = 0.02;
  double qber_rel_jitter = 0.05;  // relative, uniform
  double rkr_factor = 10.0;       // raw rate multiple of secret rate
  double snr_mean_db = 20.0;
  double snr_jitter_db = 0.5;     // absolute, uniform
};

struct KpiSample {
  double time_s = 0.0;
  double dt_s = 0.0;
  LinkPhase phase = LinkPhase::Inactive;
  double skr_bps = 0.0;  // 0 whenever phase != KeyGeneration
  double rkr_bps = 0.0;
  double qber = 0.0;
  double snr_db = 0.0;
  std::uint64_t produced_bytes = 0;
};

struct KpiSummary {
  double mean_skr_bps = 0.0;
  double mean_rkr_bps = 0.0;
  double mean_qber = 0.0;
  std::size_t samples = 0;
};

// Per-link key production state machine:
//   Inactive -> Authenticating -> BaseAgreement -> KeyGeneration, any -> Inactive.
// Activation requires non-empty key material with a strictly newer epoch than
// any previously accepted one; base agreement promotes to KeyGeneration at
// the first step whose start time has reached activation + duration. Bytes
// are emitted whole; the fractional remainder (bits, in [0, 8)) carries over
// so long-run production conserves bits exactly.
class LinkEngine {
 public:
  LinkEngine(LinkId link, RateModel model, double base_agreement_duration_s);

  LinkId link() const { return link_; }
  LinkPhase phase() const { return phase_; }
  const RateModel& model() const { return model_; }
  double fractional_bits() const { return carry_bits_; }
  std::int64_t last_epoch() const { return last_epoch_; }

  void begin_authentication();  // Inactive -> Authenticating
  void activate(std::vector<std::uint8_t> auth_key, std::uint64_t epoch, double now);
  void deactivate();            // any -> Inactive; clears key, keeps epoch memory

  struct StepResult {
    std::uint64_t produced_bytes = 0;
    KpiSample sample;
  };
  StepResult step(double dt, RngStream& rng);

 private:
  LinkId link_;
  RateModel model_;
  double ba_duration_;
  LinkPhase phase_ = LinkPhase::Inactive;
  std::vector<std::uint8_t> auth_key_;
  std::int64_t last_epoch_ = -1;
  double now_ = 0.0;
  double ba_done_at_ = 0.0;
  double carry_bits_ = 0.0;
};

// Means over KeyGeneration samples only; empty when there are none.
std::optional<KpiSummary> mean_kpis(std::span<const KpiSample> samples);

}  // namespace swqkd
