#include "swqkd/link_engine.hpp"

#include <algorithm>
#include <cmath>

#include "swqkd/errors.hpp"

namespace swqkd {

std::string_view to_string(LinkPhase phase) {
  switch (phase) {
    case LinkPhase::Inactive:
      return "inactive";
    case LinkPhase::Authenticating:
      return "authenticating";
    case LinkPhase::BaseAgreement:
      return "base_agreement";
    case LinkPhase::KeyGeneration:
      return "key_generation";
  }
  return "?";
}

LinkEngine::LinkEngine(LinkId link, RateModel model, double base_agreement_duration_s)
    : link_(link), model_(model), ba_duration_(base_agreement_duration_s) {
  if (model.mean_skr_bps < 0) throw ParamError("mean_skr_bps must be non-negative");
  if (base_agreement_duration_s < 0) throw ParamError("base agreement duration must be >= 0");
}

void LinkEngine::begin_authentication() {
  if (phase_ != LinkPhase::Inactive)
    throw StateError("begin_authentication: engine not inactive");
  phase_ = LinkPhase::Authenticating;
}

void LinkEngine::activate(std::vector<std::uint8_t> auth_key, std::uint64_t epoch, double now) {
  if (phase_ != LinkPhase::Inactive && phase_ != LinkPhase::Authenticating)
    throw StateError("activate: engine already active");
  if (auth_key.empty()) throw ParamError("activate: authentication key required");
  if (static_cast<std::int64_t>(epoch) <= last_epoch_)
    throw StateError("activate: stale authentication epoch");
  auth_key_ = std::move(auth_key);
  last_epoch_ = static_cast<std::int64_t>(epoch);
  now_ = now;
  ba_done_at_ = now + ba_duration_;
  phase_ = LinkPhase::BaseAgreement;
}

void LinkEngine::deactivate() {
  phase_ = LinkPhase::Inactive;
  auth_key_.clear();
  carry_bits_ = 0.0;
}

LinkEngine::StepResult LinkEngine::step(double dt, RngStream& rng) {
  if (dt <= 0) throw ParamError("step: dt must be positive");

  if (phase_ == LinkPhase::BaseAgreement && now_ >= ba_done_at_)
    phase_ = LinkPhase::KeyGeneration;
  now_ += dt;

  StepResult out;
  out.sample.time_s = now_;
  out.sample.dt_s = dt;
  out.sample.phase = phase_;

  if (phase_ == LinkPhase::KeyGeneration) {
    double skr = model_.mean_skr_bps * (1.0 + rng.next_symmetric(model_.skr_rel_jitter));
    double qber = model_.mean_qber * (1.0 + rng.next_symmetric(model_.qber_rel_jitter));
    double snr = model_.snr_mean_db + rng.next_symmetric(model_.snr_jitter_db);
    double bits = skr * dt + carry_bits_;
    double whole = std::floor(bits / 8.0);
    out.produced_bytes = static_cast<std::uint64_t>(whole);
    carry_bits_ = bits - whole * 8.0;
    out.sample.skr_bps = skr;
    out.sample.rkr_bps = skr * model_.rkr_factor;
    out.sample.qber = std::clamp(qber, 0.0, 0.4999);
    out.sample.snr_db = snr;
    out.sample.produced_bytes = out.produced_bytes;
  }
  return out;
}

std::optional<KpiSummary> mean_kpis(std::span<const KpiSample> samples) {
  KpiSummary sum;
  for (const auto& s : samples) {
    if (s.phase != LinkPhase::KeyGeneration) continue;
    sum.mean_skr_bps += s.skr_bps;
    sum.mean_rkr_bps += s.rkr_bps;
    sum.mean_qber += s.qber;
    ++sum.samples;
  }
  if (sum.samples == 0) return std::nullopt;
  sum.mean_skr_bps /= static_cast<double>(sum.samples);
  sum.mean_rkr_bps /= static_cast<double>(sum.samples);
  sum.mean_qber /= static_cast<double>(sum.samples);
  return sum;
}

}  // namespace swqkd
