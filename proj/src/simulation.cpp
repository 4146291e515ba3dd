#include "swqkd/simulation.hpp"

#include <algorithm>
#include <cmath>

#include "swqkd/errors.hpp"
#include "swqkd/util.hpp"

namespace swqkd {
namespace {

std::vector<std::uint8_t> draw_bytes(RngStream& rng, std::size_t count) {
  std::vector<std::uint8_t> out;
  out.reserve(count);
  while (out.size() < count) {
    std::uint64_t word = rng.next_u64();
    for (int i = 0; i < 8 && out.size() < count; ++i) {
      out.push_back(static_cast<std::uint8_t>(word >> (8 * i)));
    }
  }
  return out;
}

double next_exponential(RngStream& rng, double rate) {
  return -std::log1p(-rng.next_unit()) / rate;
}

nlohmann::json levels_json(const Kms& kms) {
  nlohmann::json arr = nlohmann::json::array();
  for (LinkId link : all_links()) arr.push_back(kms.level_bytes(link));
  return arr;
}

nlohmann::json statuses_json(const Kms& kms) {
  nlohmann::json arr = nlohmann::json::array();
  for (LinkId link : all_links()) arr.push_back(to_string(kms.buffer_status(link)));
  return arr;
}

// Same-instant ordering: procedure phases, then polls, then production
// ticks, then consumer requests.
constexpr int kPrioProcedure = 0;
constexpr int kPrioPoll = 1;
constexpr int kPrioTick = 2;
constexpr int kPrioConsumer = 3;

}  // namespace

Simulation::Simulation(ScenarioConfig config, RunOptions options)
    : cfg_(std::move(config)),
      opts_(options),
      fabric_(cfg_.start_config),
      kms_(KmsConfig{cfg_.key_size_bytes, cfg_.capacity_bytes, cfg_.max_key_per_request},
           cfg_.links, stream_for(cfg_.seed, "kms/uuid")),
      registrar_(stream_for(cfg_.seed, "registrar").next_u64()) {
  for (const char* node : {"A1", "A2", "B1", "B2"}) {
    std::uint64_t device_seed = stream_for(cfg_.seed, std::string("device/") + node).next_u64();
    SramDevice device =
        make_sram_device(node, cfg_.puf.cell_count, cfg_.puf.flip_probability, device_seed);
    RngStream enroll_rng = stream_for(cfg_.seed, std::string("enroll/") + node);
    Enrollment enrollment = enroll(device, 0, cfg_.puf.code, enroll_rng);
    registrar_.add_record(enrollment.record);
    devices_.emplace(node, std::move(device));
  }

  engines_.reserve(4);
  for (LinkId link : all_links()) {
    std::size_t i = link_index(link);
    engines_.emplace_back(link, cfg_.rates[i], cfg_.base_agreement_s);
    engine_rng_.push_back(stream_for(cfg_.seed, "engine/" + std::string(to_string(link))));
    material_rng_.push_back(stream_for(cfg_.seed, "material/" + std::string(to_string(link))));
    auth_rng_.push_back(stream_for(cfg_.seed, "auth/" + std::string(to_string(link))));
  }
  for (const ConsumerSpec& spec : cfg_.consumers) {
    consumer_rng_.push_back(stream_for(cfg_.seed, "consumer/" + spec.name));
  }

  for (LinkId link : all_links()) {
    std::size_t i = link_index(link);
    if (cfg_.initial_level_bytes[i] == 0) continue;
    std::vector<std::uint8_t> material =
        draw_bytes(material_rng_[i], cfg_.initial_level_bytes[i]);
    kms_.push_material(link, material);
  }

  if (cfg_.duration_s > 0.0) {
    log_.append(0.0, "run_start", {{"scenario", cfg_.echo()}});
    schedule_all();
  }
}

void Simulation::schedule_all() {
  clock_.schedule(0.0, kPrioProcedure, [this] { start_bringup(); });
  clock_.schedule(cfg_.policy.poll_interval_s, kPrioPoll, [this] { on_poll(); });
  clock_.schedule(cfg_.tick_s, kPrioTick, [this] { on_tick(); });
  for (std::size_t i = 0; i < cfg_.consumers.size(); ++i) {
    const ConsumerSpec& spec = cfg_.consumers[i];
    double first = spec.arrival == ConsumerSpec::Arrival::Poisson
                       ? next_exponential(consumer_rng_[i], spec.rate_per_s)
                       : 1.0 / spec.rate_per_s;
    clock_.schedule(first, kPrioConsumer, [this, i] { on_consumer(i); });
  }
}

RunOutput Simulation::run() {
  if (finished_) throw StateError("run: simulation already finished");
  clock_.run_until(cfg_.duration_s);
  return finish(false);
}

bool Simulation::has_pending() const {
  return !clock_.empty() && clock_.peek_time() <= cfg_.duration_s;
}

double Simulation::next_event_time() const {
  if (!has_pending()) throw StateError("next_event_time: nothing pending");
  return clock_.peek_time();
}

void Simulation::process_next() {
  if (!has_pending()) throw StateError("process_next: nothing pending");
  clock_.run_next();
}

void Simulation::append_log(double time_s, std::string kind, nlohmann::json payload) {
  log_.append(time_s, std::move(kind), std::move(payload));
}

void Simulation::set_status(LinkId link, BufferStatus status) {
  if (kms_.buffer_status(link) == status) return;
  kms_.set_buffer_status(link, status);
  log_.append(clock_.now(), "status_change",
              {{"link", to_string(link)},
               {"status", to_string(status)},
               {"level_bytes", kms_.level_bytes(link)}});
}

void Simulation::deactivate_engine(std::size_t index) {
  carry_discarded_bits_[index] += engines_[index].fractional_bits();
  engines_[index].deactivate();
  log_.append(clock_.now(), "engine_deactivate",
              {{"link", to_string(engines_[index].link())}});
}

std::string Simulation::key_fingerprint(std::span<const std::uint8_t> key) const {
  return hex_encode(key.subspan(0, std::min<std::size_t>(key.size(), 8)));
}

std::array<LinkId, 2> Simulation::procedure_links() const {
  auto pair = links_for(procedure_target_);
  return {pair[0].link, pair[1].link};
}

void Simulation::start_bringup() {
  procedure_target_ = cfg_.start_config;
  procedure_started_at_ = clock_.now();
  log_.append(clock_.now(), "bringup_start",
              {{"config", to_string(cfg_.start_config)}});
  for (LinkEndpoints ep : links_for(cfg_.start_config)) {
    set_status(ep.link, BufferStatus::Active);
  }
  phase_pba(true);
}

void Simulation::start_switch(SwitchConfiguration target) {
  SwitchConfiguration from = fabric_.stable_config();
  procedure_target_ = target;
  procedure_started_at_ = clock_.now();
  log_.append(clock_.now(), "switch_start",
              {{"from", to_string(from)}, {"to", to_string(target)}});
  fabric_.begin_switch(target, clock_.now());
  for (LinkId link : all_links()) set_status(link, BufferStatus::Passive);
  for (LinkEndpoints ep : links_for(from)) deactivate_engine(link_index(ep.link));
  log_.append(clock_.now(), "switch_phase", {{"phase", "deactivate"}, {"context", "switch"}});
  clock_.schedule(clock_.now() + cfg_.switch_timing.deactivate, kPrioProcedure,
                  [this] { phase_fabric(); });
}

void Simulation::phase_fabric() {
  log_.append(clock_.now(), "switch_phase",
              {{"phase", "fabric_reconfigure"}, {"context", "switch"}});
  clock_.schedule(clock_.now() + cfg_.switch_timing.fabric_reconfigure, kPrioProcedure,
                  [this] { phase_pba(false); });
}

void Simulation::phase_pba(bool bringup) {
  log_.append(clock_.now(), "switch_phase",
              {{"phase", "pba"}, {"context", bringup ? "bringup" : "switch"}});
  for (LinkId link : procedure_links()) {
    engines_[link_index(link)].begin_authentication();
    log_.append(clock_.now(), "engine_phase",
                {{"link", to_string(link)}, {"phase", "authenticating"}});
  }
  clock_.schedule(clock_.now() + cfg_.switch_timing.pba, kPrioProcedure,
                  [this, bringup] { phase_auth(bringup); });
}

void Simulation::phase_auth(bool bringup) {
  const std::uint64_t epoch = static_cast<std::uint64_t>(current_epoch_ + 1);
  for (LinkId link : procedure_links()) {
    std::size_t i = link_index(link);
    LinkEndpoints ep = link_endpoints(link);
    const SramDevice& alice = devices_.at(to_string(ep.alice));
    const SramDevice& bob = devices_.at(to_string(ep.bob));
    AuthResult auth = mutual_authenticate(registrar_, alice, bob, auth_rng_[i], cfg_.puf_timing,
                                          cfg_.puf.bidirectional);
    nlohmann::json components = nlohmann::json::object();
    for (const auto& [name, seconds] : auth.component_times) components[name] = seconds;
    nlohmann::json payload = {{"link", to_string(link)},
                              {"outcome", auth.accepted() ? "accepted" : "rejected"},
                              {"elapsed_s", auth.elapsed_model_time},
                              {"bidirectional", cfg_.puf.bidirectional},
                              {"components", components}};
    if (!auth.accepted()) payload["failed_direction"] = auth.failed_direction;
    log_.append(clock_.now(), "auth", payload);
    if (!auth.accepted()) {
      abort_procedure(bringup, link, auth.failed_direction);
      return;
    }
    pending_key_[i] = derive_link_auth_key(*auth.session_key_a, *auth.session_key_b, link, epoch,
                                           cfg_.auth_key_len_bytes);
    log_.append(clock_.now(), "key_install",
                {{"link", to_string(link)},
                 {"epoch", epoch},
                 {"key_bytes", pending_key_[i].size()},
                 {"key_fingerprint", key_fingerprint(pending_key_[i])}});
  }
  pending_epoch_ = epoch;
  log_.append(clock_.now(), "switch_phase",
              {{"phase", "key_install"}, {"context", bringup ? "bringup" : "switch"}});
  clock_.schedule(clock_.now() + cfg_.switch_timing.key_install, kPrioProcedure,
                  [this, bringup] { phase_reactivate(bringup); });
}

void Simulation::phase_reactivate(bool bringup) {
  log_.append(clock_.now(), "switch_phase",
              {{"phase", "reactivate"}, {"context", bringup ? "bringup" : "switch"}});
  clock_.schedule(clock_.now() + cfg_.switch_timing.reactivate, kPrioProcedure,
                  [this, bringup] { phase_complete(bringup); });
}

void Simulation::phase_complete(bool bringup) {
  for (LinkId link : procedure_links()) {
    std::size_t i = link_index(link);
    set_status(link, BufferStatus::Active);
    engines_[i].activate(pending_key_[i], pending_epoch_, clock_.now());
    log_.append(clock_.now(), "engine_activate",
                {{"link", to_string(link)},
                 {"epoch", pending_epoch_},
                 {"key_fingerprint", key_fingerprint(pending_key_[i])},
                 {"base_agreement_until", clock_.now() + cfg_.base_agreement_s}});
    pending_key_[i].clear();
  }
  current_epoch_ = static_cast<std::int64_t>(pending_epoch_);
  if (bringup) {
    bringup_done_ = true;
    log_.append(clock_.now(), "bringup_end",
                {{"config", to_string(procedure_target_)},
                 {"epoch", pending_epoch_},
                 {"duration_s", clock_.now() - procedure_started_at_}});
  } else {
    SwitchConfiguration from = fabric_.switching_from();
    fabric_.complete_switch();
    last_switch_end_ = clock_.now();
    ++switch_count_;
    log_.append(clock_.now(), "switch_end",
                {{"from", to_string(from)},
                 {"to", to_string(procedure_target_)},
                 {"duration_s", clock_.now() - procedure_started_at_},
                 {"epoch", pending_epoch_}});
  }
}

void Simulation::abort_procedure(bool bringup, LinkId failed_link, const std::string& direction) {
  SwitchConfiguration from = bringup ? cfg_.start_config : fabric_.switching_from();
  log_.append(clock_.now(), "abort",
              {{"context", bringup ? "bringup" : "switch"},
               {"from", to_string(from)},
               {"to", to_string(procedure_target_)},
               {"started_at", procedure_started_at_},
               {"link", to_string(failed_link)},
               {"direction", direction}});
  for (LinkId link : procedure_links()) {
    if (engines_[link_index(link)].phase() != LinkPhase::Inactive) {
      deactivate_engine(link_index(link));
    }
    pending_key_[link_index(link)].clear();
  }
  if (bringup) {
    // Start-configuration buffers stay ACTIVE; the controller may still
    // switch to the other configuration later.
    bringup_done_ = true;
    log_.append(clock_.now(), "bringup_end",
                {{"config", to_string(procedure_target_)}, {"aborted", true}});
  } else {
    fabric_.abort_switch();
    for (LinkEndpoints ep : links_for(from)) set_status(ep.link, BufferStatus::Active);
    last_switch_end_ = clock_.now();
    ++aborted_switches_;
  }
}

void Simulation::on_tick() {
  for (LinkId link : all_links()) {
    std::size_t i = link_index(link);
    LinkEngine::StepResult result = engines_[i].step(cfg_.tick_s, engine_rng_[i]);
    skr_dt_bits_[i] += result.sample.skr_bps * result.sample.dt_s;
    produced_bytes_[i] += result.produced_bytes;
    std::uint64_t discarded_before = kms_.counters(link).keys_discarded;
    if (result.produced_bytes > 0) {
      std::vector<std::uint8_t> material = draw_bytes(material_rng_[i], result.produced_bytes);
      kms_.push_material(link, material);
    }
    std::uint64_t discarded_delta = kms_.counters(link).keys_discarded - discarded_before;
    if (discarded_delta > 0) {
      log_.append(clock_.now(), "overflow",
                  {{"link", to_string(link)},
                   {"discarded_keys", discarded_delta},
                   {"level_bytes", kms_.level_bytes(link)}});
    }
    if (opts_.log_kpi_samples) {
      log_.append(clock_.now(), "kpi_sample",
                  {{"link", to_string(link)},
                   {"phase", to_string(result.sample.phase)},
                   {"dt_s", result.sample.dt_s},
                   {"skr_bps", result.sample.skr_bps},
                   {"rkr_bps", result.sample.rkr_bps},
                   {"qber", result.sample.qber},
                   {"snr_db", result.sample.snr_db},
                   {"produced_bytes", result.produced_bytes},
                   {"level_bytes", kms_.level_bytes(link)}});
    }
  }
  clock_.schedule(clock_.now() + cfg_.tick_s, kPrioTick, [this] { on_tick(); });
}

void Simulation::on_poll() {
  ControllerSnapshot snap;
  snap.time_s = clock_.now();
  snap.stable = fabric_.is_stable();
  snap.config = snap.stable ? fabric_.stable_config() : fabric_.switching_to();
  auto buffers = kms_.snapshot();
  for (std::size_t i = 0; i < 4; ++i) {
    snap.level_bytes[i] = buffers[i].level_bytes;
    snap.status[i] = buffers[i].status;
  }
  SwitchDecision decision = decide(snap, cfg_.policy, last_switch_end_, bringup_done_);
  log_.append(clock_.now(), "poll",
              {{"stable", snap.stable},
               {"config", to_string(snap.config)},
               {"levels", levels_json(kms_)},
               {"statuses", statuses_json(kms_)}});
  nlohmann::json decision_payload = {
      {"action", decision.is_switch() ? "switch" : "stay"}, {"reason", decision.reason}};
  if (decision.is_switch()) decision_payload["target"] = to_string(decision.target);
  log_.append(clock_.now(), "decision", decision_payload);
  if (decision.is_switch()) start_switch(decision.target);
  clock_.schedule(clock_.now() + cfg_.policy.poll_interval_s, kPrioPoll, [this] { on_poll(); });
}

void Simulation::on_consumer(std::size_t index) {
  const ConsumerSpec& spec = cfg_.consumers[index];
  RngStream& rng = consumer_rng_[index];
  const SaeBinding* binding = nullptr;
  for (const SaeBinding& b : kms_.bindings()) {
    if (b.master_sae_id == spec.sae_id) binding = &b;
  }
  if (binding == nullptr) throw StateError("consumer bound to unknown master SAE");

  double latency = std::max(0.0, spec.delay_mean_s + rng.next_symmetric(spec.delay_jitter_s));
  std::string outcome = "ok";
  std::uint64_t keys = 0;
  try {
    KeyContainer enc = kms_.get_enc_keys(binding->slave_sae_id, spec.keys_per_request);
    keys = enc.keys.size();
    if (spec.mode == ConsumerSpec::Mode::EncThenDec) {
      std::vector<std::string> ids;
      ids.reserve(enc.keys.size());
      for (const KeyRecord& k : enc.keys) ids.push_back(k.key_id);
      KeyContainer dec = kms_.get_dec_keys(binding->master_sae_id, ids);
      for (std::size_t k = 0; k < enc.keys.size(); ++k) {
        if (dec.keys[k].material != enc.keys[k].material ||
            dec.keys[k].key_id != enc.keys[k].key_id) {
          throw InvariantViolation("dec_keys returned mismatched key material");
        }
      }
    }
  } catch (const ApiError& e) {
    if (e.http_status() != 503) throw;
    outcome = "unavailable";
  }
  log_.append(clock_.now(), "consumer_request",
              {{"name", spec.name},
               {"sae", binding->master_sae_id},
               {"link", to_string(binding->link)},
               {"outcome", outcome},
               {"keys", keys},
               {"latency_s", latency},
               {"level_after", kms_.level_bytes(binding->link)}});

  double gap = spec.arrival == ConsumerSpec::Arrival::Poisson
                   ? next_exponential(rng, spec.rate_per_s)
                   : 1.0 / spec.rate_per_s;
  clock_.schedule(clock_.now() + gap, kPrioConsumer, [this, index] { on_consumer(index); });
}

RunOutput Simulation::finish(bool interrupted) {
  if (finished_) throw StateError("finish: simulation already finished");
  finished_ = true;
  if (cfg_.duration_s > 0.0) {
    if (!interrupted && clock_.now() < cfg_.duration_s) {
      clock_.run_until(cfg_.duration_s);
    }
    nlohmann::json final = nlohmann::json::object();
    for (LinkId link : all_links()) {
      std::size_t i = link_index(link);
      const BufferCounters& c = kms_.counters(link);
      final[std::string(to_string(link))] = {
          {"produced_bytes", produced_bytes_[i]},
          {"skr_dt_bits", skr_dt_bits_[i]},
          {"carry_bits", engines_[i].fractional_bits()},
          {"carry_discarded_bits", carry_discarded_bits_[i]},
          {"keys_formed", c.keys_formed},
          {"keys_delivered", c.keys_delivered},
          {"keys_discarded", c.keys_discarded},
          {"stored_key_count", kms_.stored_key_count(link)},
          {"level_bytes", kms_.level_bytes(link)},
          {"pending_bytes", kms_.pending_bytes(link)},
          {"status", to_string(kms_.buffer_status(link))}};
    }
    log_.append(clock_.now(), "run_end",
                {{"switch_count", switch_count_},
                 {"aborted_switches", aborted_switches_},
                 {"interrupted", interrupted},
                 {"final", final}});

    for (LinkId link : all_links()) {
      std::size_t i = link_index(link);
      const BufferCounters& c = kms_.counters(link);
      if (c.keys_formed - c.keys_delivered - c.keys_discarded != kms_.stored_key_count(link)) {
        throw InvariantViolation("key conservation violated on " +
                                 std::string(to_string(link)));
      }
      double counted = 8.0 * static_cast<double>(produced_bytes_[i]) +
                       engines_[i].fractional_bits() + carry_discarded_bits_[i];
      double expected = skr_dt_bits_[i];
      if (std::abs(counted - expected) > 1e-6 * std::max(1.0, std::abs(expected))) {
        throw InvariantViolation("bit conservation violated on " +
                                 std::string(to_string(link)));
      }
    }
  }
  RunOutput out;
  out.report = build_report(log_);
  out.log = std::move(log_);
  return out;
}

}  // namespace swqkd
