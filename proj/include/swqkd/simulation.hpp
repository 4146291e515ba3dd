#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "swqkd/clock.hpp"
#include "swqkd/event_log.hpp"
#include "swqkd/kms.hpp"
#include "swqkd/link_engine.hpp"
#include "swqkd/puf.hpp"
#include "swqkd/report.hpp"
#include "swqkd/scenario.hpp"

namespace swqkd {

struct RunOptions {
  bool log_kpi_samples = true;  // per-tick per-link samples; dominant log volume
};

struct RunOutput {
  EventLog log;
  RunReport report;
};

// One network run: four SRAM devices enrolled up front, bring-up of the start
// configuration, then threshold-driven switching under the controller policy,
// key production into the per-link stores, and modeled consumers draining
// them. Everything observable goes through the event log; run() (or the
// paced equivalent) ends with conservation checks and a report folded back
// out of that log.
//
// Same-instant ordering is fixed by event priority class: procedure phases
// (bring-up and switching) fire first, then controller polls, then
// production ticks, then consumer requests.
class Simulation {
 public:
  explicit Simulation(ScenarioConfig config, RunOptions options = {});

  RunOutput run();

  // Paced-mode plumbing: the caller owns the pacing loop and serializes
  // access (the HTTP layer shares this object across threads).
  bool has_pending() const;
  double next_event_time() const;  // StateError when nothing is pending
  void process_next();
  double now() const { return clock_.now(); }
  RunOutput finish(bool interrupted);

  Kms& kms() { return kms_; }
  const ScenarioConfig& config() const { return cfg_; }
  const EventLog& log() const { return log_; }
  PufRegistrar& registrar() { return registrar_; }
  void append_log(double time_s, std::string kind, nlohmann::json payload);

 private:
  void schedule_all();
  void on_tick();
  void on_poll();
  void on_consumer(std::size_t index);

  void start_bringup();
  void start_switch(SwitchConfiguration target);
  void phase_fabric();
  void phase_pba(bool bringup);
  void phase_auth(bool bringup);
  void phase_reactivate(bool bringup);
  void phase_complete(bool bringup);
  void abort_procedure(bool bringup, LinkId failed_link, const std::string& direction);

  std::array<LinkId, 2> procedure_links() const;  // links being brought up
  void set_status(LinkId link, BufferStatus status);
  void deactivate_engine(std::size_t index);
  std::string key_fingerprint(std::span<const std::uint8_t> key) const;

  ScenarioConfig cfg_;
  RunOptions opts_;
  VirtualClock clock_;
  EventLog log_;
  SwitchFabric fabric_;
  Kms kms_;
  PufRegistrar registrar_;

  std::map<std::string, SramDevice> devices_;  // by node id
  std::vector<LinkEngine> engines_;            // index = link_index
  std::vector<RngStream> engine_rng_;
  std::vector<RngStream> material_rng_;
  std::vector<RngStream> auth_rng_;
  std::vector<RngStream> consumer_rng_;

  bool bringup_done_ = false;
  std::int64_t current_epoch_ = -1;
  std::optional<double> last_switch_end_;
  SwitchConfiguration procedure_target_;
  double procedure_started_at_ = 0.0;
  std::array<std::vector<std::uint8_t>, 4> pending_key_;
  std::uint64_t pending_epoch_ = 0;

  std::array<double, 4> skr_dt_bits_{};
  std::array<std::uint64_t, 4> produced_bytes_{};
  std::array<double, 4> carry_discarded_bits_{};
  std::uint64_t switch_count_ = 0;
  std::uint64_t aborted_switches_ = 0;
  bool finished_ = false;
};

}  // namespace swqkd
