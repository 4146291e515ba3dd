#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "swqkd/event_log.hpp"

namespace swqkd {

// Every figure below is a pure fold over the event log; nothing is carried
// from simulation internals. The scenario echo travels in the run_start
// record, so a persisted log regenerates the identical report.
struct RunReport {
  struct LinkStats {
    std::size_t kg_samples = 0;
    double mean_skr_bps = 0.0;
    double mean_rkr_bps = 0.0;
    double mean_qber = 0.0;
    double mean_snr_db = 0.0;
    std::uint64_t produced_bytes = 0;
    std::uint64_t keys_formed = 0;
    std::uint64_t keys_delivered = 0;
    std::uint64_t keys_discarded = 0;
    std::uint64_t stored_final = 0;
    bool key_balance_ok = true;
    double bit_conservation_rel_error = 0.0;
    bool bit_conservation_ok = true;
  };

  struct SwitchEvent {
    double start_s = 0.0;
    double end_s = 0.0;
    std::string from;
    std::string to;
    double duration_s = 0.0;
    double pba_s = 0.0;
    std::uint64_t epoch = 0;
  };

  struct ConsumerStats {
    std::uint64_t requests = 0;
    std::uint64_t successes = 0;
    std::uint64_t unavailable = 0;
    std::uint64_t keys_fetched = 0;
    double mean_latency_s = 0.0;
    double latency_jitter_s = 0.0;  // mean absolute deviation
    double min_latency_s = 0.0;
    double max_latency_s = 0.0;
  };

  nlohmann::json scenario_echo;  // null when the log carries no run_start
  double duration_s = 0.0;
  std::size_t log_records = 0;
  std::map<std::string, LinkStats> links;
  std::vector<SwitchEvent> switches;
  std::uint64_t aborted_switches = 0;
  std::map<std::string, ConsumerStats> consumers;
  bool interrupted = false;
  std::string latency_note;

  nlohmann::json to_json() const;
  std::string summary_text() const;
};

RunReport build_report(const EventLog& log);

// CSV bundle: kpi_L1..L4.csv, buffer_levels.csv, switches.csv,
// consumer_latency.csv plus report.json and summary.txt. Files always carry
// their header row, even for an empty log.
void write_report_bundle(const EventLog& log, const RunReport& report,
                         const std::string& out_dir);

}  // namespace swqkd
