#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "swqkd/errors.hpp"
#include "swqkd/event_log.hpp"
#include "swqkd/report.hpp"

using namespace swqkd;
using nlohmann::json;

namespace {

json kpi(const char* link, const char* phase, double skr, double rkr, double qber, double snr,
         std::uint64_t produced, std::uint64_t level) {
  return {{"link", link},   {"phase", phase},           {"dt_s", 1.0},
          {"skr_bps", skr}, {"rkr_bps", rkr},           {"qber", qber},
          {"snr_db", snr},  {"produced_bytes", produced}, {"level_bytes", level}};
}

json final_entry(std::uint64_t produced, double skr_dt_bits, std::uint64_t formed,
                 std::uint64_t delivered, std::uint64_t discarded, std::uint64_t stored) {
  return {{"produced_bytes", produced},
          {"skr_dt_bits", skr_dt_bits},
          {"carry_bits", 0.0},
          {"carry_discarded_bits", 0.0},
          {"keys_formed", formed},
          {"keys_delivered", delivered},
          {"keys_discarded", discarded},
          {"stored_key_count", stored},
          {"level_bytes", stored * 32},
          {"pending_bytes", 0},
          {"status", "active"}};
}

// A log exercising every fold path, with figures small enough to check by
// hand. L3 carries a key-balance violation, L4 a bit-conservation one.
EventLog synthetic_log() {
  EventLog log;
  log.append(0.0, "run_start", {{"scenario", {{"name", "synthetic"}}}});
  log.append(1.0, "kpi_sample", kpi("L1", "authenticating", 0, 0, 0, 0, 0, 0));
  log.append(2.0, "kpi_sample", kpi("L1", "key_generation", 1000, 1250, 0.02, 14, 10, 10));
  log.append(3.0, "kpi_sample", kpi("L1", "key_generation", 2000, 2500, 0.04, 16, 20, 30));
  log.append(3.0, "kpi_sample", kpi("L2", "key_generation", 500, 600, 0.01, 10, 5, 5));
  log.append(5.0, "switch_start", {{"from", "bar"}, {"to", "cross"}});
  log.append(5.0, "switch_phase", {{"phase", "deactivate"}, {"context", "switch"}});
  log.append(6.0, "switch_phase", {{"phase", "fabric_reconfigure"}, {"context", "switch"}});
  log.append(10.0, "switch_phase", {{"phase", "pba"}, {"context", "switch"}});
  log.append(14.0, "switch_phase", {{"phase", "key_install"}, {"context", "switch"}});
  log.append(15.0, "switch_phase", {{"phase", "reactivate"}, {"context", "switch"}});
  log.append(16.0, "switch_end",
             {{"from", "bar"}, {"to", "cross"}, {"duration_s", 11.0}, {"epoch", 3}});
  log.append(20.0, "consumer_request",
             {{"name", "app"}, {"sae", "SAE_A1_L1"}, {"link", "L1"}, {"outcome", "ok"},
              {"keys", 2}, {"latency_s", 0.1}, {"level_after", 64}});
  log.append(21.0, "consumer_request",
             {{"name", "app"}, {"sae", "SAE_A1_L1"}, {"link", "L1"}, {"outcome", "ok"},
              {"keys", 1}, {"latency_s", 0.3}, {"level_after", 32}});
  log.append(22.0, "consumer_request",
             {{"name", "app"}, {"sae", "SAE_A1_L1"}, {"link", "L1"}, {"outcome", "unavailable"},
              {"keys", 0}, {"latency_s", 0.2}, {"level_after", 0}});
  log.append(23.0, "http_request",
             {{"op", "enc_keys"}, {"sae", "SAE_B1_L1"}, {"status", 200}, {"keys", 3}});
  log.append(24.0, "http_request",
             {{"op", "status"}, {"sae", "SAE_B1_L1"}, {"status", 200}, {"keys", 0}});
  log.append(25.0, "http_request",
             {{"op", "enc_keys"}, {"sae", "SAE_B1_L1"}, {"status", 503}, {"keys", 0}});
  log.append(30.0, "switch_start", {{"from", "cross"}, {"to", "bar"}});
  log.append(31.0, "abort",
             {{"context", "switch"}, {"from", "cross"}, {"to", "bar"}, {"started_at", 30.0},
              {"link", "L1"}, {"direction", "A-verifies-B"}});
  log.append(40.0, "run_end",
             {{"switch_count", 1},
              {"aborted_switches", 1},
              {"interrupted", false},
              {"final",
               {{"L1", final_entry(30, 240.0, 10, 3, 2, 5)},
                {"L2", final_entry(5, 40.0, 1, 0, 0, 1)},
                {"L3", final_entry(0, 0.0, 0, 0, 0, 1)},
                {"L4", final_entry(10, 100.0, 2, 0, 0, 2)}}}});
  return log;
}

}  // namespace

TEST_CASE("the report is the hand-computed fold of the log") {
  EventLog log = synthetic_log();
  RunReport rep = build_report(log);

  CHECK(rep.duration_s == 40.0);
  CHECK(rep.log_records == 21);
  CHECK(rep.scenario_echo == json{{"name", "synthetic"}});
  CHECK(rep.interrupted == false);

  const auto& l1 = rep.links.at("L1");
  CHECK(l1.kg_samples == 2);  // the authenticating sample is excluded
  CHECK(l1.mean_skr_bps == doctest::Approx(1500.0));
  CHECK(l1.mean_rkr_bps == doctest::Approx(1875.0));
  CHECK(l1.mean_qber == doctest::Approx(0.03));
  CHECK(l1.mean_snr_db == doctest::Approx(15.0));
  CHECK(l1.produced_bytes == 30);
  CHECK(l1.keys_formed == 10);
  CHECK(l1.keys_delivered == 3);
  CHECK(l1.keys_discarded == 2);
  CHECK(l1.stored_final == 5);
  CHECK(l1.key_balance_ok);
  CHECK(l1.bit_conservation_ok);
  CHECK(l1.bit_conservation_rel_error == 0.0);

  CHECK(rep.links.at("L2").kg_samples == 1);
  CHECK(rep.links.at("L2").mean_skr_bps == doctest::Approx(500.0));
  CHECK(rep.links.at("L2").produced_bytes == 5);

  CHECK_FALSE(rep.links.at("L3").key_balance_ok);  // 0 formed yet 1 stored
  CHECK(rep.links.at("L3").bit_conservation_ok);

  CHECK(rep.links.at("L4").key_balance_ok);
  CHECK_FALSE(rep.links.at("L4").bit_conservation_ok);  // 80 bits counted, 100 expected
  CHECK(rep.links.at("L4").bit_conservation_rel_error == doctest::Approx(0.2));

  REQUIRE(rep.switches.size() == 1);  // the aborted one is not a completed switch
  CHECK(rep.switches[0].start_s == 5.0);
  CHECK(rep.switches[0].end_s == 16.0);
  CHECK(rep.switches[0].from == "bar");
  CHECK(rep.switches[0].to == "cross");
  CHECK(rep.switches[0].duration_s == 11.0);
  CHECK(rep.switches[0].pba_s == 4.0);
  CHECK(rep.switches[0].epoch == 3);
  CHECK(rep.aborted_switches == 1);

  const auto& app = rep.consumers.at("app");
  CHECK(app.requests == 3);
  CHECK(app.successes == 2);
  CHECK(app.unavailable == 1);
  CHECK(app.keys_fetched == 3);
  CHECK(app.mean_latency_s == doctest::Approx(0.2));
  CHECK(app.latency_jitter_s == doctest::Approx(0.2 / 3.0));  // mean |x - 0.2|
  CHECK(app.min_latency_s == doctest::Approx(0.1));
  CHECK(app.max_latency_s == doctest::Approx(0.3));

  const auto& http = rep.consumers.at("http:SAE_B1_L1");
  CHECK(http.requests == 3);
  CHECK(http.successes == 2);
  CHECK(http.unavailable == 1);
  CHECK(http.keys_fetched == 3);

  std::string text = rep.summary_text();
  CHECK(text.find("switches: 1 completed, 1 aborted") != std::string::npos);
  CHECK(text.find("[BALANCE VIOLATION]") != std::string::npos);
  CHECK(text.find("[BIT CONSERVATION VIOLATION]") != std::string::npos);
  CHECK(text.find("note: ") != std::string::npos);
}

TEST_CASE("serialized logs reproduce both the bytes and the report") {
  EventLog log = synthetic_log();
  std::string lines = log.to_jsonl();
  CHECK(lines.rfind("{\"kind\":\"run_start\"", 0) == 0);
  CHECK(std::count(lines.begin(), lines.end(), '\n') == 21);

  EventLog parsed = EventLog::from_jsonl(lines);
  CHECK(parsed.to_jsonl() == lines);
  CHECK(build_report(parsed).to_json() == build_report(log).to_json());

  // Blank lines are tolerated.
  EventLog padded = EventLog::from_jsonl("\n" + lines + "\n\n");
  CHECK(padded.size() == 21);
}

TEST_CASE("malformed log lines are rejected with their line number") {
  CHECK_THROWS_WITH_AS(
      EventLog::from_jsonl("{\"kind\":\"a\",\"payload\":{},\"time_s\":1}\nnot json\n"),
      doctest::Contains("log line 2"), ScenarioError);
  CHECK_THROWS_WITH_AS(EventLog::from_jsonl("{\"kind\":\"a\",\"payload\":{}}\n"),
                       doctest::Contains("record must carry time_s, kind, payload"),
                       ScenarioError);
  CHECK_THROWS_WITH_AS(EventLog::read_file("/nonexistent/events.jsonl"),
                       doctest::Contains("cannot open event log"), ScenarioError);
}

TEST_CASE("log files round-trip through the filesystem") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "swqkd_report_test_io";
  fs::remove_all(dir);
  fs::create_directories(dir);
  fs::path file = dir / "events.jsonl";

  EventLog log = synthetic_log();
  log.write_file(file.string());
  EventLog back = EventLog::read_file(file.string());
  CHECK(back.to_jsonl() == log.to_jsonl());
  fs::remove_all(dir);
}

TEST_CASE("an empty log still produces a full bundle with headers") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "swqkd_report_test_empty";
  fs::remove_all(dir);

  EventLog log;
  RunReport rep = build_report(log);
  CHECK(rep.scenario_echo.is_null());
  CHECK(rep.links.size() == 4);  // all links present, zeroed
  write_report_bundle(log, rep, dir.string());

  auto first_line = [&](const char* name) {
    std::ifstream in(dir / name);
    REQUIRE(in.good());
    std::string line;
    std::getline(in, line);
    return line;
  };
  for (const char* name : {"kpi_L1.csv", "kpi_L2.csv", "kpi_L3.csv", "kpi_L4.csv"}) {
    CHECK(first_line(name) ==
          "time_s,phase,skr_bps,rkr_bps,qber,snr_db,produced_bytes,level_bytes");
    CHECK(fs::file_size(dir / name) ==
          std::string("time_s,phase,skr_bps,rkr_bps,qber,snr_db,produced_bytes,level_bytes\n")
              .size());
  }
  CHECK(first_line("buffer_levels.csv") == "time_s,link,level_bytes");
  CHECK(first_line("switches.csv") == "start_s,end_s,from,to,duration_s,pba_s,epoch,outcome");
  CHECK(first_line("consumer_latency.csv") == "time_s,consumer,link,outcome,latency_ms,keys");
  CHECK(json::parse(std::ifstream(dir / "report.json"))["links"].size() == 4);
  CHECK(first_line("summary.txt").rfind("run: 0 s, 0 log records", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("the bundle rows mirror the log") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "swqkd_report_test_rows";
  fs::remove_all(dir);

  EventLog log = synthetic_log();
  RunReport rep = build_report(log);
  write_report_bundle(log, rep, dir.string());

  auto lines_of = [&](const char* name) {
    std::ifstream in(dir / name);
    REQUIRE(in.good());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
  };

  auto kpi1 = lines_of("kpi_L1.csv");
  REQUIRE(kpi1.size() == 4);  // header + 3 samples (any phase)
  CHECK(kpi1[1] == "1,authenticating,0,0,0,0,0,0");
  CHECK(kpi1[2] == "2,key_generation,1000,1250,0.02,14,10,10");

  CHECK(lines_of("kpi_L2.csv").size() == 2);
  CHECK(lines_of("buffer_levels.csv").size() == 8);  // 4 kpi rows + 3 consumer rows
  auto switches = lines_of("switches.csv");
  REQUIRE(switches.size() == 3);
  CHECK(switches[1] == "5,16,bar,cross,11,4,3,completed");
  CHECK(switches[2] == "30,31,cross,bar,,,,aborted");
  auto lat = lines_of("consumer_latency.csv");
  REQUIRE(lat.size() == 4);
  CHECK(lat[1] == "20,app,L1,ok,100,2");

  json repj = json::parse(std::ifstream(dir / "report.json"));
  CHECK(repj == rep.to_json());
  fs::remove_all(dir);
}
