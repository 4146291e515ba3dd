#include <atomic>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "swqkd/errors.hpp"
#include "swqkd/event_log.hpp"
#include "swqkd/report.hpp"
#include "swqkd/scenario.hpp"
#include "swqkd/service.hpp"
#include "swqkd/simulation.hpp"

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop.store(true); }

void write_outputs(const swqkd::RunOutput& output, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  output.log.write_file((std::filesystem::path(out_dir) / "log.jsonl").string());
  swqkd::write_report_bundle(output.log, output.report, out_dir);
}

swqkd::ScenarioConfig load_with_overrides(const std::string& path,
                                          std::optional<std::uint64_t> seed) {
  swqkd::ScenarioConfig cfg = swqkd::load_scenario(path);
  if (seed) {
    cfg.seed = *seed;
    swqkd::validate_scenario(cfg, path);
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Switched QKD network simulator"};
  app.set_version_flag("--version", "swqkd 0.1.0");
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  bool no_kpi_log = false;
  std::string registry_path;

  CLI::App* run = app.add_subcommand("run", "Run a scenario to completion in virtual time");
  run->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--out", out_dir, "Output directory (log + report bundle)");
  run->add_flag("--no-kpi-log", no_kpi_log, "Skip per-tick KPI samples in the event log");
  run->add_option("--save-registry", registry_path, "Write the enrollment registry to this file");

  double time_scale = 1.0;
  std::string host = "127.0.0.1";
  int base_port = 8010;
  CLI::App* serve = app.add_subcommand("serve", "Run paced against the wall clock, serving the key delivery API");
  serve->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  serve->add_option("--seed", seed, "Override the scenario seed");
  serve->add_option("--out", out_dir, "Output directory (log + report bundle)");
  serve->add_option("--time-scale", time_scale, "Virtual seconds per wall second")
      ->check(CLI::PositiveNumber);
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", base_port, "First KME port; the rest ascend from it");

  CLI::App* validate = app.add_subcommand("validate", "Parse and validate a scenario, print the resolved form");
  validate->add_option("scenario", scenario_path, "Scenario JSON file")->required();

  std::string log_path;
  bool report_json = false;
  std::optional<std::string> report_out;
  CLI::App* report = app.add_subcommand("report", "Rebuild the report from an event log");
  report->add_option("log", log_path, "Event log (JSONL)")->required();
  report->add_flag("--json", report_json, "Print report JSON instead of the summary");
  report->add_option("--out", report_out, "Also write the report bundle to this directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) {
      swqkd::ScenarioConfig cfg = load_with_overrides(scenario_path, seed);
      swqkd::RunOptions options;
      options.log_kpi_samples = !no_kpi_log;
      swqkd::Simulation sim(std::move(cfg), options);
      if (!registry_path.empty()) {
        const std::filesystem::path parent = std::filesystem::path(registry_path).parent_path();
        if (!parent.empty()) std::filesystem::create_directories(parent);
        sim.registrar().save(registry_path);
      }
      swqkd::RunOutput output = sim.run();
      write_outputs(output, out_dir);
      std::cout << output.report.summary_text();
      return 0;
    }
    if (serve->parsed()) {
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      swqkd::ScenarioConfig cfg = load_with_overrides(scenario_path, seed);
      swqkd::ServeOptions options;
      options.time_scale = time_scale;
      options.host = host;
      options.base_port = base_port;
      swqkd::ServeResult result = swqkd::serve_scenario(std::move(cfg), options, g_stop, &std::cout);
      write_outputs(result.output, out_dir);
      std::cout << result.output.report.summary_text();
      if (!result.completed) {
        std::cerr << "stopped before the scenario end\n";
        return 3;
      }
      return 0;
    }
    if (validate->parsed()) {
      swqkd::ScenarioConfig cfg = swqkd::load_scenario(scenario_path);
      std::cout << cfg.echo().dump(2) << "\n";
      return 0;
    }
    if (report->parsed()) {
      swqkd::EventLog log = swqkd::EventLog::read_file(log_path);
      swqkd::RunReport rep = swqkd::build_report(log);
      if (report_out) swqkd::write_report_bundle(log, rep, *report_out);
      std::cout << (report_json ? rep.to_json().dump(2) + "\n" : rep.summary_text());
      return 0;
    }
  } catch (const swqkd::ScenarioError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const swqkd::InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
