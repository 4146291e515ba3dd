#include "swqkd/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "swqkd/domain.hpp"
#include "swqkd/errors.hpp"
#include "swqkd/util.hpp"

namespace swqkd {
namespace {

constexpr const char* kLatencyNote =
    "Consumer latency columns are synthetic: requests complete instantly in "
    "virtual time, and the reported latency is drawn from the configured "
    "per-consumer delay model (mean plus symmetric uniform jitter), not "
    "measured from a transport.";

struct LatencyAcc {
  std::vector<double> samples;
};

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double mad_of(const std::vector<double>& v, double mean) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += std::abs(x - mean);
  return s / static_cast<double>(v.size());
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ScenarioError(path.string(), "directory must be writable");
  out << body;
}

}  // namespace

RunReport build_report(const EventLog& log) {
  RunReport rep;
  rep.log_records = log.records().size();
  rep.latency_note = kLatencyNote;
  for (LinkId link : all_links()) rep.links[std::string(to_string(link))] = {};

  struct SkrAcc {
    double skr = 0, rkr = 0, qber = 0, snr = 0;
    std::size_t n = 0;
  };
  std::map<std::string, SkrAcc> kg;
  std::map<std::string, LatencyAcc> lat;
  std::optional<RunReport::SwitchEvent> open;
  double open_pba_start = -1.0;

  for (const LogRecord& rec : log.records()) {
    rep.duration_s = std::max(rep.duration_s, rec.time_s);
    const nlohmann::json& p = rec.payload;
    if (rec.kind == "run_start") {
      rep.scenario_echo = p.value("scenario", nlohmann::json());
    } else if (rec.kind == "kpi_sample") {
      auto& ls = rep.links[p.at("link").get<std::string>()];
      ls.produced_bytes += p.at("produced_bytes").get<std::uint64_t>();
      if (p.at("phase").get<std::string>() == "key_generation") {
        auto& acc = kg[p.at("link").get<std::string>()];
        acc.skr += p.at("skr_bps").get<double>();
        acc.rkr += p.at("rkr_bps").get<double>();
        acc.qber += p.at("qber").get<double>();
        acc.snr += p.at("snr_db").get<double>();
        ++acc.n;
      }
    } else if (rec.kind == "switch_start") {
      open = RunReport::SwitchEvent{};
      open->start_s = rec.time_s;
      open->from = p.at("from").get<std::string>();
      open->to = p.at("to").get<std::string>();
      open_pba_start = -1.0;
    } else if (rec.kind == "switch_phase") {
      const std::string phase = p.at("phase").get<std::string>();
      if (phase == "pba") open_pba_start = rec.time_s;
      if (phase == "key_install" && open && open_pba_start >= 0.0)
        open->pba_s = rec.time_s - open_pba_start;
    } else if (rec.kind == "switch_end") {
      if (open) {
        open->end_s = rec.time_s;
        open->duration_s = p.at("duration_s").get<double>();
        open->epoch = p.at("epoch").get<std::uint64_t>();
        rep.switches.push_back(*open);
        open.reset();
      }
    } else if (rec.kind == "abort") {
      if (p.value("context", "") == "switch") {
        ++rep.aborted_switches;
        open.reset();
      }
    } else if (rec.kind == "consumer_request") {
      auto& cs = rep.consumers[p.at("name").get<std::string>()];
      ++cs.requests;
      const std::string outcome = p.at("outcome").get<std::string>();
      if (outcome == "ok") {
        ++cs.successes;
        cs.keys_fetched += p.at("keys").get<std::uint64_t>();
      } else {
        ++cs.unavailable;
      }
      lat[p.at("name").get<std::string>()].samples.push_back(
          p.at("latency_s").get<double>());
    } else if (rec.kind == "http_request") {
      auto& cs = rep.consumers["http:" + p.at("sae").get<std::string>()];
      ++cs.requests;
      if (p.at("status").get<int>() < 300) {
        ++cs.successes;
        if (p.at("op").get<std::string>() == "enc_keys")
          cs.keys_fetched += p.at("keys").get<std::uint64_t>();
      } else {
        ++cs.unavailable;
      }
    } else if (rec.kind == "run_end") {
      rep.interrupted = p.value("interrupted", false);
      for (auto& [name, ls] : rep.links) {
        const nlohmann::json& f = p.at("final").at(name);
        // Authoritative even when per-tick samples were not logged.
        ls.produced_bytes = f.at("produced_bytes").get<std::uint64_t>();
        ls.keys_formed = f.at("keys_formed").get<std::uint64_t>();
        ls.keys_delivered = f.at("keys_delivered").get<std::uint64_t>();
        ls.keys_discarded = f.at("keys_discarded").get<std::uint64_t>();
        ls.stored_final = f.at("stored_key_count").get<std::uint64_t>();
        ls.key_balance_ok =
            ls.keys_formed - ls.keys_delivered - ls.keys_discarded ==
            ls.stored_final;
        const double expected = f.at("skr_dt_bits").get<double>();
        const double counted =
            8.0 * static_cast<double>(f.at("produced_bytes")
                                          .get<std::uint64_t>()) +
            f.at("carry_bits").get<double>() +
            f.at("carry_discarded_bits").get<double>();
        ls.bit_conservation_rel_error =
            std::abs(counted - expected) / std::max(1.0, std::abs(expected));
        ls.bit_conservation_ok = ls.bit_conservation_rel_error <= 1e-6;
      }
    }
  }

  for (auto& [name, acc] : kg) {
    auto& ls = rep.links[name];
    ls.kg_samples = acc.n;
    if (acc.n > 0) {
      ls.mean_skr_bps = acc.skr / static_cast<double>(acc.n);
      ls.mean_rkr_bps = acc.rkr / static_cast<double>(acc.n);
      ls.mean_qber = acc.qber / static_cast<double>(acc.n);
      ls.mean_snr_db = acc.snr / static_cast<double>(acc.n);
    }
  }
  for (auto& [name, acc] : lat) {
    auto& cs = rep.consumers[name];
    cs.mean_latency_s = mean_of(acc.samples);
    cs.latency_jitter_s = mad_of(acc.samples, cs.mean_latency_s);
    auto [lo, hi] = std::minmax_element(acc.samples.begin(), acc.samples.end());
    cs.min_latency_s = *lo;
    cs.max_latency_s = *hi;
  }
  return rep;
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json j;
  j["duration_s"] = duration_s;
  j["log_records"] = log_records;
  j["interrupted"] = interrupted;
  j["scenario"] = scenario_echo;
  j["latency_note"] = latency_note;
  nlohmann::json jl = nlohmann::json::object();
  for (const auto& [name, ls] : links) {
    jl[name] = {{"kg_samples", ls.kg_samples},
                {"mean_skr_bps", ls.mean_skr_bps},
                {"mean_rkr_bps", ls.mean_rkr_bps},
                {"mean_qber", ls.mean_qber},
                {"mean_snr_db", ls.mean_snr_db},
                {"produced_bytes", ls.produced_bytes},
                {"keys_formed", ls.keys_formed},
                {"keys_delivered", ls.keys_delivered},
                {"keys_discarded", ls.keys_discarded},
                {"stored_final", ls.stored_final},
                {"key_balance_ok", ls.key_balance_ok},
                {"bit_conservation_rel_error", ls.bit_conservation_rel_error},
                {"bit_conservation_ok", ls.bit_conservation_ok}};
  }
  j["links"] = jl;
  nlohmann::json js = nlohmann::json::array();
  for (const auto& sw : switches) {
    js.push_back({{"start_s", sw.start_s},
                  {"end_s", sw.end_s},
                  {"from", sw.from},
                  {"to", sw.to},
                  {"duration_s", sw.duration_s},
                  {"pba_s", sw.pba_s},
                  {"epoch", sw.epoch}});
  }
  j["switches"] = js;
  j["aborted_switches"] = aborted_switches;
  nlohmann::json jc = nlohmann::json::object();
  for (const auto& [name, cs] : consumers) {
    jc[name] = {{"requests", cs.requests},
                {"successes", cs.successes},
                {"unavailable", cs.unavailable},
                {"keys_fetched", cs.keys_fetched},
                {"mean_latency_s", cs.mean_latency_s},
                {"latency_jitter_s", cs.latency_jitter_s},
                {"min_latency_s", cs.min_latency_s},
                {"max_latency_s", cs.max_latency_s}};
  }
  j["consumers"] = jc;
  return j;
}

std::string RunReport::summary_text() const {
  std::ostringstream out;
  out << "run: " << format_double(duration_s) << " s, " << log_records
      << " log records" << (interrupted ? " (interrupted)" : "") << "\n";
  out << "switches: " << switches.size() << " completed, " << aborted_switches
      << " aborted\n";
  for (const auto& sw : switches) {
    out << "  " << format_double(sw.start_s) << " s  " << sw.from << " -> "
        << sw.to << "  (" << format_double(sw.duration_s) << " s, pba "
        << format_double(sw.pba_s) << " s, epoch " << sw.epoch << ")\n";
  }
  for (const auto& [name, ls] : links) {
    out << name << ": mean skr " << format_double(ls.mean_skr_bps)
        << " bps over " << ls.kg_samples << " samples, qber "
        << format_double(ls.mean_qber) << ", produced " << ls.produced_bytes
        << " B, keys " << ls.keys_formed << " formed / " << ls.keys_delivered
        << " delivered / " << ls.keys_discarded << " discarded / "
        << ls.stored_final << " stored"
        << (ls.key_balance_ok ? "" : "  [BALANCE VIOLATION]")
        << (ls.bit_conservation_ok ? "" : "  [BIT CONSERVATION VIOLATION]")
        << "\n";
  }
  for (const auto& [name, cs] : consumers) {
    out << name << ": " << cs.requests << " requests, " << cs.unavailable
        << " unavailable, " << cs.keys_fetched << " keys, latency "
        << format_double(cs.mean_latency_s * 1e3) << " ms (jitter "
        << format_double(cs.latency_jitter_s * 1e3) << " ms)\n";
  }
  out << "note: " << latency_note << "\n";
  return out.str();
}

void write_report_bundle(const EventLog& log, const RunReport& report,
                         const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  for (LinkId link : all_links()) {
    std::ostringstream csv;
    csv << "time_s,phase,skr_bps,rkr_bps,qber,snr_db,produced_bytes,"
           "level_bytes\n";
    for (const LogRecord& rec : log.records()) {
      if (rec.kind != "kpi_sample") continue;
      const nlohmann::json& p = rec.payload;
      if (p.at("link").get<std::string>() != to_string(link)) continue;
      csv << format_double(rec.time_s) << ','
          << p.at("phase").get<std::string>() << ','
          << format_double(p.at("skr_bps").get<double>()) << ','
          << format_double(p.at("rkr_bps").get<double>()) << ','
          << format_double(p.at("qber").get<double>()) << ','
          << format_double(p.at("snr_db").get<double>()) << ','
          << p.at("produced_bytes").get<std::uint64_t>() << ','
          << p.at("level_bytes").get<std::uint64_t>() << '\n';
    }
    write_file(dir / ("kpi_" + std::string(to_string(link)) + ".csv"), csv.str());
  }

  {
    std::ostringstream csv;
    csv << "time_s,link,level_bytes\n";
    for (const LogRecord& rec : log.records()) {
      const nlohmann::json& p = rec.payload;
      if (rec.kind == "kpi_sample") {
        csv << format_double(rec.time_s) << ','
            << p.at("link").get<std::string>() << ','
            << p.at("level_bytes").get<std::uint64_t>() << '\n';
      } else if (rec.kind == "consumer_request" && p.contains("level_after")) {
        csv << format_double(rec.time_s) << ','
            << p.at("link").get<std::string>() << ','
            << p.at("level_after").get<std::uint64_t>() << '\n';
      }
    }
    write_file(dir / "buffer_levels.csv", csv.str());
  }

  {
    std::ostringstream csv;
    csv << "start_s,end_s,from,to,duration_s,pba_s,epoch,outcome\n";
    for (const auto& sw : report.switches) {
      csv << format_double(sw.start_s) << ',' << format_double(sw.end_s) << ','
          << sw.from << ',' << sw.to << ',' << format_double(sw.duration_s)
          << ',' << format_double(sw.pba_s) << ',' << sw.epoch
          << ",completed\n";
    }
    for (const LogRecord& rec : log.records()) {
      if (rec.kind != "abort" || rec.payload.value("context", "") != "switch")
        continue;
      csv << format_double(rec.payload.at("started_at").get<double>()) << ','
          << format_double(rec.time_s) << ','
          << rec.payload.at("from").get<std::string>() << ','
          << rec.payload.at("to").get<std::string>() << ",,,,aborted\n";
    }
    write_file(dir / "switches.csv", csv.str());
  }

  {
    std::ostringstream csv;
    csv << "time_s,consumer,link,outcome,latency_ms,keys\n";
    for (const LogRecord& rec : log.records()) {
      if (rec.kind != "consumer_request") continue;
      const nlohmann::json& p = rec.payload;
      csv << format_double(rec.time_s) << ',' << p.at("name").get<std::string>()
          << ',' << p.at("link").get<std::string>() << ','
          << p.at("outcome").get<std::string>() << ','
          << format_double(p.at("latency_s").get<double>() * 1e3) << ','
          << p.at("keys").get<std::uint64_t>() << '\n';
    }
    write_file(dir / "consumer_latency.csv", csv.str());
  }

  write_file(dir / "report.json", report.to_json().dump(2) + "\n");
  write_file(dir / "summary.txt", report.summary_text());
}

}  // namespace swqkd
