#include "swqkd/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "swqkd/errors.hpp"

namespace swqkd {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& source, const std::string& path,
                       const std::string& constraint) {
  throw ScenarioError(source + (path.empty() ? "" : " (" + path + ")"), constraint);
}

double get_number(const json& j, const char* key, double fallback, const std::string& source,
                  const std::string& path) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) fail(source, path + "." + key, "expected a number");
  return j[key].get<double>();
}

std::uint64_t get_u64(const json& j, const char* key, std::uint64_t fallback,
                      const std::string& source, const std::string& path) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_unsigned() && !j[key].is_number_integer())
    fail(source, path + "." + key, "expected a non-negative integer");
  auto v = j[key].get<std::int64_t>();
  if (v < 0) fail(source, path + "." + key, "expected a non-negative integer");
  return static_cast<std::uint64_t>(v);
}

std::string get_string(const json& j, const char* key, const std::string& fallback,
                       const std::string& source, const std::string& path) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) fail(source, path + "." + key, "expected a string");
  return j[key].get<std::string>();
}

std::string require_string(const json& j, const char* key, const std::string& source,
                           const std::string& path) {
  if (!j.contains(key)) fail(source, path, std::string("missing required field: ") + key);
  return get_string(j, key, "", source, path);
}

// Maps a name-parse ParamError into a located ScenarioError.
template <typename F>
auto named(F&& f, const std::string& source, const std::string& path) {
  try {
    return f();
  } catch (const ParamError& e) {
    fail(source, path, e.what());
  }
}

RateModel parse_rate(const json& j, const std::string& source, const std::string& path) {
  RateModel m;
  if (!j.contains("mean_skr_bps")) fail(source, path, "missing required field: mean_skr_bps");
  m.mean_skr_bps = get_number(j, "mean_skr_bps", 0.0, source, path);
  m.skr_rel_jitter = get_number(j, "skr_rel_jitter", m.skr_rel_jitter, source, path);
  m.mean_qber = get_number(j, "mean_qber", m.mean_qber, source, path);
  m.qber_rel_jitter = get_number(j, "qber_rel_jitter", m.qber_rel_jitter, source, path);
  m.rkr_factor = get_number(j, "rkr_factor", m.rkr_factor, source, path);
  m.snr_mean_db = get_number(j, "snr_mean_db", m.snr_mean_db, source, path);
  m.snr_jitter_db = get_number(j, "snr_jitter_db", m.snr_jitter_db, source, path);
  return m;
}

json rate_echo(const RateModel& m) {
  return json{{"mean_skr_bps", m.mean_skr_bps},   {"skr_rel_jitter", m.skr_rel_jitter},
              {"mean_qber", m.mean_qber},         {"qber_rel_jitter", m.qber_rel_jitter},
              {"rkr_factor", m.rkr_factor},       {"snr_mean_db", m.snr_mean_db},
              {"snr_jitter_db", m.snr_jitter_db}};
}

}  // namespace

nlohmann::json ScenarioConfig::echo() const {
  json links_j = json::array();
  for (const auto& b : links)
    links_j.push_back({{"id", to_string(b.link)},
                       {"master_sae", b.master_sae_id},
                       {"slave_sae", b.slave_sae_id},
                       {"source_kme", b.source_kme_id},
                       {"target_kme", b.target_kme_id}});
  json rates_j;
  json levels_j;
  for (LinkId link : all_links()) {
    rates_j[std::string(to_string(link))] = rate_echo(rates[link_index(link)]);
    levels_j[std::string(to_string(link))] = initial_level_bytes[link_index(link)];
  }
  json consumers_j = json::array();
  for (const auto& c : consumers)
    consumers_j.push_back(
        {{"name", c.name},
         {"sae", c.sae_id},
         {"rate_per_s", c.rate_per_s},
         {"mode", c.mode == ConsumerSpec::Mode::Enc ? "enc" : "enc_then_dec"},
         {"arrival", c.arrival == ConsumerSpec::Arrival::FixedInterval ? "fixed" : "poisson"},
         {"keys_per_request", c.keys_per_request},
         {"delay_mean_s", c.delay_mean_s},
         {"delay_jitter_s", c.delay_jitter_s}});
  return json{
      {"version", version},
      {"name", name},
      {"seed", seed},
      {"duration_s", duration_s},
      {"start_config", std::string(to_string(start_config))},
      {"key_size_bytes", key_size_bytes},
      {"capacity_bytes", capacity_bytes},
      {"max_key_per_request", max_key_per_request},
      {"initial_level_bytes", levels_j},
      {"links", links_j},
      {"rates", rates_j},
      {"policy",
       {{"bar_threshold_bytes", policy.bar_threshold_bytes},
        {"cross_threshold_bytes", policy.cross_threshold_bytes},
        {"priority", std::string(to_string(policy.priority))},
        {"poll_interval_s", policy.poll_interval_s},
        {"min_dwell_s", policy.min_dwell_s},
        {"aggregate", std::string(to_string(policy.aggregate))}}},
      {"switch_timing",
       {{"total_s", switch_timing.total},
        {"deactivate_s", switch_timing.deactivate},
        {"fabric_reconfigure_s", switch_timing.fabric_reconfigure},
        {"pba_s", switch_timing.pba},
        {"key_install_s", switch_timing.key_install},
        {"reactivate_s", switch_timing.reactivate}}},
      {"puf_timing",
       {{"https_request_s", puf_timing.https_request},
        {"device_interaction_s", puf_timing.device_interaction},
        {"hashing_s", puf_timing.hashing},
        {"ssh_processes_s", puf_timing.ssh_processes},
        {"verification_total_s", puf_timing.verification_total}}},
      {"puf",
       {{"cell_count", puf.cell_count},
        {"flip_probability", puf.flip_probability},
        {"repetition", puf.code.repetition},
        {"key_bits", puf.code.key_bits},
        {"bidirectional", puf.bidirectional}}},
      {"base_agreement_s", base_agreement_s},
      {"tick_s", tick_s},
      {"auth_key_len_bytes", auth_key_len_bytes},
      {"consumers", consumers_j},
  };
}

ScenarioConfig scenario_from_json(const json& j, const std::string& source_name) {
  const std::string& src = source_name;
  if (!j.is_object()) fail(src, "", "scenario root must be a JSON object");

  ScenarioConfig cfg;
  cfg.version = static_cast<int>(get_u64(j, "version", 0, src, ""));
  if (cfg.version != 1) fail(src, "version", "unsupported scenario version (expected 1)");
  cfg.name = require_string(j, "name", src, "");
  if (!j.contains("seed")) fail(src, "", "missing required field: seed");
  cfg.seed = get_u64(j, "seed", 0, src, "");
  if (!j.contains("duration_s")) fail(src, "", "missing required field: duration_s");
  cfg.duration_s = get_number(j, "duration_s", 0.0, src, "");
  cfg.start_config = named([&] { return parse_config(get_string(j, "start_config", "bar", src, "")); },
                           src, "start_config");
  cfg.key_size_bytes = get_u64(j, "key_size_bytes", 32, src, "");
  if (!j.contains("capacity_bytes")) fail(src, "", "missing required field: capacity_bytes");
  cfg.capacity_bytes = get_u64(j, "capacity_bytes", 0, src, "");
  cfg.max_key_per_request =
      static_cast<std::uint32_t>(get_u64(j, "max_key_per_request", 128, src, ""));

  if (!j.contains("links") || !j["links"].is_array())
    fail(src, "links", "missing required array: links");
  std::set<std::string> seen_links;
  for (const auto& lj : j["links"]) {
    SaeBinding b;
    std::string id = require_string(lj, "id", src, "links[]");
    b.link = named([&] { return parse_link(id); }, src, "links[]");
    if (!seen_links.insert(id).second) fail(src, "links." + id, "duplicate link id");
    b.master_sae_id = require_string(lj, "master_sae", src, "links." + id);
    b.slave_sae_id = require_string(lj, "slave_sae", src, "links." + id);
    b.source_kme_id = require_string(lj, "source_kme", src, "links." + id);
    b.target_kme_id = require_string(lj, "target_kme", src, "links." + id);
    cfg.links.push_back(std::move(b));
  }

  if (!j.contains("rates") || !j["rates"].is_object())
    fail(src, "rates", "missing required object: rates");
  for (LinkId link : all_links()) {
    std::string key(to_string(link));
    if (!j["rates"].contains(key))
      fail(src, "rates", "missing rate model for link " + key);
    cfg.rates[link_index(link)] = parse_rate(j["rates"][key], src, "rates." + key);
  }

  if (j.contains("initial_level_bytes")) {
    const json& lv = j["initial_level_bytes"];
    if (!lv.is_object()) fail(src, "initial_level_bytes", "expected an object keyed by link id");
    for (LinkId link : all_links()) {
      std::string key(to_string(link));
      cfg.initial_level_bytes[link_index(link)] =
          get_u64(lv, key.c_str(), 0, src, "initial_level_bytes");
    }
  }

  if (!j.contains("policy") || !j["policy"].is_object())
    fail(src, "policy", "missing required object: policy");
  {
    const json& pj = j["policy"];
    if (!pj.contains("bar_threshold_bytes") || !pj.contains("cross_threshold_bytes"))
      fail(src, "policy", "policy requires bar_threshold_bytes and cross_threshold_bytes");
    cfg.policy.bar_threshold_bytes = get_u64(pj, "bar_threshold_bytes", 0, src, "policy");
    cfg.policy.cross_threshold_bytes = get_u64(pj, "cross_threshold_bytes", 0, src, "policy");
    cfg.policy.priority =
        named([&] { return parse_config(get_string(pj, "priority", "bar", src, "policy")); }, src,
              "policy.priority");
    cfg.policy.poll_interval_s =
        get_number(pj, "poll_interval_s", cfg.policy.poll_interval_s, src, "policy");
    cfg.policy.min_dwell_s = get_number(pj, "min_dwell_s", cfg.policy.min_dwell_s, src, "policy");
    cfg.policy.aggregate =
        named([&] { return parse_aggregate(get_string(pj, "aggregate", "min", src, "policy")); },
              src, "policy.aggregate");
  }

  if (j.contains("switch_timing")) {
    const json& tj = j["switch_timing"];
    cfg.switch_timing.total = get_number(tj, "total_s", cfg.switch_timing.total, src, "switch_timing");
    cfg.switch_timing.deactivate =
        get_number(tj, "deactivate_s", cfg.switch_timing.deactivate, src, "switch_timing");
    cfg.switch_timing.fabric_reconfigure = get_number(
        tj, "fabric_reconfigure_s", cfg.switch_timing.fabric_reconfigure, src, "switch_timing");
    cfg.switch_timing.key_install =
        get_number(tj, "key_install_s", cfg.switch_timing.key_install, src, "switch_timing");
    cfg.switch_timing.reactivate =
        get_number(tj, "reactivate_s", cfg.switch_timing.reactivate, src, "switch_timing");
  }

  if (j.contains("puf_timing")) {
    const json& tj = j["puf_timing"];
    cfg.puf_timing.https_request =
        get_number(tj, "https_request_s", cfg.puf_timing.https_request, src, "puf_timing");
    cfg.puf_timing.device_interaction = get_number(
        tj, "device_interaction_s", cfg.puf_timing.device_interaction, src, "puf_timing");
    cfg.puf_timing.hashing = get_number(tj, "hashing_s", cfg.puf_timing.hashing, src, "puf_timing");
    cfg.puf_timing.ssh_processes =
        get_number(tj, "ssh_processes_s", cfg.puf_timing.ssh_processes, src, "puf_timing");
    cfg.puf_timing.verification_total = get_number(
        tj, "verification_total_s", cfg.puf_timing.verification_total, src, "puf_timing");
  }

  if (j.contains("puf")) {
    const json& pj = j["puf"];
    cfg.puf.cell_count = get_u64(pj, "cell_count", cfg.puf.cell_count, src, "puf");
    cfg.puf.flip_probability =
        get_number(pj, "flip_probability", cfg.puf.flip_probability, src, "puf");
    cfg.puf.code.repetition =
        static_cast<int>(get_u64(pj, "repetition", cfg.puf.code.repetition, src, "puf"));
    cfg.puf.code.key_bits =
        static_cast<int>(get_u64(pj, "key_bits", cfg.puf.code.key_bits, src, "puf"));
    if (pj.contains("bidirectional")) {
      if (!pj["bidirectional"].is_boolean()) fail(src, "puf.bidirectional", "expected a boolean");
      cfg.puf.bidirectional = pj["bidirectional"].get<bool>();
    }
  }

  cfg.base_agreement_s = get_number(j, "base_agreement_s", cfg.base_agreement_s, src, "");
  cfg.tick_s = get_number(j, "tick_s", cfg.tick_s, src, "");
  cfg.auth_key_len_bytes = get_u64(j, "auth_key_len_bytes", cfg.auth_key_len_bytes, src, "");

  if (j.contains("consumers")) {
    if (!j["consumers"].is_array()) fail(src, "consumers", "expected an array");
    for (const auto& cj : j["consumers"]) {
      ConsumerSpec c;
      c.name = require_string(cj, "name", src, "consumers[]");
      c.sae_id = require_string(cj, "sae", src, "consumers." + c.name);
      if (!cj.contains("rate_per_s"))
        fail(src, "consumers." + c.name, "missing required field: rate_per_s");
      c.rate_per_s = get_number(cj, "rate_per_s", 0.0, src, "consumers." + c.name);
      std::string mode = get_string(cj, "mode", "enc", src, "consumers." + c.name);
      if (mode == "enc")
        c.mode = ConsumerSpec::Mode::Enc;
      else if (mode == "enc_then_dec")
        c.mode = ConsumerSpec::Mode::EncThenDec;
      else
        fail(src, "consumers." + c.name, "mode must be enc or enc_then_dec");
      std::string arrival = get_string(cj, "arrival", "fixed", src, "consumers." + c.name);
      if (arrival == "fixed")
        c.arrival = ConsumerSpec::Arrival::FixedInterval;
      else if (arrival == "poisson")
        c.arrival = ConsumerSpec::Arrival::Poisson;
      else
        fail(src, "consumers." + c.name, "arrival must be fixed or poisson");
      c.keys_per_request = static_cast<std::uint32_t>(
          get_u64(cj, "keys_per_request", c.keys_per_request, src, "consumers." + c.name));
      c.delay_mean_s = get_number(cj, "delay_mean_s", c.delay_mean_s, src, "consumers." + c.name);
      c.delay_jitter_s =
          get_number(cj, "delay_jitter_s", c.delay_jitter_s, src, "consumers." + c.name);
      cfg.consumers.push_back(std::move(c));
    }
  }

  validate_scenario(cfg, src);
  return cfg;
}

void validate_scenario(ScenarioConfig& cfg, const std::string& src) {
  if (cfg.duration_s < 0) fail(src, "duration_s", "duration_s must be >= 0");
  if (cfg.tick_s <= 0) fail(src, "tick_s", "tick_s must be > 0");
  if (cfg.key_size_bytes == 0) fail(src, "key_size_bytes", "key_size_bytes must be > 0");
  if (cfg.capacity_bytes < cfg.key_size_bytes)
    fail(src, "capacity_bytes", "capacity_bytes must hold at least one key");
  if (cfg.max_key_per_request == 0)
    fail(src, "max_key_per_request", "max_key_per_request must be > 0");
  if (cfg.auth_key_len_bytes == 0)
    fail(src, "auth_key_len_bytes", "auth_key_len_bytes must be > 0");
  if (cfg.base_agreement_s < 0) fail(src, "base_agreement_s", "base_agreement_s must be >= 0");

  if (cfg.links.size() != 4) fail(src, "links", "exactly four links (L1..L4) are required");
  std::set<std::string> sae_ids;
  std::set<int> link_ids;
  for (const auto& b : cfg.links) {
    link_ids.insert(static_cast<int>(b.link));
    for (const std::string* id : {&b.master_sae_id, &b.slave_sae_id}) {
      if (id->empty()) fail(src, "links." + std::string(to_string(b.link)), "SAE ids must be non-empty");
      if (!sae_ids.insert(*id).second)
        fail(src, "links." + std::string(to_string(b.link)), "duplicate SAE id: " + *id);
    }
    if (b.source_kme_id.empty() || b.target_kme_id.empty())
      fail(src, "links." + std::string(to_string(b.link)), "KME ids must be non-empty");
  }
  if (link_ids.size() != 4) fail(src, "links", "every link L1..L4 must appear exactly once");

  for (LinkId link : all_links()) {
    const RateModel& m = cfg.rates[link_index(link)];
    std::string path = "rates." + std::string(to_string(link));
    if (m.mean_skr_bps <= 0) fail(src, path, "mean_skr_bps must be > 0");
    if (m.skr_rel_jitter < 0 || m.skr_rel_jitter >= 1)
      fail(src, path, "skr_rel_jitter must lie in [0, 1)");
    if (m.mean_qber < 0 || m.mean_qber >= 0.5) fail(src, path, "mean_qber must lie in [0, 0.5)");
    if (m.qber_rel_jitter < 0 || m.qber_rel_jitter >= 1)
      fail(src, path, "qber_rel_jitter must lie in [0, 1)");
    if (m.rkr_factor < 1) fail(src, path, "rkr_factor must be >= 1");
    if (m.snr_jitter_db < 0) fail(src, path, "snr_jitter_db must be >= 0");

    std::uint64_t level = cfg.initial_level_bytes[link_index(link)];
    if (level > cfg.capacity_bytes)
      fail(src, "initial_level_bytes." + std::string(to_string(link)),
           "initial level exceeds capacity_bytes");
    if (level % cfg.key_size_bytes != 0)
      fail(src, "initial_level_bytes." + std::string(to_string(link)),
           "initial level must be a whole number of keys (multiple of key_size_bytes)");
  }

  if (cfg.policy.bar_threshold_bytes == 0 || cfg.policy.cross_threshold_bytes == 0)
    fail(src, "policy", "thresholds must be > 0");
  if (cfg.policy.poll_interval_s <= 0) fail(src, "policy.poll_interval_s", "must be > 0");
  if (cfg.policy.min_dwell_s < 0) fail(src, "policy.min_dwell_s", "must be >= 0");

  if (cfg.puf.flip_probability < 0 || cfg.puf.flip_probability > 1)
    fail(src, "puf.flip_probability", "must lie in [0, 1]");
  if (cfg.puf.code.repetition < 1 || cfg.puf.code.repetition % 2 == 0)
    fail(src, "puf.repetition", "must be a positive odd integer");
  if (cfg.puf.code.key_bits < 1) fail(src, "puf.key_bits", "must be >= 1");
  if (cfg.puf.code.block_bits() > cfg.puf.cell_count)
    fail(src, "puf", "repetition * key_bits exceeds cell_count");

  std::set<std::string> consumer_names;
  std::set<std::string> master_ids;
  for (const auto& b : cfg.links) master_ids.insert(b.master_sae_id);
  for (const auto& c : cfg.consumers) {
    if (!consumer_names.insert(c.name).second)
      fail(src, "consumers." + c.name, "duplicate consumer name");
    if (c.rate_per_s <= 0) fail(src, "consumers." + c.name, "rate_per_s must be > 0");
    if (c.keys_per_request == 0 || c.keys_per_request > cfg.max_key_per_request)
      fail(src, "consumers." + c.name, "keys_per_request must lie in [1, max_key_per_request]");
    if (!master_ids.count(c.sae_id))
      fail(src, "consumers." + c.name, "sae must name a master SAE id: " + c.sae_id);
    if (c.delay_mean_s < 0 || c.delay_jitter_s < 0)
      fail(src, "consumers." + c.name, "delay model values must be >= 0");
  }

  // Pin the switching sub-phases: pba equals the authentication profile's
  // verification_total; the remaining four scale to fill (total - pba) and
  // the last one takes the exact residual so the sum is bit-exact.
  SwitchTiming& t = cfg.switch_timing;
  if (t.total <= 0) fail(src, "switch_timing.total_s", "must be > 0");
  for (double v : {t.deactivate, t.fabric_reconfigure, t.key_install, t.reactivate})
    if (v < 0) fail(src, "switch_timing", "sub-phase durations must be >= 0");
  t.pba = cfg.puf_timing.verification_total;
  if (t.pba < 0) fail(src, "puf_timing.verification_total_s", "must be >= 0");
  if (t.total < t.pba)
    fail(src, "switch_timing.total_s",
         "total_s must be >= puf_timing.verification_total_s (the pba sub-phase)");
  double rest = t.total - t.pba;
  double sum = t.deactivate + t.fabric_reconfigure + t.key_install + t.reactivate;
  if (rest > 0 && sum <= 0)
    fail(src, "switch_timing",
         "non-pba sub-phases must have positive total duration when total_s exceeds the pba phase");
  if (rest == 0) {
    t.deactivate = t.fabric_reconfigure = t.key_install = t.reactivate = 0;
  } else {
    double scale = rest / sum;
    t.deactivate *= scale;
    t.fabric_reconfigure *= scale;
    t.key_install *= scale;
    t.reactivate = t.total - t.pba - t.deactivate - t.fabric_reconfigure - t.key_install;
    if (t.reactivate < 0) t.reactivate = 0;  // guards fp drift; sum stays exact
  }
}

ScenarioConfig parse_scenario(const std::string& text, const std::string& source_name) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // Map the byte offset to line:column for a usable diagnostic.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ScenarioError(source_name + ":" + std::to_string(line) + ":" + std::to_string(col),
                        e.what());
  }
  return scenario_from_json(j, source_name);
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError(path, "cannot open scenario file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path);
}

}  // namespace swqkd
