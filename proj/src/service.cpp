#include "swqkd/service.hpp"

#include <algorithm>
#include <chrono>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "swqkd/errors.hpp"
#include "swqkd/http_api.hpp"

namespace swqkd {
namespace {

std::vector<std::string> kme_identities(const ScenarioConfig& cfg) {
  std::vector<std::string> ids;
  for (const SaeBinding& b : cfg.links) {
    for (const std::string& id : {b.source_kme_id, b.target_kme_id}) {
      if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
    }
  }
  return ids;
}

}  // namespace

ServeResult serve_scenario(ScenarioConfig config, const ServeOptions& options,
                           const std::atomic<bool>& stop, std::ostream* info) {
  if (options.time_scale <= 0.0) throw ParamError("time_scale must be positive");

  ServeResult result;
  Simulation sim(std::move(config));
  std::mutex mutex;

  EtsiHttpServer::RequestHook hook = [&sim](const std::string& op, const std::string& sae,
                                            int status, std::uint64_t keys) {
    sim.append_log(sim.now(), "http_request",
                   {{"op", op}, {"sae", sae}, {"status", status}, {"keys", keys}});
  };

  std::vector<std::unique_ptr<EtsiHttpServer>> servers;
  std::vector<std::thread> threads;
  const std::vector<std::string> kmes = kme_identities(sim.config());
  for (std::size_t i = 0; i < kmes.size(); ++i) {
    auto server = std::make_unique<EtsiHttpServer>(sim.kms(), mutex, hook);
    const int port = options.base_port + static_cast<int>(i);
    if (!server->bind(options.host, port)) {
      for (auto& s : servers) s->stop();
      for (auto& t : threads) t.join();
      throw ScenarioError(options.host + ":" + std::to_string(port),
                          "port must be free to serve this KME identity");
    }
    result.kme_ports[kmes[i]] = port;
    threads.emplace_back([raw = server.get()] { raw->listen_after_bind(); });
    // stop() is a no-op until the listener is up; without this wait a bind
    // failure on a later identity could try to roll back a server whose
    // thread has not reached accept() yet and then join() it forever.
    server->wait_until_ready();
    servers.push_back(std::move(server));
  }
  if (info) {
    for (const std::string& kme : kmes) {
      (*info) << kme << ": http://" << options.host << ":" << result.kme_ports[kme]
              << "/api/v1/keys/{sae_id}/{status|enc_keys|dec_keys}\n";
    }
  }

  using clock = std::chrono::steady_clock;
  const auto wall_start = clock::now();
  bool stopped = false;
  for (;;) {
    if (stop.load()) {
      stopped = true;
      break;
    }
    double t_next;
    {
      std::scoped_lock lock(mutex);
      if (!sim.has_pending()) break;
      t_next = sim.next_event_time();
    }
    const auto deadline =
        wall_start + std::chrono::duration_cast<clock::duration>(
                         std::chrono::duration<double>(t_next / options.time_scale));
    while (!stop.load()) {
      const auto now = clock::now();
      if (now >= deadline) break;
      std::this_thread::sleep_for(
          std::min<clock::duration>(deadline - now, std::chrono::milliseconds(20)));
    }
    if (stop.load()) {
      stopped = true;
      break;
    }
    std::scoped_lock lock(mutex);
    sim.process_next();
  }

  for (auto& s : servers) s->stop();
  for (auto& t : threads) t.join();

  {
    std::scoped_lock lock(mutex);
    result.output = sim.finish(stopped);
  }
  result.completed = !stopped;
  return result;
}

}  // namespace swqkd
