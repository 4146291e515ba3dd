#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <string>

#include "httplib.h"
#include "swqkd/kms.hpp"

namespace swqkd {

// Key-delivery REST endpoints over one shared store:
//   GET  /api/v1/keys/{slave_SAE_ID}/status
//   POST /api/v1/keys/{slave_SAE_ID}/enc_keys    {"number": n, "size": bits}
//   POST /api/v1/keys/{master_SAE_ID}/dec_keys   {"key_IDs": [{"key_ID": id}, ...]}
// Failures return {"message": ..., "details": [{"detail": ...}]} with 400 for
// malformed requests or unknown SAE ids and 503 when the store cannot satisfy
// the request; a failed request never mutates the store. Every handler runs
// under the supplied mutex, so one server (or several, one per KME identity)
// can front a store that a simulation thread is feeding.
class EtsiHttpServer {
 public:
  // op is "status", "enc_keys" or "dec_keys"; keys counts the records
  // returned. Called under the mutex after the store call completes.
  using RequestHook =
      std::function<void(const std::string& op, const std::string& sae_id, int http_status,
                         std::uint64_t keys)>;

  EtsiHttpServer(Kms& kms, std::mutex& mutex, RequestHook hook = {});

  bool listen(const std::string& host, int port);  // blocking
  bool bind(const std::string& host, int port);
  int bind_any(const std::string& host);           // ephemeral port, -1 on failure
  bool listen_after_bind();                        // blocking
  void stop();
  bool is_running() const { return server_.is_running(); }
  void wait_until_ready() { server_.wait_until_ready(); }

 private:
  void route();
  void finish(httplib::Response& res, const std::string& op, const std::string& sae_id,
              int status, std::uint64_t keys, const nlohmann::json& body);

  Kms& kms_;
  std::mutex& mutex_;
  RequestHook hook_;
  httplib::Server server_;
};

}  // namespace swqkd
