#include "swqkd/http_api.hpp"

#include "swqkd/errors.hpp"

namespace swqkd {
namespace {

nlohmann::json error_body(const std::string& message, const std::vector<std::string>& details) {
  nlohmann::json body = {{"message", message}};
  if (!details.empty()) {
    nlohmann::json arr = nlohmann::json::array();
    for (const std::string& d : details) arr.push_back({{"detail", d}});
    body["details"] = arr;
  }
  return body;
}

}  // namespace

EtsiHttpServer::EtsiHttpServer(Kms& kms, std::mutex& mutex, RequestHook hook)
    : kms_(kms), mutex_(mutex), hook_(std::move(hook)) {
  // SO_REUSEADDR only: each KME identity must own its port exclusively, so a
  // port already claimed elsewhere has to fail the bind instead of silently
  // load-sharing through SO_REUSEPORT (httplib's default on Linux).
  server_.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  route();
}

void EtsiHttpServer::finish(httplib::Response& res, const std::string& op,
                            const std::string& sae_id, int status, std::uint64_t keys,
                            const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
  if (hook_) hook_(op, sae_id, status, keys);
}

void EtsiHttpServer::route() {
  server_.Get(R"(/api/v1/keys/([^/]+)/status)",
              [this](const httplib::Request& req, httplib::Response& res) {
                const std::string sae = req.matches[1];
                std::scoped_lock lock(mutex_);
                try {
                  StatusDoc doc = kms_.get_status(sae);
                  finish(res, "status", sae, 200, 0, doc.to_json());
                } catch (const ApiError& e) {
                  finish(res, "status", sae, e.http_status(), 0,
                         error_body(e.message(), e.details()));
                }
              });

  server_.Post(R"(/api/v1/keys/([^/]+)/enc_keys)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 const std::string sae = req.matches[1];
                 std::scoped_lock lock(mutex_);
                 nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
                 if (body.is_discarded() || !body.is_object()) {
                   finish(res, "enc_keys", sae, 400, 0,
                          error_body("request body must be a JSON object", {}));
                   return;
                 }
                 std::uint32_t number = 1;
                 std::uint32_t size_bits = 0;
                 if (body.contains("number")) {
                   if (!body["number"].is_number_unsigned()) {
                     finish(res, "enc_keys", sae, 400, 0,
                            error_body("number must be a non-negative integer", {}));
                     return;
                   }
                   number = body["number"].get<std::uint32_t>();
                 }
                 if (body.contains("size")) {
                   if (!body["size"].is_number_unsigned()) {
                     finish(res, "enc_keys", sae, 400, 0,
                            error_body("size must be a non-negative integer", {}));
                     return;
                   }
                   size_bits = body["size"].get<std::uint32_t>();
                 }
                 try {
                   KeyContainer keys = kms_.get_enc_keys(sae, number, size_bits);
                   finish(res, "enc_keys", sae, 200, keys.keys.size(), keys.to_json());
                 } catch (const ApiError& e) {
                   finish(res, "enc_keys", sae, e.http_status(), 0,
                          error_body(e.message(), e.details()));
                 }
               });

  server_.Post(R"(/api/v1/keys/([^/]+)/dec_keys)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 const std::string sae = req.matches[1];
                 std::scoped_lock lock(mutex_);
                 nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
                 if (body.is_discarded() || !body.is_object() || !body.contains("key_IDs") ||
                     !body["key_IDs"].is_array()) {
                   finish(res, "dec_keys", sae, 400, 0,
                          error_body("request body must carry a key_IDs array", {}));
                   return;
                 }
                 std::vector<std::string> ids;
                 for (const nlohmann::json& entry : body["key_IDs"]) {
                   if (!entry.is_object() || !entry.contains("key_ID") ||
                       !entry["key_ID"].is_string()) {
                     finish(res, "dec_keys", sae, 400, 0,
                            error_body("key_IDs entries must be {\"key_ID\": string}", {}));
                     return;
                   }
                   ids.push_back(entry["key_ID"].get<std::string>());
                 }
                 try {
                   KeyContainer keys = kms_.get_dec_keys(sae, ids);
                   finish(res, "dec_keys", sae, 200, keys.keys.size(), keys.to_json());
                 } catch (const ApiError& e) {
                   finish(res, "dec_keys", sae, e.http_status(), 0,
                          error_body(e.message(), e.details()));
                 }
               });
}

bool EtsiHttpServer::listen(const std::string& host, int port) {
  return server_.listen(host, port);
}

bool EtsiHttpServer::bind(const std::string& host, int port) {
  return server_.bind_to_port(host, port);
}

int EtsiHttpServer::bind_any(const std::string& host) {
  return server_.bind_to_any_port(host);
}

bool EtsiHttpServer::listen_after_bind() { return server_.listen_after_bind(); }

void EtsiHttpServer::stop() { server_.stop(); }

}  // namespace swqkd
