#include "swqkd/kms.hpp"

#include <unordered_set>

#include "swqkd/errors.hpp"
#include "swqkd/util.hpp"

namespace swqkd {

std::string_view to_string(BufferStatus status) {
  return status == BufferStatus::Active ? "active" : "passive";
}

nlohmann::json StatusDoc::to_json() const {
  return nlohmann::json{
      {"source_KME_ID", source_kme_id},
      {"target_KME_ID", target_kme_id},
      {"master_SAE_ID", master_sae_id},
      {"slave_SAE_ID", slave_sae_id},
      {"key_size", key_size_bits},
      {"stored_key_count", stored_key_count},
      {"max_key_count", max_key_count},
      {"max_key_per_request", max_key_per_request},
      {"max_key_size", max_key_size_bits},
      {"min_key_size", min_key_size_bits},
      {"max_SAE_ID_count", max_sae_id_count},
  };
}

nlohmann::json KeyContainer::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& k : keys)
    arr.push_back({{"key_ID", k.key_id}, {"key", base64_encode(k.material)}});
  return nlohmann::json{{"keys", arr}};
}

Kms::Kms(KmsConfig config, std::vector<SaeBinding> bindings, RngStream uuid_rng)
    : config_(config), bindings_(std::move(bindings)), uuid_rng_(uuid_rng) {
  if (config_.key_size_bytes == 0) throw ParamError("key_size_bytes must be positive");
  if (config_.capacity_bytes < config_.key_size_bytes)
    throw ParamError("capacity_bytes must hold at least one key");
  if (config_.max_key_per_request == 0) throw ParamError("max_key_per_request must be positive");
}

const SaeBinding& Kms::binding_by_slave(const std::string& slave_sae_id) const {
  for (const auto& b : bindings_)
    if (b.slave_sae_id == slave_sae_id) return b;
  throw ApiError(400, "unknown slave SAE ID", {slave_sae_id});
}

const SaeBinding& Kms::binding_by_master(const std::string& master_sae_id) const {
  for (const auto& b : bindings_)
    if (b.master_sae_id == master_sae_id) return b;
  throw ApiError(400, "unknown master SAE ID", {master_sae_id});
}

const SaeBinding& Kms::binding_for_link(LinkId link) const {
  for (const auto& b : bindings_)
    if (b.link == link) return b;
  throw StateError("no SAE binding for link " + std::string(to_string(link)));
}

std::uint64_t Kms::push_material(LinkId link, std::span<const std::uint8_t> material) {
  LinkStore& s = store(link);
  s.pending.insert(s.pending.end(), material.begin(), material.end());
  std::uint64_t formed = 0;
  while (s.pending.size() >= config_.key_size_bytes) {
    std::vector<std::uint8_t> mat(s.pending.begin(),
                                  s.pending.begin() + static_cast<long>(config_.key_size_bytes));
    s.pending.erase(s.pending.begin(), s.pending.begin() + static_cast<long>(config_.key_size_bytes));
    if (s.queue.size() < capacity_keys()) {
      s.queue.push_back(KeyRecord{uuid_from(uuid_rng_), std::move(mat)});
      ++s.counters.keys_formed;
      ++formed;
    } else {
      // Newest material is the overflow victim; established keys keep their ids.
      ++s.counters.keys_formed;
      ++s.counters.keys_discarded;
    }
  }
  return formed;
}

StatusDoc Kms::get_status(const std::string& slave_sae_id) const {
  const SaeBinding& b = binding_by_slave(slave_sae_id);
  const LinkStore& s = store(b.link);
  StatusDoc doc;
  doc.source_kme_id = b.source_kme_id;
  doc.target_kme_id = b.target_kme_id;
  doc.master_sae_id = b.master_sae_id;
  doc.slave_sae_id = b.slave_sae_id;
  doc.key_size_bits = static_cast<std::uint32_t>(config_.key_size_bytes * 8);
  doc.stored_key_count = s.queue.size();
  doc.max_key_count = capacity_keys();
  doc.max_key_per_request = config_.max_key_per_request;
  doc.max_key_size_bits = doc.key_size_bits;
  doc.min_key_size_bits = doc.key_size_bits;
  doc.max_sae_id_count = 0;
  return doc;
}

KeyContainer Kms::get_enc_keys(const std::string& slave_sae_id, std::uint32_t number,
                               std::uint32_t size_bits) {
  const SaeBinding& b = binding_by_slave(slave_sae_id);
  if (number == 0) throw ApiError(400, "number must be at least 1");
  if (number > config_.max_key_per_request)
    throw ApiError(400, "number exceeds max_key_per_request",
                   {std::to_string(config_.max_key_per_request)});
  const std::uint32_t default_bits = static_cast<std::uint32_t>(config_.key_size_bytes * 8);
  if (size_bits != 0 && size_bits != default_bits)
    throw ApiError(400, "unsupported key size",
                   {"supported: " + std::to_string(default_bits) + " bits"});

  LinkStore& s = store(b.link);
  if (s.queue.size() < number)
    throw ApiError(503, "insufficient keys available",
                   {"stored: " + std::to_string(s.queue.size()),
                    "requested: " + std::to_string(number)});

  KeyContainer out;
  out.keys.reserve(number);
  for (std::uint32_t i = 0; i < number; ++i) {
    KeyRecord rec = std::move(s.queue.front());
    s.queue.pop_front();
    s.delivered.emplace(rec.key_id, rec.material);
    ++s.counters.keys_delivered;
    out.keys.push_back(std::move(rec));
  }
  return out;
}

KeyContainer Kms::get_dec_keys(const std::string& master_sae_id,
                               std::span<const std::string> key_ids) {
  const SaeBinding& b = binding_by_master(master_sae_id);
  if (key_ids.empty()) throw ApiError(400, "key_IDs must not be empty");
  LinkStore& s = store(b.link);

  // Validate everything first so a failed request leaves no trace. A repeat
  // of an id within one request is a consume-twice attempt.
  std::vector<std::string> missing;
  std::unordered_set<std::string> seen;
  for (const auto& id : key_ids)
    if (s.delivered.find(id) == s.delivered.end() || !seen.insert(id).second)
      missing.push_back(id);
  if (!missing.empty()) throw ApiError(400, "unknown or already consumed key ID", missing);

  KeyContainer out;
  out.keys.reserve(key_ids.size());
  for (const auto& id : key_ids) {
    auto it = s.delivered.find(id);
    out.keys.push_back(KeyRecord{id, std::move(it->second)});
    s.delivered.erase(it);
  }
  return out;
}

void Kms::set_buffer_status(LinkId link, BufferStatus status) { store(link).status = status; }

BufferStatus Kms::buffer_status(LinkId link) const { return store(link).status; }

std::uint64_t Kms::level_bytes(LinkId link) const {
  return store(link).queue.size() * config_.key_size_bytes;
}

std::uint64_t Kms::stored_key_count(LinkId link) const { return store(link).queue.size(); }

const BufferCounters& Kms::counters(LinkId link) const { return store(link).counters; }

std::uint64_t Kms::pending_bytes(LinkId link) const { return store(link).pending.size(); }

std::uint64_t Kms::undelivered_count(LinkId link) const { return store(link).delivered.size(); }

std::array<Kms::BufferSnapshot, 4> Kms::snapshot() const {
  std::array<BufferSnapshot, 4> out;
  for (LinkId link : all_links())
    out[link_index(link)] = {level_bytes(link), buffer_status(link)};
  return out;
}

}  // namespace swqkd
