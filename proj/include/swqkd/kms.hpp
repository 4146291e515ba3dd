#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "swqkd/domain.hpp"
#include "swqkd/rng.hpp"

namespace swqkd {

enum class BufferStatus { Active, Passive };

std::string_view to_string(BufferStatus status);

struct KeyRecord {
  std::string key_id;  // RFC 4122 text form
  std::vector<std::uint8_t> material;
};

struct SaeBinding {
  std::string master_sae_id;  // consumer application on the transmitter side
  std::string slave_sae_id;   // its peer on the receiver side
  LinkId link = LinkId::L1;
  std::string source_kme_id;
  std::string target_kme_id;
};

struct KmsConfig {
  std::size_t key_size_bytes = 32;
  std::uint64_t capacity_bytes = 0;  // whole-key capacity per buffer
  std::uint32_t max_key_per_request = 128;
};

struct BufferCounters {
  std::uint64_t keys_formed = 0;
  std::uint64_t keys_delivered = 0;   // fetched via enc_keys
  std::uint64_t keys_discarded = 0;   // overflow drops
};

struct StatusDoc {
  std::string source_kme_id, target_kme_id, master_sae_id, slave_sae_id;
  std::uint32_t key_size_bits = 0;
  std::uint64_t stored_key_count = 0;
  std::uint64_t max_key_count = 0;
  std::uint32_t max_key_per_request = 0;
  std::uint32_t max_key_size_bits = 0;
  std::uint32_t min_key_size_bits = 0;
  std::uint32_t max_sae_id_count = 0;

  nlohmann::json to_json() const;
};

struct KeyContainer {
  std::vector<KeyRecord> keys;

  nlohmann::json to_json() const;  // {"keys":[{"key_ID":..., "key": base64}]}
};

// Per-link key store serving both SAE roles of its link. Keys are formed
// from pushed material in FIFO order; enc_keys consumes from the front and
// parks (key_id, material) for the slave side, which dec_keys redeems
// exactly once. ACTIVE/PASSIVE gates nothing here: production gating is the
// producer's job, consumption is always allowed. All failures are atomic.
class Kms {
 public:
  Kms(KmsConfig config, std::vector<SaeBinding> bindings, RngStream uuid_rng);

  // Appends raw material; forms whole keys once key_size accumulates.
  // Whole keys beyond capacity are discarded (newest first) and counted.
  // Returns the number of keys formed and kept.
  std::uint64_t push_material(LinkId link, std::span<const std::uint8_t> material);

  StatusDoc get_status(const std::string& slave_sae_id) const;  // ApiError 400 on unknown SAE
  KeyContainer get_enc_keys(const std::string& slave_sae_id, std::uint32_t number,
                            std::uint32_t size_bits = 0);  // 0 = default size
  KeyContainer get_dec_keys(const std::string& master_sae_id,
                            std::span<const std::string> key_ids);

  void set_buffer_status(LinkId link, BufferStatus status);
  BufferStatus buffer_status(LinkId link) const;
  std::uint64_t level_bytes(LinkId link) const;
  std::uint64_t stored_key_count(LinkId link) const;
  const BufferCounters& counters(LinkId link) const;
  std::uint64_t pending_bytes(LinkId link) const;
  std::uint64_t undelivered_count(LinkId link) const;  // enc-fetched, not yet dec-fetched

  const KmsConfig& config() const { return config_; }
  const std::vector<SaeBinding>& bindings() const { return bindings_; }
  const SaeBinding& binding_for_link(LinkId link) const;

  struct BufferSnapshot {
    std::uint64_t level_bytes = 0;
    BufferStatus status = BufferStatus::Passive;
  };
  std::array<BufferSnapshot, 4> snapshot() const;

 private:
  struct LinkStore {
    std::deque<KeyRecord> queue;
    std::vector<std::uint8_t> pending;
    BufferStatus status = BufferStatus::Passive;
    BufferCounters counters;
    std::unordered_map<std::string, std::vector<std::uint8_t>> delivered;
  };

  const SaeBinding& binding_by_slave(const std::string& slave_sae_id) const;
  const SaeBinding& binding_by_master(const std::string& master_sae_id) const;
  LinkStore& store(LinkId link) { return stores_[link_index(link)]; }
  const LinkStore& store(LinkId link) const { return stores_[link_index(link)]; }
  std::uint64_t capacity_keys() const { return config_.capacity_bytes / config_.key_size_bytes; }

  KmsConfig config_;
  std::vector<SaeBinding> bindings_;
  std::array<LinkStore, 4> stores_;
  RngStream uuid_rng_;
};

}  // namespace swqkd
