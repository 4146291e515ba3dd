#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace swqkd {

// 32-byte second-preimage-resistant digest (SHA-256 underneath).
using Digest = std::array<std::uint8_t, 32>;

// Incremental hasher; reusable via finish() which resets the context.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::span<const std::uint8_t> data);
  Sha256& update(std::string_view text);
  Sha256& update_u64(std::uint64_t value);  // little-endian
  Digest finish();

 private:
  void* ctx_;
};

Digest sha256(std::span<const std::uint8_t> data);

}  // namespace swqkd
