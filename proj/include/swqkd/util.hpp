#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "swqkd/rng.hpp"

namespace swqkd {

std::string hex_encode(std::span<const std::uint8_t> data);
std::vector<std::uint8_t> hex_decode(std::string_view hex);  // throws ParamError

std::string base64_encode(std::span<const std::uint8_t> data);
std::vector<std::uint8_t> base64_decode(std::string_view text);  // throws ParamError

// Bits are carried as one byte per bit (values 0/1). Packing is MSB-first;
// a trailing partial byte is zero-padded on the right.
std::vector<std::uint8_t> pack_bits(std::span<const std::uint8_t> bits);
std::vector<std::uint8_t> unpack_bits(std::span<const std::uint8_t> bytes, std::size_t bit_count);

// Lowercase RFC 4122 text form, version/variant bits set, remaining bits
// drawn from the stream. Deterministic given the stream state.
std::string uuid_from(RngStream& rng);

// Shortest round-trip decimal form (std::to_chars); stable across runs.
std::string format_double(double value);

std::vector<std::uint8_t> to_bytes(std::string_view text);

}  // namespace swqkd
