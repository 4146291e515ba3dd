#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace swqkd {

// SplitMix64 step; used for seeding and label mixing.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// FNV-1a over the label; stable stream addressing.
inline std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// xoshiro256**. Draws are identical across platforms for a given seed, which
// std::mt19937 + standard distributions do not guarantee. One stream per
// logical actor keeps event interleaving from perturbing unrelated draws.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : state_) w = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Uniform in [-spread, +spread].
  double next_symmetric(double spread) { return next_uniform(-spread, spread); }

  bool next_bernoulli(double p) { return next_unit() < p; }

  std::uint64_t next_below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::array<std::uint64_t, 4> state_{};
};

// Label-addressed child stream: adding a new stream label never shifts the
// draws of existing ones, so extending the model keeps old runs reproducible.
inline RngStream stream_for(std::uint64_t master_seed, std::string_view label) {
  std::uint64_t s = master_seed ^ hash_label(label);
  splitmix64(s);
  return RngStream(s);
}

}  // namespace swqkd
