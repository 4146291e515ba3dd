#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "swqkd/digest.hpp"
#include "swqkd/domain.hpp"
#include "swqkd/rng.hpp"

namespace swqkd {

// Repetition code: each secret bit spans `repetition` cells; decoding is a
// per-block majority vote, so up to floor(repetition/2) cell flips per block
// are corrected. `repetition` must be odd.
struct CodeParams {
  int repetition = 5;
  int key_bits = 256;

  std::size_t block_bits() const { return static_cast<std::size_t>(repetition) * key_bits; }
};

// Emulated SRAM power-up state: fixed reference bits plus i.i.d. per-cell
// flip noise on every read.
struct SramDevice {
  std::string device_id;
  std::size_t cell_count = 32768;
  double flip_probability = 0.02;
  std::uint64_t rng_seed = 0;
  std::vector<std::uint8_t> reference_bits;  // one byte per cell, values 0/1
};

SramDevice make_sram_device(std::string device_id, std::size_t cell_count,
                            double flip_probability, std::uint64_t seed);

struct Challenge {
  std::size_t offset = 0;  // cell window, in bits
  std::size_t length = 0;
  std::vector<std::uint8_t> nonce;  // 16 bytes; embeds an issue counter
};

// Verifier-side enrollment state. Holds only helper data and a one-way
// digest of the enrolled key; the raw key never appears here.
struct EnrollmentRecord {
  std::string device_id;
  std::size_t offset = 0;
  std::size_t length = 0;  // = code.block_bits()
  CodeParams code;
  std::vector<std::uint8_t> helper_data;  // one byte per bit
  Digest key_digest{};
};

// Table-driven model times, seconds. `verification_total` is authoritative
// for elapsed model time of one authentication; `device_interaction` is the
// device key-generation figure; the rest are reported metadata.
struct PufTimingProfile {
  double https_request = 12.9;
  double device_interaction = 7.0;
  double hashing = 0.002;
  double ssh_processes = 7.1;
  double verification_total = 27.0;
};

// Noisy window read. flip_probability 0 reproduces the reference slice
// exactly; 1 complements it. Deterministic given the stream state.
std::vector<std::uint8_t> power_up_read(const SramDevice& device, const Challenge& challenge,
                                        RngStream& rng);

// codeword(secret) XOR reference slice. Exposed separately so the helper
// construction is testable without sampling a secret.
std::vector<std::uint8_t> encode_helper(std::span<const std::uint8_t> reference_slice,
                                        std::span<const std::uint8_t> secret_bits, int repetition);

struct Enrollment {
  EnrollmentRecord record;
  std::vector<std::uint8_t> key;  // packed secret bits; retained device-side only
};

// Trusted enrollment over a noiseless read; samples `code.key_bits` secret
// bits from `rng`.
Enrollment enroll(const SramDevice& device, std::size_t offset, CodeParams code, RngStream& rng);

// Majority-vote recovery of the packed key from a noisy window read.
std::vector<std::uint8_t> recover(std::span<const std::uint8_t> noisy_bits,
                                  const EnrollmentRecord& record);

// Prover side of one session: noisy read, key recovery, proof digest.
// Proof = digest(digest(recovered_key) || nonce); the verifier can check it
// against digest(key_digest || nonce) without ever holding the raw key.
Digest prove(const SramDevice& device, const Challenge& challenge, const EnrollmentRecord& record,
             RngStream& rng);

Digest expected_proof(const Digest& key_digest, std::span<const std::uint8_t> nonce);

// Verifier: enrollment registry plus challenge issue/verify with nonce
// freshness. Nonces embed a strictly increasing counter; a nonce is accepted
// at most once and only while it is the newest outstanding challenge for its
// record (all flows here keep a single challenge outstanding per record).
class PufRegistrar {
 public:
  explicit PufRegistrar(std::uint64_t nonce_seed);

  void add_record(EnrollmentRecord record);
  bool has_record(const std::string& device_id) const;
  const EnrollmentRecord& record_of(const std::string& device_id) const;  // StateError if absent

  Challenge issue_challenge(const std::string& device_id);
  // Consumes the nonce; returns false on digest mismatch or stale/replayed nonce.
  bool verify_proof(const std::string& device_id, const Challenge& challenge, const Digest& proof);

  // One record per line: device_id offset length repetition key_bits
  // helper(hex, MSB-first packed) key_digest(hex). Versioned header line.
  void save(const std::string& path) const;
  static PufRegistrar load(const std::string& path, std::uint64_t nonce_seed);

  std::size_t record_count() const { return records_.size(); }

 private:
  std::map<std::string, EnrollmentRecord> records_;
  std::map<std::string, std::uint64_t> last_consumed_;  // per device: newest consumed counter
  std::uint64_t next_counter_ = 1;
  RngStream nonce_rng_;
};

struct AuthResult {
  enum class Outcome { Accepted, Rejected };

  Outcome outcome = Outcome::Rejected;
  // Recovered keys per direction, present iff Accepted.
  std::optional<std::vector<std::uint8_t>> session_key_a;
  std::optional<std::vector<std::uint8_t>> session_key_b;
  double elapsed_model_time = 0.0;
  std::vector<std::pair<std::string, double>> component_times;
  std::string failed_direction;  // "A-verifies-B" / "B-verifies-A", empty on accept

  bool accepted() const { return outcome == Outcome::Accepted; }
};

// Bidirectional authentication with independent fresh nonces. Direction
// A-verifies-B runs first; on rejection the failing direction is reported
// and no session keys are retained. With `bidirectional` false the reverse
// direction is skipped (key material for A is still recovered).
AuthResult mutual_authenticate(PufRegistrar& registrar, const SramDevice& a_device,
                               const SramDevice& b_device, RngStream& rng,
                               const PufTimingProfile& timing, bool bidirectional = true);

// digest(k_a || k_b || link || epoch), expanded and truncated to key_len
// bytes. Distinct per (link, epoch); StateError on empty key material.
std::vector<std::uint8_t> derive_link_auth_key(std::span<const std::uint8_t> k_a,
                                               std::span<const std::uint8_t> k_b, LinkId link,
                                               std::uint64_t epoch, std::size_t key_len);

inline double pba_key_generation_time(const PufTimingProfile& timing) {
  return timing.device_interaction;
}

}  // namespace swqkd
