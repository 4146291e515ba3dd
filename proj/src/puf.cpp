#include "swqkd/puf.hpp"

#include <fstream>
#include <sstream>

#include "swqkd/errors.hpp"
#include "swqkd/util.hpp"

namespace swqkd {

namespace {

void check_code(const CodeParams& code) {
  if (code.repetition < 1 || code.repetition % 2 == 0)
    throw ParamError("repetition must be a positive odd integer");
  if (code.key_bits < 1) throw ParamError("key_bits must be positive");
}

void check_window(const SramDevice& device, std::size_t offset, std::size_t length) {
  if (length == 0) throw ParamError("challenge window is empty");
  if (offset + length > device.cell_count)
    throw ParamError("challenge window exceeds device cell count");
}

std::uint64_t nonce_counter(std::span<const std::uint8_t> nonce) {
  if (nonce.size() != 16) throw ParamError("nonce must be 16 bytes");
  std::uint64_t c = 0;
  for (int i = 0; i < 8; ++i) c = (c << 8) | nonce[i];
  return c;
}

}  // namespace

SramDevice make_sram_device(std::string device_id, std::size_t cell_count,
                            double flip_probability, std::uint64_t seed) {
  if (cell_count == 0) throw ParamError("cell_count must be positive");
  if (flip_probability < 0.0 || flip_probability > 1.0)
    throw ParamError("flip_probability must lie in [0, 1]");
  SramDevice device;
  device.device_id = std::move(device_id);
  device.cell_count = cell_count;
  device.flip_probability = flip_probability;
  device.rng_seed = seed;
  device.reference_bits.resize(cell_count);
  RngStream ref(seed);
  std::size_t i = 0;
  while (i < cell_count) {
    std::uint64_t w = ref.next_u64();
    for (int b = 0; b < 64 && i < cell_count; ++b, ++i)
      device.reference_bits[i] = static_cast<std::uint8_t>((w >> b) & 1u);
  }
  return device;
}

std::vector<std::uint8_t> power_up_read(const SramDevice& device, const Challenge& challenge,
                                        RngStream& rng) {
  check_window(device, challenge.offset, challenge.length);
  std::vector<std::uint8_t> out(challenge.length);
  const double p = device.flip_probability;
  for (std::size_t i = 0; i < challenge.length; ++i) {
    std::uint8_t bit = device.reference_bits[challenge.offset + i];
    out[i] = rng.next_bernoulli(p) ? static_cast<std::uint8_t>(1u - bit) : bit;
  }
  return out;
}

std::vector<std::uint8_t> encode_helper(std::span<const std::uint8_t> reference_slice,
                                        std::span<const std::uint8_t> secret_bits,
                                        int repetition) {
  if (repetition < 1 || repetition % 2 == 0)
    throw ParamError("repetition must be a positive odd integer");
  if (reference_slice.size() != secret_bits.size() * static_cast<std::size_t>(repetition))
    throw ParamError("reference slice length must equal key_bits * repetition");
  std::vector<std::uint8_t> helper(reference_slice.size());
  for (std::size_t i = 0; i < secret_bits.size(); ++i)
    for (int j = 0; j < repetition; ++j) {
      std::size_t pos = i * repetition + j;
      helper[pos] = secret_bits[i] ^ reference_slice[pos];
    }
  return helper;
}

Enrollment enroll(const SramDevice& device, std::size_t offset, CodeParams code, RngStream& rng) {
  check_code(code);
  const std::size_t length = code.block_bits();
  check_window(device, offset, length);

  std::vector<std::uint8_t> secret(code.key_bits);
  for (auto& bit : secret) bit = static_cast<std::uint8_t>(rng.next_u64() >> 63);

  std::span<const std::uint8_t> slice(device.reference_bits.data() + offset, length);
  Enrollment out;
  out.record.device_id = device.device_id;
  out.record.offset = offset;
  out.record.length = length;
  out.record.code = code;
  out.record.helper_data = encode_helper(slice, secret, code.repetition);
  out.key = pack_bits(secret);
  out.record.key_digest = sha256(out.key);
  return out;
}

std::vector<std::uint8_t> recover(std::span<const std::uint8_t> noisy_bits,
                                  const EnrollmentRecord& record) {
  if (noisy_bits.size() != record.length)
    throw ParamError("response length does not match enrollment window");
  const int r = record.code.repetition;
  std::vector<std::uint8_t> secret(record.code.key_bits);
  for (int i = 0; i < record.code.key_bits; ++i) {
    int ones = 0;
    for (int j = 0; j < r; ++j) {
      std::size_t pos = static_cast<std::size_t>(i) * r + j;
      ones += (noisy_bits[pos] ^ record.helper_data[pos]) & 1u;
    }
    secret[i] = ones * 2 > r ? 1 : 0;
  }
  return pack_bits(secret);
}

Digest prove(const SramDevice& device, const Challenge& challenge, const EnrollmentRecord& record,
             RngStream& rng) {
  std::vector<std::uint8_t> response = power_up_read(device, challenge, rng);
  std::vector<std::uint8_t> key = recover(response, record);
  Digest key_digest = sha256(key);
  return expected_proof(key_digest, challenge.nonce);
}

Digest expected_proof(const Digest& key_digest, std::span<const std::uint8_t> nonce) {
  Sha256 h;
  h.update(key_digest);
  h.update(nonce);
  return h.finish();
}

PufRegistrar::PufRegistrar(std::uint64_t nonce_seed) : nonce_rng_(nonce_seed) {}

void PufRegistrar::add_record(EnrollmentRecord record) {
  records_[record.device_id] = std::move(record);
}

bool PufRegistrar::has_record(const std::string& device_id) const {
  return records_.count(device_id) > 0;
}

const EnrollmentRecord& PufRegistrar::record_of(const std::string& device_id) const {
  auto it = records_.find(device_id);
  if (it == records_.end()) throw StateError("no enrollment record for device " + device_id);
  return it->second;
}

Challenge PufRegistrar::issue_challenge(const std::string& device_id) {
  const EnrollmentRecord& record = record_of(device_id);
  Challenge c;
  c.offset = record.offset;
  c.length = record.length;
  c.nonce.resize(16);
  std::uint64_t counter = next_counter_++;
  for (int i = 0; i < 8; ++i)
    c.nonce[i] = static_cast<std::uint8_t>(counter >> (8 * (7 - i)));
  std::uint64_t salt = nonce_rng_.next_u64();
  for (int i = 0; i < 8; ++i)
    c.nonce[8 + i] = static_cast<std::uint8_t>(salt >> (8 * i));
  return c;
}

bool PufRegistrar::verify_proof(const std::string& device_id, const Challenge& challenge,
                                const Digest& proof) {
  const EnrollmentRecord& record = record_of(device_id);
  std::uint64_t counter = nonce_counter(challenge.nonce);
  if (counter >= next_counter_) return false;  // never issued
  auto it = last_consumed_.find(device_id);
  if (it != last_consumed_.end() && counter <= it->second) return false;  // replay
  last_consumed_[device_id] = counter;  // challenge is spent whether or not the proof matches
  return proof == expected_proof(record.key_digest, challenge.nonce);
}

void PufRegistrar::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw StateError("cannot write registry file: " + path);
  out << "# swqkd enrollment registry v1\n";
  out << "# device_id offset length repetition key_bits helper_hex key_digest_hex\n";
  for (const auto& [id, rec] : records_) {
    out << id << ' ' << rec.offset << ' ' << rec.length << ' ' << rec.code.repetition << ' '
        << rec.code.key_bits << ' ' << hex_encode(pack_bits(rec.helper_data)) << ' '
        << hex_encode(rec.key_digest) << '\n';
  }
}

PufRegistrar PufRegistrar::load(const std::string& path, std::uint64_t nonce_seed) {
  std::ifstream in(path);
  if (!in) throw StateError("cannot read registry file: " + path);
  std::string header;
  std::getline(in, header);
  if (header != "# swqkd enrollment registry v1")
    throw StateError("unrecognized registry header: " + header);
  PufRegistrar reg(nonce_seed);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    EnrollmentRecord rec;
    std::string helper_hex, digest_hex;
    if (!(ls >> rec.device_id >> rec.offset >> rec.length >> rec.code.repetition >>
          rec.code.key_bits >> helper_hex >> digest_hex))
      throw StateError("malformed registry line: " + line);
    rec.helper_data = unpack_bits(hex_decode(helper_hex), rec.length);
    auto digest_bytes = hex_decode(digest_hex);
    if (digest_bytes.size() != rec.key_digest.size())
      throw StateError("malformed key digest in registry line: " + line);
    std::copy(digest_bytes.begin(), digest_bytes.end(), rec.key_digest.begin());
    reg.add_record(std::move(rec));
  }
  return reg;
}

namespace {

// One prove/verify direction against `device`; returns the recovered key so
// the caller can retain it as session material on acceptance.
bool run_direction(PufRegistrar& registrar, const SramDevice& device, RngStream& rng,
                   std::vector<std::uint8_t>& key_out) {
  Challenge challenge = registrar.issue_challenge(device.device_id);
  std::vector<std::uint8_t> response = power_up_read(device, challenge, rng);
  const EnrollmentRecord& record = registrar.record_of(device.device_id);
  key_out = recover(response, record);
  Digest proof = expected_proof(sha256(key_out), challenge.nonce);
  return registrar.verify_proof(device.device_id, challenge, proof);
}

}  // namespace

AuthResult mutual_authenticate(PufRegistrar& registrar, const SramDevice& a_device,
                               const SramDevice& b_device, RngStream& rng,
                               const PufTimingProfile& timing, bool bidirectional) {
  AuthResult result;
  result.elapsed_model_time = timing.verification_total;
  result.component_times = {
      {"https_request", timing.https_request},
      {"device_interaction", timing.device_interaction},
      {"hashing", timing.hashing},
      {"ssh_processes", timing.ssh_processes},
      {"verification_total", timing.verification_total},
  };

  std::vector<std::uint8_t> k_b;
  if (!run_direction(registrar, b_device, rng, k_b)) {
    result.failed_direction = "A-verifies-B";
    return result;
  }

  std::vector<std::uint8_t> k_a;
  if (bidirectional) {
    if (!run_direction(registrar, a_device, rng, k_a)) {
      result.failed_direction = "B-verifies-A";
      return result;
    }
  } else {
    // Reverse direction disabled: still recover A's key material for
    // derivation, without a verification round.
    Challenge challenge = registrar.issue_challenge(a_device.device_id);
    std::vector<std::uint8_t> response = power_up_read(a_device, challenge, rng);
    k_a = recover(response, registrar.record_of(a_device.device_id));
  }

  result.outcome = AuthResult::Outcome::Accepted;
  result.session_key_a = std::move(k_a);
  result.session_key_b = std::move(k_b);
  return result;
}

std::vector<std::uint8_t> derive_link_auth_key(std::span<const std::uint8_t> k_a,
                                               std::span<const std::uint8_t> k_b, LinkId link,
                                               std::uint64_t epoch, std::size_t key_len) {
  if (k_a.empty() || k_b.empty()) throw StateError("missing session key material");
  if (key_len == 0) throw ParamError("key_len must be positive");
  std::vector<std::uint8_t> out;
  out.reserve(key_len);
  std::uint64_t block = 0;
  Sha256 h;
  while (out.size() < key_len) {
    h.update(k_a);
    h.update(k_b);
    h.update(to_string(link));
    h.update_u64(epoch);
    h.update_u64(block++);
    Digest d = h.finish();
    for (std::uint8_t byte : d) {
      if (out.size() == key_len) break;
      out.push_back(byte);
    }
  }
  return out;
}

}  // namespace swqkd
