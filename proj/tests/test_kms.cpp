#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "swqkd/errors.hpp"
#include "swqkd/kms.hpp"
#include "swqkd/util.hpp"

using namespace swqkd;

namespace {

std::vector<SaeBinding> four_bindings() {
  std::vector<SaeBinding> out;
  int i = 1;
  for (LinkId link : all_links()) {
    SaeBinding b;
    b.master_sae_id = "M" + std::to_string(i);
    b.slave_sae_id = "S" + std::to_string(i);
    b.link = link;
    b.source_kme_id = "KME_SRC_" + std::to_string(i);
    b.target_kme_id = "KME_TGT_" + std::to_string(i);
    out.push_back(b);
    ++i;
  }
  return out;
}

Kms make_kms(std::uint64_t capacity = 200000, std::uint32_t max_per_request = 128) {
  KmsConfig cfg;
  cfg.key_size_bytes = 32;
  cfg.capacity_bytes = capacity;
  cfg.max_key_per_request = max_per_request;
  return Kms(cfg, four_bindings(), stream_for(1, "kms/uuid"));
}

std::vector<std::uint8_t> counted_bytes(std::size_t n, std::uint8_t start = 0) {
  std::vector<std::uint8_t> v(n);
  std::iota(v.begin(), v.end(), start);
  return v;
}

// Every counter identity that must hold after any operation sequence.
void check_conserved(const Kms& kms, LinkId link) {
  const BufferCounters& c = kms.counters(link);
  CHECK(c.keys_formed - c.keys_delivered - c.keys_discarded == kms.stored_key_count(link));
  CHECK(kms.level_bytes(link) == kms.stored_key_count(link) * kms.config().key_size_bytes);
  CHECK(kms.pending_bytes(link) < kms.config().key_size_bytes);
}

}  // namespace

TEST_CASE("construction rejects unusable configurations") {
  KmsConfig cfg;
  cfg.key_size_bytes = 0;
  cfg.capacity_bytes = 1000;
  CHECK_THROWS_AS(Kms(cfg, four_bindings(), stream_for(1, "u")), ParamError);
  cfg.key_size_bytes = 32;
  cfg.capacity_bytes = 31;
  CHECK_THROWS_AS(Kms(cfg, four_bindings(), stream_for(1, "u")), ParamError);
  cfg.capacity_bytes = 1000;
  cfg.max_key_per_request = 0;
  CHECK_THROWS_AS(Kms(cfg, four_bindings(), stream_for(1, "u")), ParamError);
}

TEST_CASE("material accumulates and quantizes into whole keys") {
  Kms kms = make_kms();
  CHECK(kms.push_material(LinkId::L1, counted_bytes(100)) == 3);
  CHECK(kms.stored_key_count(LinkId::L1) == 3);
  CHECK(kms.level_bytes(LinkId::L1) == 96);
  CHECK(kms.pending_bytes(LinkId::L1) == 4);
  CHECK(kms.counters(LinkId::L1).keys_formed == 3);

  // 4 pending + 28 new completes exactly one more key.
  CHECK(kms.push_material(LinkId::L1, counted_bytes(28, 100)) == 1);
  CHECK(kms.pending_bytes(LinkId::L1) == 0);
  CHECK(kms.stored_key_count(LinkId::L1) == 4);

  // Links are independent stores.
  CHECK(kms.stored_key_count(LinkId::L2) == 0);
  check_conserved(kms, LinkId::L1);
}

TEST_CASE("enc keys come out in FIFO order with the pushed material") {
  Kms kms = make_kms();
  std::vector<std::uint8_t> material = counted_bytes(96);
  kms.push_material(LinkId::L1, material);

  KeyContainer got = kms.get_enc_keys("S1", 2);
  REQUIRE(got.keys.size() == 2);
  CHECK(got.keys[0].material == std::vector<std::uint8_t>(material.begin(), material.begin() + 32));
  CHECK(got.keys[1].material ==
        std::vector<std::uint8_t>(material.begin() + 32, material.begin() + 64));
  CHECK(got.keys[0].key_id != got.keys[1].key_id);
  CHECK(got.keys[0].key_id.size() == 36);
  CHECK(got.keys[0].key_id[14] == '4');  // RFC 4122 version nibble
  CHECK(kms.stored_key_count(LinkId::L1) == 1);
  CHECK(kms.undelivered_count(LinkId::L1) == 2);
  CHECK(kms.counters(LinkId::L1).keys_delivered == 2);

  // The explicit default size is accepted; anything else is not.
  KeyContainer sized = kms.get_enc_keys("S1", 1, 256);
  CHECK(sized.keys.size() == 1);
  check_conserved(kms, LinkId::L1);
}

TEST_CASE("key ids are unique across a large formation run") {
  Kms kms = make_kms(400000);
  std::set<std::string> ids;
  kms.push_material(LinkId::L2, std::vector<std::uint8_t>(32 * 2048, 0xab));
  KeyContainer got = kms.get_enc_keys("S2", 128);
  for (int i = 0; i < 15; ++i) {
    for (const auto& k : got.keys) ids.insert(k.key_id);
    got = kms.get_enc_keys("S2", 128);
  }
  for (const auto& k : got.keys) ids.insert(k.key_id);
  CHECK(ids.size() == 16 * 128);
}

TEST_CASE("overflow drops the newest whole keys and counts them") {
  Kms kms = make_kms(128);  // room for 4 keys of 32 bytes
  std::vector<std::uint8_t> material = counted_bytes(200);
  CHECK(kms.push_material(LinkId::L3, material) == 4);  // 6 whole keys arrive, 2 dropped
  CHECK(kms.stored_key_count(LinkId::L3) == 4);
  CHECK(kms.level_bytes(LinkId::L3) == 128);
  CHECK(kms.pending_bytes(LinkId::L3) == 8);
  CHECK(kms.counters(LinkId::L3).keys_formed == 6);
  CHECK(kms.counters(LinkId::L3).keys_discarded == 2);

  // Survivors are the oldest four keys, in order.
  KeyContainer got = kms.get_enc_keys("S3", 4);
  for (int i = 0; i < 4; ++i)
    CHECK(got.keys[static_cast<std::size_t>(i)].material ==
          std::vector<std::uint8_t>(material.begin() + i * 32, material.begin() + (i + 1) * 32));
  check_conserved(kms, LinkId::L3);
}

TEST_CASE("enc request validation maps to the right statuses and is atomic") {
  Kms kms = make_kms(200000, 8);
  kms.push_material(LinkId::L1, counted_bytes(96));

  auto unchanged = [&] {
    CHECK(kms.stored_key_count(LinkId::L1) == 3);
    CHECK(kms.counters(LinkId::L1).keys_delivered == 0);
    CHECK(kms.undelivered_count(LinkId::L1) == 0);
  };

  try {
    kms.get_enc_keys("S1", 0);
    FAIL("expected ApiError");
  } catch (const ApiError& e) {
    CHECK(e.http_status() == 400);
    CHECK(e.message() == "number must be at least 1");
  }
  unchanged();

  try {
    kms.get_enc_keys("S1", 9);
    FAIL("expected ApiError");
  } catch (const ApiError& e) {
    CHECK(e.http_status() == 400);
    CHECK(e.message() == "number exceeds max_key_per_request");
    REQUIRE(e.details().size() == 1);
    CHECK(e.details()[0] == "8");
  }
  unchanged();

  try {
    kms.get_enc_keys("S1", 1, 128);
    FAIL("expected ApiError");
  } catch (const ApiError& e) {
    CHECK(e.http_status() == 400);
    CHECK(e.message() == "unsupported key size");
  }
  unchanged();

  try {
    kms.get_enc_keys("S1", 4);  // only 3 stored
    FAIL("expected ApiError");
  } catch (const ApiError& e) {
    CHECK(e.http_status() == 503);
    CHECK(e.message() == "insufficient keys available");
    REQUIRE(e.details().size() == 2);
    CHECK(e.details()[0] == "stored: 3");
    CHECK(e.details()[1] == "requested: 4");
  }
  unchanged();

  try {
    kms.get_enc_keys("NOBODY", 1);
    FAIL("expected ApiError");
  } catch (const ApiError& e) {
    CHECK(e.http_status() == 400);
    CHECK(e.message() == "unknown slave SAE ID");
  }
  unchanged();
}

TEST_CASE("dec keys redeem exactly once and fail atomically") {
  Kms kms = make_kms();
  kms.push_material(LinkId::L1, counted_bytes(96));
  KeyContainer enc = kms.get_enc_keys("S1", 2);
  const std::string id0 = enc.keys[0].key_id;
  const std::string id1 = enc.keys[1].key_id;

  // Unknown id mixed with a valid one: nothing is consumed.
  std::vector<std::string> mixed{id0, "not-a-key"};
  try {
    kms.get_dec_keys("M1", mixed);
    FAIL("expected ApiError");
  } catch (const ApiError& e) {
    CHECK(e.http_status() == 400);
    CHECK(e.message() == "unknown or already consumed key ID");
    REQUIRE(e.details().size() == 1);
    CHECK(e.details()[0] == "not-a-key");
  }
  CHECK(kms.undelivered_count(LinkId::L1) == 2);

  // The same id twice in one request is a consume-twice attempt.
  std::vector<std::string> dup{id0, id0};
  try {
    kms.get_dec_keys("M1", dup);
    FAIL("expected ApiError");
  } catch (const ApiError& e) {
    CHECK(e.http_status() == 400);
    REQUIRE(e.details().size() == 1);
    CHECK(e.details()[0] == id0);
  }
  CHECK(kms.undelivered_count(LinkId::L1) == 2);

  // Both ids redeem in one call, material matching the enc copies.
  std::vector<std::string> both{id0, id1};
  KeyContainer dec = kms.get_dec_keys("M1", both);
  REQUIRE(dec.keys.size() == 2);
  CHECK(dec.keys[0].key_id == id0);
  CHECK(dec.keys[0].material == enc.keys[0].material);
  CHECK(dec.keys[1].material == enc.keys[1].material);
  CHECK(kms.undelivered_count(LinkId::L1) == 0);

  // Second redemption fails.
  std::vector<std::string> again{id0};
  CHECK_THROWS_AS(kms.get_dec_keys("M1", again), ApiError);

  std::vector<std::string> empty;
  try {
    kms.get_dec_keys("M1", empty);
    FAIL("expected ApiError");
  } catch (const ApiError& e) {
    CHECK(e.http_status() == 400);
    CHECK(e.message() == "key_IDs must not be empty");
  }

  std::vector<std::string> any{id0};
  try {
    kms.get_dec_keys("NOBODY", any);
    FAIL("expected ApiError");
  } catch (const ApiError& e) {
    CHECK(e.http_status() == 400);
    CHECK(e.message() == "unknown master SAE ID");
  }
}

TEST_CASE("buffer status is bookkeeping only and gates no operation") {
  Kms kms = make_kms();
  CHECK(kms.buffer_status(LinkId::L1) == BufferStatus::Passive);  // initial
  kms.set_buffer_status(LinkId::L1, BufferStatus::Active);
  CHECK(kms.buffer_status(LinkId::L1) == BufferStatus::Active);
  kms.set_buffer_status(LinkId::L1, BufferStatus::Passive);

  kms.push_material(LinkId::L1, counted_bytes(64));
  CHECK(kms.stored_key_count(LinkId::L1) == 2);  // formation unaffected
  KeyContainer enc = kms.get_enc_keys("S1", 1);  // delivery unaffected
  std::vector<std::string> ids{enc.keys[0].key_id};
  CHECK(kms.get_dec_keys("M1", ids).keys.size() == 1);

  CHECK(to_string(BufferStatus::Active) == "active");
  CHECK(to_string(BufferStatus::Passive) == "passive");

  auto snap = kms.snapshot();
  CHECK(snap[0].level_bytes == 32);
  CHECK(snap[0].status == BufferStatus::Passive);
  CHECK(snap[1].level_bytes == 0);
}

TEST_CASE("status document carries the delivery-protocol field names") {
  Kms kms = make_kms(6400, 16);
  kms.push_material(LinkId::L2, counted_bytes(100));
  StatusDoc doc = kms.get_status("S2");
  CHECK(doc.source_kme_id == "KME_SRC_2");
  CHECK(doc.target_kme_id == "KME_TGT_2");
  CHECK(doc.master_sae_id == "M2");
  CHECK(doc.slave_sae_id == "S2");
  CHECK(doc.key_size_bits == 256);
  CHECK(doc.stored_key_count == 3);
  CHECK(doc.max_key_count == 200);
  CHECK(doc.max_key_per_request == 16);

  nlohmann::json j = doc.to_json();
  CHECK(j["source_KME_ID"] == "KME_SRC_2");
  CHECK(j["target_KME_ID"] == "KME_TGT_2");
  CHECK(j["master_SAE_ID"] == "M2");
  CHECK(j["slave_SAE_ID"] == "S2");
  CHECK(j["key_size"] == 256);
  CHECK(j["stored_key_count"] == 3);
  CHECK(j["max_key_count"] == 200);
  CHECK(j["max_key_per_request"] == 16);
  CHECK(j["max_key_size"] == 256);
  CHECK(j["min_key_size"] == 256);
  CHECK(j["max_SAE_ID_count"] == 0);

  CHECK_THROWS_AS(kms.get_status("NOBODY"), ApiError);
}

TEST_CASE("key container serialization round-trips through base64") {
  Kms kms = make_kms();
  std::vector<std::uint8_t> material = counted_bytes(32, 7);
  kms.push_material(LinkId::L4, material);
  KeyContainer c = kms.get_enc_keys("S4", 1);
  nlohmann::json j = c.to_json();
  REQUIRE(j["keys"].size() == 1);
  CHECK(j["keys"][0]["key_ID"] == c.keys[0].key_id);
  CHECK(base64_decode(j["keys"][0]["key"].get<std::string>()) == material);
}

TEST_CASE("binding lookup by link") {
  Kms kms = make_kms();
  CHECK(kms.binding_for_link(LinkId::L3).master_sae_id == "M3");
  CHECK(kms.binding_for_link(LinkId::L3).slave_sae_id == "S3");

  KmsConfig cfg;
  cfg.key_size_bytes = 32;
  cfg.capacity_bytes = 320;
  Kms partial(cfg, {four_bindings()[0]}, stream_for(2, "kms/uuid"));
  CHECK_THROWS_AS(partial.binding_for_link(LinkId::L2), StateError);
}

TEST_CASE("counter conservation survives a randomized operation storm") {
  Kms kms = make_kms(320, 4);  // tight capacity forces overflows
  RngStream rng = stream_for(42, "fuzz");
  std::vector<std::string> redeemable;  // ids enc-fetched on L1, not yet dec-fetched

  for (int op = 0; op < 3000; ++op) {
    switch (rng.next_below(4)) {
      case 0: {
        std::size_t n = static_cast<std::size_t>(rng.next_below(100));
        std::vector<std::uint8_t> mat(n);
        for (auto& b : mat) b = static_cast<std::uint8_t>(rng.next_u64());
        kms.push_material(LinkId::L1, mat);
        break;
      }
      case 1: {
        std::uint32_t n = 1 + static_cast<std::uint32_t>(rng.next_below(4));
        if (kms.stored_key_count(LinkId::L1) >= n) {
          for (auto& k : kms.get_enc_keys("S1", n).keys) redeemable.push_back(k.key_id);
        } else {
          CHECK_THROWS_AS(kms.get_enc_keys("S1", n), ApiError);
        }
        break;
      }
      case 2: {
        if (!redeemable.empty()) {
          std::size_t pick = static_cast<std::size_t>(rng.next_below(redeemable.size()));
          std::vector<std::string> ids{redeemable[pick]};
          KeyContainer dec = kms.get_dec_keys("M1", ids);
          CHECK(dec.keys.size() == 1);
          redeemable.erase(redeemable.begin() + static_cast<long>(pick));
        }
        break;
      }
      default:
        kms.set_buffer_status(LinkId::L1, rng.next_below(2) == 0 ? BufferStatus::Active
                                                                 : BufferStatus::Passive);
        break;
    }
    check_conserved(kms, LinkId::L1);
    CHECK(kms.undelivered_count(LinkId::L1) == redeemable.size());
    CHECK(kms.stored_key_count(LinkId::L1) <= 10);  // capacity 320 / 32
  }
  CHECK(kms.counters(LinkId::L1).keys_formed > 0);
  CHECK(kms.counters(LinkId::L1).keys_discarded > 0);
}
