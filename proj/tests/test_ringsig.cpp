/*
 * Copyright 2026 The wmnsec Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "wmn/ringsig.hpp"

namespace wmn {
namespace {

// p = 23, q = 11, g = 2 and x_A = 7, so y_A = 2^7 mod 23 = 13.
const GroupParams kFixture{23, 11, 2, 5};

UserKeyMaterial fixture_user() { return {kFixture, 7, 13, "fixture"}; }

struct Ring {
  std::vector<UserKeyMaterial> users;
  std::vector<UserPublicKey> pub;
};

Ring make_ring(std::size_t n, std::size_t bits, Prg& rng, const std::string& tag = "r") {
  Ring r;
  for (std::size_t i = 0; i < n; ++i) {
    const GroupParams gp = gen_group_params(bits, tag + std::to_string(i));
    r.users.push_back(UserKeyMaterial::generate("user-" + std::to_string(i), gp, rng));
    r.pub.push_back(r.users.back().public_view());
  }
  return r;
}

Digest message(std::uint64_t i) { return Hasher().part(std::string_view("msg")).part(i).finish(); }

TEST(Trapdoor, FixtureKeyIsConsistent) {
  EXPECT_TRUE(fixture_user().validate().ok);
  EXPECT_EQ(mod_exp(2, 7, 23), 13);
}

TEST(Trapdoor, FixturePreimageUnderForcedNonce) {
  // Independent hand computation with K = 3: t = 8, e = 24 mod 11 = 2,
  // alpha = 5 * 2^-2 mod 23 = 7, beta = (24 - 7 * 7) mod 11 = 8.
  const auto pre = detail::trapdoor_invert_with_nonce(fixture_user(), 5, 3);
  EXPECT_EQ(pre.alpha, 7);
  EXPECT_EQ(pre.beta, 8);
  EXPECT_EQ(trapdoor_eval(fixture_user().public_view(), pre), 5);
}

TEST(Trapdoor, EvalIdentities) {
  const auto pub = fixture_user().public_view();
  EXPECT_EQ(trapdoor_eval(pub, {1, 0}), 13);
  for (int a = 1; a < 23; ++a) {
    for (int b = 0; b < 11; ++b) {
      EXPECT_EQ(trapdoor_eval(pub, {a, b}), trapdoor_eval(pub, {a, b + 11}));
    }
  }
  EXPECT_THROW(trapdoor_eval(pub, {23, 0}), ParameterError);
  EXPECT_THROW(trapdoor_eval(pub, {0, 0}), ParameterError);
}

TEST(Trapdoor, FixtureInvertsEveryTarget) {
  for (int y = 1; y < 23; ++y) {
    for (int K = 1; K < 11; ++K) {
      EXPECT_EQ(trapdoor_eval(fixture_user().public_view(), detail::trapdoor_invert_with_nonce(fixture_user(), y, K)), y);
    }
  }
  Prg rng(1, "t");
  EXPECT_THROW(trapdoor_invert(fixture_user(), 0, rng), ParameterError);
  EXPECT_THROW(trapdoor_invert(fixture_user(), 23, rng), ParameterError);
}

class TrapdoorSizes : public ::testing::TestWithParam<std::size_t> {};

TEST_P(TrapdoorSizes, RoundTrip) {
  Prg rng(GetParam(), "trapdoor-roundtrip");
  const GroupParams gp = gen_group_params(GetParam(), "trapdoor");
  const auto user = UserKeyMaterial::generate("u", gp, rng);
  for (int i = 0; i < 1000; ++i) {
    const BigInt y = rng.uniform(BigInt(1), gp.p);
    const auto pre = trapdoor_invert(user, y, rng);
    ASSERT_GT(pre.alpha, 0);
    ASSERT_LT(pre.alpha, gp.p);
    ASSERT_GE(pre.beta, 0);
    ASSERT_LT(pre.beta, gp.q);
    ASSERT_EQ(trapdoor_eval(user.public_view(), pre), y);
  }
}

TEST_P(TrapdoorSizes, RandomizedPreimages) {
  Prg rng(GetParam() + 1, "trapdoor-random");
  const GroupParams gp = gen_group_params(GetParam(), "trapdoor");
  const auto user = UserKeyMaterial::generate("u", gp, rng);
  const BigInt y = rng.uniform(BigInt(1), gp.p);
  const auto a = trapdoor_invert(user, y, rng);
  const auto b = trapdoor_invert(user, y, rng);
  EXPECT_NE(a, b);
  EXPECT_EQ(trapdoor_eval(user.public_view(), a), trapdoor_eval(user.public_view(), b));
}

INSTANTIATE_TEST_SUITE_P(Bits, TrapdoorSizes, ::testing::Values(16, 32, 64));

TEST(Combine, Definitions) {
  const Digest k = message(1);
  const BitString v(16, 0x1234), y(16, 0xbeef);
  EXPECT_EQ(combine(k, v, {}), v);
  EXPECT_EQ(combine(k, v, {y}), permute_forward(k, y ^ v));
  EXPECT_THROW(combine(k, v, {BitString(8, 1)}), ParameterError);
}

TEST(Combine, SingleSlotBijectiveAtWidth8) {
  Prg rng(2, "combine");
  for (int trial = 0; trial < 20; ++trial) {
    const Digest k = message(rng.next_u64());
    const BitString v(8, rng.uniform(0, 256));
    std::vector<BitString> ys;
    for (int t = 0; t < 4; ++t) ys.emplace_back(8, rng.uniform(0, 256));
    const std::size_t j = rng.uniform(0, 4);
    std::set<BigInt> outs;
    for (int x = 0; x < 256; ++x) {
      ys[j] = BitString(8, x);
      outs.insert(combine(k, v, ys).value());
    }
    EXPECT_EQ(outs.size(), 256u);
  }
}

TEST(SolveRing, ClosesTheEquation) {
  Prg rng(3, "solve");
  for (int i = 0; i < 1000; ++i) {
    const std::size_t width = 8 + 2 * rng.uniform(0, 30);
    const Digest k = message(rng.next_u64());
    const BitString v(width, rng.uniform(BigInt(0), BigInt(1) << width));
    std::vector<BitString> others;
    const std::size_t n = rng.uniform(0, 6);
    for (std::size_t t = 0; t < n; ++t) others.emplace_back(width, rng.uniform(BigInt(0), BigInt(1) << width));
    const std::size_t idx = rng.uniform(0, n + 1);
    const BitString y = solve_ring(k, v, others, idx);
    auto full = others;
    full.insert(full.begin() + static_cast<std::ptrdiff_t>(idx), y);
    ASSERT_EQ(combine(k, v, full), v);
  }
}

TEST(SolveRing, SingleMemberClosedForm) {
  const Digest k = message(7);
  const BitString v(16, 0x5a5a);
  EXPECT_EQ(solve_ring(k, v, {}, 0), permute_inverse(k, v) ^ v);
  EXPECT_THROW(solve_ring(k, v, {}, 1), ParameterError);
}

TEST(SolveRing, UniqueAtWidth8) {
  Prg rng(4, "unique");
  for (int trial = 0; trial < 30; ++trial) {
    const Digest k = message(rng.next_u64());
    const BitString v(8, rng.uniform(0, 256));
    std::vector<BitString> others;
    const std::size_t n = rng.uniform(0, 5);
    for (std::size_t t = 0; t < n; ++t) others.emplace_back(8, rng.uniform(0, 256));
    const std::size_t idx = rng.uniform(0, n + 1);
    const BitString solved = solve_ring(k, v, others, idx);
    int hits = 0;
    for (int x = 0; x < 256; ++x) {
      auto full = others;
      full.insert(full.begin() + static_cast<std::ptrdiff_t>(idx), BitString(8, x));
      if (combine(k, v, full) == v) {
        ++hits;
        EXPECT_EQ(x, solved.value());
      }
    }
    EXPECT_EQ(hits, 1);
  }
}

TEST(RingSign, DegenerateRingVerifies) {
  Prg rng(5, "n1");
  Ring r = make_ring(1, 16, rng);
  const auto sig = ring_sign(r.pub, 0, r.users[0], message(0), 3, 4, rng);
  EXPECT_TRUE(ring_verify(sig, message(0)));
}

TEST(RingSign, CompletenessAcrossSizes) {
  Prg rng(6, "complete");
  for (std::size_t bits : {16u, 32u, 64u}) {
    for (std::size_t n = 1; n <= 5; ++n) {
      Ring r = make_ring(n, bits, rng, "c" + std::to_string(bits));
      for (int i = 0; i < 40; ++i) {
        const std::size_t s = rng.uniform(0, n);
        const auto sig = ring_sign(r.pub, s, r.users[s], message(i), 5, 6, rng);
        ASSERT_TRUE(ring_verify(sig, message(i))) << bits << " bits, n=" << n;
      }
    }
  }
}

TEST(RingSign, RejectionLoopIsShort) {
  Prg rng(7, "attempts");
  Ring r = make_ring(3, 16, rng, "a");
  int worst = 0;
  long total = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t s = static_cast<std::size_t>(i) % 3;
    const auto out = ring_sign_counted(r.pub, s, r.users[s], message(i), 5, 6, rng);
    worst = std::max(worst, out.attempts);
    total += out.attempts;
  }
  // Each draw succeeds with probability p / 2^b > 1/2.
  const double mean = std::ldexp(1.0, 16) / r.pub[0].params.p.convert_to<double>();
  EXPECT_LE(worst, 64);
  EXPECT_LT(static_cast<double>(total), 1000 * mean * 1.2);
}

TEST(RingSign, DeterministicUnderSeed) {
  auto once = [] {
    Prg rng(8, "det");
    Ring r = make_ring(3, 16, rng, "d");
    return to_json(ring_sign(r.pub, 1, r.users[1], message(3), 9, 10, rng)).dump();
  };
  EXPECT_EQ(once(), once());
}

TEST(RingSign, ParameterErrors) {
  Prg rng(9, "errors");
  Ring r = make_ring(2, 16, rng, "e");
  EXPECT_THROW(ring_sign(r.pub, 2, r.users[0], message(0), 1, 1, rng), ParameterError);
  EXPECT_THROW(ring_sign(r.pub, 1, r.users[0], message(0), 1, 1, rng), ParameterError);
  EXPECT_THROW(ring_sign({}, 0, r.users[0], message(0), 1, 1, rng), ParameterError);
  Ring mixed = make_ring(1, 32, rng, "m");
  std::vector<UserPublicKey> bad{r.pub[0], mixed.pub[0]};
  EXPECT_THROW(ring_sign(bad, 0, r.users[0], message(0), 1, 1, rng), ParameterError);
}

TEST(RingVerify, TamperedFieldsReject) {
  Prg rng(10, "tamper");
  Ring r = make_ring(3, 32, rng, "t");
  for (int i = 0; i < 100; ++i) {
    const std::size_t s = rng.uniform(0, 3);
    const auto sig = ring_sign(r.pub, s, r.users[s], message(i), 5, 6, rng);
    for (std::size_t t = 0; t < 3; ++t) {
      auto a = sig;
      a.pairs[t].alpha = a.pairs[t].alpha % (r.pub[t].params.p - 1) + 1;
      EXPECT_FALSE(ring_verify(a, message(i)));
      auto b = sig;
      b.pairs[t].beta = mod_floor(b.pairs[t].beta + 1, r.pub[t].params.q);
      EXPECT_FALSE(ring_verify(b, message(i)));
    }
    auto v = sig;
    v.v = v.v ^ BitString(v.b(), 1);
    EXPECT_FALSE(ring_verify(v, message(i)));
    EXPECT_FALSE(ring_verify(sig, message(i + 100000)));
  }
}

TEST(RingVerify, MalformedIsRejectNotThrow) {
  Prg rng(11, "malformed");
  Ring r = make_ring(2, 16, rng, "x");
  const auto sig = ring_sign(r.pub, 0, r.users[0], message(0), 5, 6, rng);
  auto a = sig;
  a.pairs.pop_back();
  EXPECT_EQ(ring_verify(a, message(0)).reason, VerifyReason::kStructural);
  auto b = sig;
  b.pairs[0].alpha = 0;
  EXPECT_EQ(ring_verify(b, message(0)).reason, VerifyReason::kStructural);
  auto c = sig;
  c.ring.clear();
  c.pairs.clear();
  EXPECT_EQ(ring_verify(c, message(0)).reason, VerifyReason::kStructural);
  auto d = sig;
  d.v = BitString(8, 1);
  EXPECT_EQ(ring_verify(d, message(0)).reason, VerifyReason::kStructural);
  auto e = sig;
  e.pairs[1].beta = r.pub[1].params.q;
  EXPECT_EQ(ring_verify(e, message(0)).reason, VerifyReason::kStructural);
}

TEST(RingJson, CanonicalAndRoundTrips) {
  Prg rng(12, "json");
  Ring r = make_ring(3, 32, rng, "j");
  KeyDirectory dir;
  for (const auto& p : r.pub) dir[p.user_id] = p;
  const auto sig = ring_sign(r.pub, 2, r.users[2], message(1), 5, 6, rng, 4);
  const std::string text = to_json(sig).dump();
  EXPECT_EQ(text.find(' '), std::string::npos);
  EXPECT_EQ(text.rfind("{\"R\":\"00000006\",\"V\":\"00000005\",\"b\":32,\"pairs\":[", 0), 0u) << text;
  const auto back = ring_signature_from_json(nlohmann::json::parse(text), dir);
  EXPECT_EQ(to_json(back).dump(), text);
  EXPECT_TRUE(ring_verify(back, message(1)));
}

TEST(RingJson, CarriesNoSecretsOrSignerIndex) {
  Prg rng(13, "fields");
  Ring r = make_ring(2, 16, rng, "f");
  const auto j = to_json(ring_sign(r.pub, 1, r.users[1], message(2), 5, 6, rng));
  std::set<std::string> keys;
  for (const auto& [key, value] : j.items()) keys.insert(key);
  EXPECT_EQ(keys, (std::set<std::string>{"R", "V", "b", "pairs", "ring", "v"}));
  for (const auto& p : j.at("pairs")) {
    std::set<std::string> pk;
    for (const auto& [key, value] : p.items()) pk.insert(key);
    EXPECT_EQ(pk, (std::set<std::string>{"alpha", "beta"}));
  }
  const std::string text = j.dump();
  for (const auto& u : r.users) EXPECT_EQ(text.find(to_hex(u.x, 2)), std::string::npos);
}

TEST(RingJson, UnknownMemberRejected) {
  Prg rng(14, "unknown");
  Ring r = make_ring(1, 16, rng, "u");
  const auto j = to_json(ring_sign(r.pub, 0, r.users[0], message(0), 5, 6, rng));
  EXPECT_THROW(ring_signature_from_json(j, {}), ParameterError);
}

}  // namespace
}  // namespace wmn
