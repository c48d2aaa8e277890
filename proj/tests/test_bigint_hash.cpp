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

#include "wmn/bigint.hpp"
#include "wmn/hash.hpp"
#include "wmn/prg.hpp"
#include "wmn/simtime.hpp"

namespace wmn {
namespace {

Bytes ascii(std::string_view s) { return Bytes(s.begin(), s.end()); }

TEST(Bytes, FixedWidthBigEndian) {
  EXPECT_EQ(hex_encode(to_bytes(BigInt(0x0102), 4)), "00000102");
  EXPECT_EQ(to_hex(BigInt(0), 2), "0000");
  EXPECT_THROW(to_bytes(BigInt(0x10000), 2), ParameterError);
  EXPECT_THROW(to_bytes(BigInt(-1), 2), ParameterError);
}

TEST(Bytes, HexRoundTrip) {
  Prg rng(9, "hex");
  for (int i = 0; i < 200; ++i) {
    const BigInt x = rng.uniform(BigInt(0), BigInt(1) << 200);
    EXPECT_EQ(from_hex(to_hex(x, 26)), x);
  }
  EXPECT_EQ(from_hex("00ff"), 255);
  EXPECT_EQ(from_hex("00FF"), 255);
  EXPECT_THROW(hex_decode("abc"), ParameterError);
  EXPECT_THROW(hex_decode("zz"), ParameterError);
}

TEST(Hash, ReferenceVectors) {
  // Plain SHA-256 vector for "abc".
  EXPECT_EQ(sha256(ascii("abc")).hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  // Framed single part of 32 zero octets: SHA-256 over 00..20 || 0^32,
  // computed with an independent implementation.
  const Bytes zeros(32, 0);
  EXPECT_EQ(hash({ByteView(zeros)}).hex(),
            "1c799f3865a7f8d488e3c0693890f231903598fde52745a0f7c29c6fa6801199");
  EXPECT_EQ(hash({}).hex(), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Hash, FramingSeparatesParts) {
  const Bytes x = ascii("x"), y = ascii("y"), xy = ascii("xy");
  const Digest two = hash({ByteView(x), ByteView(y)});
  EXPECT_EQ(two.hex(), "231ff9ae421066bd352810e4e3042f3475d6a5c5bb87539070a6afbd9232f785");
  EXPECT_NE(two, hash({ByteView(xy)}));
  EXPECT_NE(two, hash({ByteView(y), ByteView(x)}));
  EXPECT_EQ(Hasher().part(std::string_view("x")).part(std::string_view("y")).finish(), two);
}

TEST(Hash, DigestHexRoundTrip) {
  const Digest d = sha256(ascii("abc"));
  EXPECT_EQ(Digest::from_hex(d.hex()), d);
  EXPECT_THROW(Digest::from_hex("00"), ParameterError);
}

TEST(Prg, Deterministic) {
  Prg a(42, "label"), b(42, "label");
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.uniform(BigInt(0), BigInt(1000003)), b.uniform(BigInt(0), BigInt(1000003)));
}

TEST(Prg, LabelsSeparateStreams) {
  Prg a(42, "one"), b(42, "two");
  int same = 0;
  for (int i = 0; i < 100; ++i) same += a.next_u64() == b.next_u64();
  EXPECT_LT(same, 2);
}

TEST(Prg, ForkIgnoresConsumption) {
  Prg a(1, "root");
  Prg before = a.fork("child");
  (void)a.bytes(100);
  Prg after = a.fork("child");
  for (int i = 0; i < 10; ++i) EXPECT_EQ(before.next_u64(), after.next_u64());
}

TEST(Prg, EmptyRangeRejected) {
  Prg a(1, "x");
  EXPECT_THROW(a.uniform(BigInt(5), BigInt(5)), ParameterError);
  EXPECT_THROW(a.uniform(std::uint64_t{7}, std::uint64_t{3}), ParameterError);
}

TEST(Prg, UniformResiduesWithinFiveSigma) {
  Prg rng(2024, "uniform");
  constexpr int kDraws = 10000;
  constexpr int kBins = 11;
  std::array<int, kBins> counts{};
  for (int i = 0; i < kDraws; ++i) ++counts[static_cast<int>(rng.uniform(BigInt(0), BigInt(kBins)))];
  const double p = 1.0 / kBins;
  const double mean = kDraws * p;
  const double sigma = std::sqrt(kDraws * p * (1 - p));
  for (int c : counts) EXPECT_LT(std::abs(c - mean), 5 * sigma);
}

TEST(Prg, WideRangeCoversTopBits) {
  Prg rng(3, "wide");
  const BigInt hi = BigInt(1) << 130;
  bool top = false;
  for (int i = 0; i < 64 && !top; ++i) top = rng.uniform(BigInt(0), hi) >= (hi >> 1);
  EXPECT_TRUE(top);
}

TEST(SimTime, ParsesExactDecimals) {
  EXPECT_EQ(parse_seconds("2.5").count(), 2'500'000'000);
  EXPECT_EQ(parse_seconds("-0.25").count(), -250'000'000);
  EXPECT_EQ(parse_seconds("0.000000001").count(), 1);
  EXPECT_EQ(parse_seconds("60").count(), 60'000'000'000);
  EXPECT_THROW(parse_seconds("1e3"), ParameterError);
  EXPECT_THROW(parse_seconds("0.0000000001"), ParameterError);
  EXPECT_THROW(parse_seconds(""), ParameterError);
  EXPECT_THROW(parse_seconds("1.2.3"), ParameterError);
}

TEST(SimTime, FormatRoundTrips) {
  for (const char* s : {"0", "2.5", "-0.25", "0.000000001", "123456.789"}) {
    EXPECT_EQ(format_seconds(parse_seconds(s)), s);
  }
}

}  // namespace
}  // namespace wmn
