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

#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

#include "wmn/bigint.hpp"
#include "wmn/hash.hpp"

namespace wmn {

/// Deterministic pseudorandom stream: SHA-256 in counter mode over a key
/// derived from (seed, label). Two streams with the same seed and label
/// produce identical output; distinct labels give independent streams.
///
/// A Prg is single-consumer. Use fork() to hand independent streams to
/// separate owners.
class Prg {
 public:
  using result_type = std::uint64_t;

  Prg(ByteView seed, std::string_view label)
      : key_(Hasher().part(std::string_view("wmn.prg")).part(seed).part(label).finish()) {}

  Prg(std::uint64_t seed, std::string_view label) : Prg(seed_bytes(seed), label) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u64(); }

  /// Independent child stream; depends only on this stream's key and the
  /// sub-label, never on how much has been consumed.
  Prg fork(std::string_view label) const { return Prg(key_.view(), label); }

  std::uint8_t next_byte() {
    if (pos_ == block_.bytes.size()) refill();
    return block_.bytes[pos_++];
  }

  Bytes bytes(std::size_t n) {
    Bytes out(n);
    for (auto& b : out) b = next_byte();
    return out;
  }

  std::uint64_t next_u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | next_byte();
    return v;
  }

  /// Uniform integer in [lo, hi) by rejection sampling.
  BigInt uniform(const BigInt& lo, const BigInt& hi) {
    if (hi <= lo) throw ParameterError("uniform: empty range");
    const BigInt span = hi - lo;
    const std::size_t bits = bit_length(span - 1);
    if (bits == 0) return lo;
    const std::size_t nbytes = bytes_for_bits(bits);
    const BigInt mask = (BigInt(1) << bits) - 1;
    for (;;) {
      BigInt candidate = from_bytes(bytes(nbytes)) & mask;
      if (candidate < span) return lo + candidate;
    }
  }

  std::uint64_t uniform(std::uint64_t lo, std::uint64_t hi) {
    if (hi <= lo) throw ParameterError("uniform: empty range");
    const std::uint64_t span = hi - lo;
    // Largest multiple of span that fits, to avoid modulo bias.
    const std::uint64_t limit = max() - (max() % span + 1) % span;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r <= limit) return lo + r % span;
    }
  }

  /// Uniform double in [0, 1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double probability) {
    if (probability <= 0.0) return false;
    if (probability >= 1.0) return true;
    return uniform01() < probability;
  }

 private:
  static Bytes seed_bytes(std::uint64_t seed) {
    Bytes b(8);
    for (int i = 7; i >= 0; --i) {
      b[i] = static_cast<std::uint8_t>(seed & 0xff);
      seed >>= 8;
    }
    return b;
  }

  void refill() {
    block_ = Hasher().part(key_).part(counter_++).finish();
    pos_ = 0;
  }

  Digest key_;
  Digest block_{};
  std::size_t pos_ = Digest::kSize;
  std::uint64_t counter_ = 0;
};

}  // namespace wmn
