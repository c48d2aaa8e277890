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
#include <string>

#include "wmn/bigint.hpp"
#include "wmn/hash.hpp"

namespace wmn {

/// An integer in [0, 2^width).
class BitString {
 public:
  BitString() = default;
  BitString(std::size_t width, BigInt value) : width_(width), value_(std::move(value)) {
    if (value_ < 0 || bit_length(value_) > width_) {
      throw ParameterError("BitString value does not fit in " + std::to_string(width_) +
                           " bits");
    }
  }

  std::size_t width() const { return width_; }
  const BigInt& value() const { return value_; }
  std::size_t byte_width() const { return bytes_for_bits(width_); }

  friend BitString operator^(const BitString& a, const BitString& b) {
    if (a.width_ != b.width_) throw ParameterError("BitString xor: width mismatch");
    return BitString(a.width_, a.value_ ^ b.value_);
  }
  friend bool operator==(const BitString&, const BitString&) = default;

 private:
  std::size_t width_ = 0;
  BigInt value_;
};

enum class Direction { kForward, kInverse };

namespace detail {

inline constexpr int kFeistelRounds = 4;

/// Round function: hash(key, round, half) truncated to `half_bits`. Halves
/// wider than one digest are covered by appending a block counter.
inline BigInt feistel_round(const Digest& key, int round, const BigInt& half,
                            std::size_t half_bits) {
  const std::size_t half_bytes = bytes_for_bits(half_bits);
  const Bytes encoded = to_bytes(half, half_bytes);
  const auto round_tag = static_cast<std::uint64_t>(round);
  Bytes stream;
  if (half_bytes <= Digest::kSize) {
    Digest d = Hasher().part(key).part(round_tag).part(encoded).finish();
    stream.assign(d.bytes.begin(), d.bytes.begin() + static_cast<std::ptrdiff_t>(half_bytes));
  } else {
    for (std::uint64_t block = 0; stream.size() < half_bytes; ++block) {
      Digest d = Hasher().part(key).part(round_tag).part(encoded).part(block).finish();
      stream.insert(stream.end(), d.bytes.begin(), d.bytes.end());
    }
    stream.resize(half_bytes);
  }
  const BigInt mask = (BigInt(1) << half_bits) - 1;
  return from_bytes(stream) & mask;
}

}  // namespace detail

/// Keyed permutation of [0, 2^width): a 4-round balanced Feistel network.
/// Forward and inverse are mutually inverse for every key.
inline BitString permute(const Digest& key, std::size_t width, const BitString& x,
                         Direction direction) {
  if (width < 8 || width % 2 != 0) {
    throw ParameterError("permute: width must be even and at least 8, got " +
                         std::to_string(width));
  }
  if (x.width() != width) throw ParameterError("permute: input width mismatch");
  const std::size_t half_bits = width / 2;
  const BigInt mask = (BigInt(1) << half_bits) - 1;
  BigInt left = x.value() >> half_bits;
  BigInt right = x.value() & mask;
  if (direction == Direction::kForward) {
    for (int r = 0; r < detail::kFeistelRounds; ++r) {
      BigInt next_right = left ^ detail::feistel_round(key, r, right, half_bits);
      left = std::move(right);
      right = std::move(next_right);
    }
  } else {
    for (int r = detail::kFeistelRounds - 1; r >= 0; --r) {
      BigInt prev_left = right ^ detail::feistel_round(key, r, left, half_bits);
      right = std::move(left);
      left = std::move(prev_left);
    }
  }
  return BitString(width, (left << half_bits) | right);
}

inline BitString permute_forward(const Digest& key, const BitString& x) {
  return permute(key, x.width(), x, Direction::kForward);
}

inline BitString permute_inverse(const Digest& key, const BitString& x) {
  return permute(key, x.width(), x, Direction::kInverse);
}

}  // namespace wmn
