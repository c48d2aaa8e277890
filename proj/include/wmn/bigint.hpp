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

#include <cstddef>
#include <cstdint>
#include <iterator>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace wmn {

using BigInt = boost::multiprecision::cpp_int;
using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// Raised when an operation is called with arguments outside its domain.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::size_t bit_length(const BigInt& x) {
  if (x <= 0) return 0;
  return boost::multiprecision::msb(x) + 1;
}

inline std::size_t bytes_for_bits(std::size_t bits) { return (bits + 7) / 8; }

/// Non-negative remainder of a modulo m (m > 0).
inline BigInt mod_floor(const BigInt& a, const BigInt& m) {
  BigInt r = a % m;
  if (r < 0) r += m;
  return r;
}

/// Big-endian encoding, left-padded to `width` octets.
inline Bytes to_bytes(const BigInt& x, std::size_t width) {
  if (x < 0) throw ParameterError("to_bytes: negative integer");
  if (bytes_for_bits(bit_length(x)) > width) {
    throw ParameterError("to_bytes: integer does not fit in " + std::to_string(width) +
                         " octets");
  }
  Bytes raw;
  if (x != 0) boost::multiprecision::export_bits(x, std::back_inserter(raw), 8);
  Bytes out(width - raw.size(), 0);
  out.insert(out.end(), raw.begin(), raw.end());
  return out;
}

inline BigInt from_bytes(ByteView bytes) {
  BigInt x;
  if (!bytes.empty()) boost::multiprecision::import_bits(x, bytes.begin(), bytes.end(), 8);
  return x;
}

inline std::string hex_encode(ByteView bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

inline Bytes hex_decode(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) throw ParameterError("hex string has odd length");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = nibble(hex[2 * i]);
    int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) {
      throw ParameterError("invalid hex digit at offset " + std::to_string(2 * i));
    }
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

/// Fixed-width lowercase hex (2 * width digits).
inline std::string to_hex(const BigInt& x, std::size_t width) {
  return hex_encode(to_bytes(x, width));
}

inline BigInt from_hex(std::string_view hex) { return from_bytes(hex_decode(hex)); }

}  // namespace wmn
