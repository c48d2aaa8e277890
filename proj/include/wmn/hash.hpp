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

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <string>
#include <string_view>

#include <openssl/evp.h>

#include "wmn/bigint.hpp"

namespace wmn {

/// 32-octet SHA-256 output.
struct Digest {
  static constexpr std::size_t kSize = 32;
  std::array<std::uint8_t, kSize> bytes{};

  ByteView view() const { return bytes; }
  std::string hex() const { return hex_encode(bytes); }
  BigInt to_int() const { return from_bytes(bytes); }

  static Digest from_hex(std::string_view h) {
    Bytes raw = hex_decode(h);
    if (raw.size() != kSize) throw ParameterError("digest must be 32 octets");
    Digest d;
    std::copy(raw.begin(), raw.end(), d.bytes.begin());
    return d;
  }

  friend auto operator<=>(const Digest&, const Digest&) = default;
};

/// Streaming SHA-256 with length-prefixed framing: every part is preceded by
/// its length as an 8-octet big-endian integer.
class Hasher {
 public:
  Hasher() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("SHA-256 context initialisation failed");
    }
  }

  Hasher& part(ByteView data) {
    std::array<std::uint8_t, 8> len{};
    std::uint64_t n = data.size();
    for (int i = 7; i >= 0; --i) {
      len[i] = static_cast<std::uint8_t>(n & 0xff);
      n >>= 8;
    }
    update(len);
    update(data);
    return *this;
  }
  Hasher& part(std::string_view s) {
    return part(ByteView(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  }
  Hasher& part(const Digest& d) { return part(d.view()); }
  Hasher& part(const BigInt& x, std::size_t width) { return part(to_bytes(x, width)); }
  Hasher& part(std::uint64_t n) {
    std::array<std::uint8_t, 8> be{};
    for (int i = 7; i >= 0; --i) {
      be[i] = static_cast<std::uint8_t>(n & 0xff);
      n >>= 8;
    }
    return part(ByteView(be));
  }

  Digest finish() {
    Digest d;
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), d.bytes.data(), &len) != 1 || len != Digest::kSize) {
      throw std::runtime_error("SHA-256 finalisation failed");
    }
    return d;
  }

 private:
  void update(ByteView data) {
    if (!data.empty() && EVP_DigestUpdate(ctx_.get(), data.data(), data.size()) != 1) {
      throw std::runtime_error("SHA-256 update failed");
    }
  }

  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline Digest hash(std::initializer_list<ByteView> parts) {
  Hasher h;
  for (auto p : parts) h.part(p);
  return h.finish();
}

template <typename Range>
Digest hash_parts(const Range& parts) {
  Hasher h;
  for (const auto& p : parts) h.part(ByteView(p));
  return h.finish();
}

/// Plain, unframed SHA-256.
inline Digest sha256(ByteView data) {
  Digest d;
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), d.bytes.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  return d;
}

}  // namespace wmn
