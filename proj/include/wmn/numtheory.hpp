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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wmn/bigint.hpp"
#include "wmn/hash.hpp"
#include "wmn/prg.hpp"

namespace wmn {

inline BigInt mod_exp(const BigInt& base, const BigInt& exponent, const BigInt& m) {
  if (m < 2) throw ParameterError("mod_exp: modulus must be at least 2");
  if (exponent < 0) throw ParameterError("mod_exp: negative exponent");
  return boost::multiprecision::powm(mod_floor(base, m), exponent, m);
}

/// Multiplicative inverse of a modulo m; a must be coprime to m.
inline BigInt mod_inverse(const BigInt& a, const BigInt& m) {
  BigInt r0 = m, r1 = mod_floor(a, m);
  BigInt s0 = 0, s1 = 1;
  while (r1 != 0) {
    BigInt quot = r0 / r1;
    BigInt r2 = r0 - quot * r1;
    r0 = r1;
    r1 = r2;
    BigInt s2 = s0 - quot * s1;
    s0 = s1;
    s1 = s2;
  }
  if (r0 != 1) throw ParameterError("mod_inverse: value is not invertible");
  return mod_floor(s0, m);
}

namespace detail {

inline bool miller_rabin_witness(const BigInt& n, const BigInt& a, const BigInt& d,
                                 unsigned s) {
  BigInt x = boost::multiprecision::powm(a, d, n);
  if (x == 1 || x == n - 1) return false;
  for (unsigned r = 1; r < s; ++r) {
    x = (x * x) % n;
    if (x == n - 1) return false;
  }
  return true;
}

}  // namespace detail

/// Miller-Rabin. Exact below 2^64 (fixed prime bases); above that, `rounds`
/// bases derived deterministically from n itself, so the answer is a pure
/// function of the input.
inline bool is_probable_prime(const BigInt& n, int rounds = 40) {
  static constexpr std::array<unsigned, 12> kSmall = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  if (n < 2) return false;
  for (unsigned p : kSmall) {
    if (n == p) return true;
    if (n % p == 0) return false;
  }
  BigInt d = n - 1;
  unsigned s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  if (bit_length(n) <= 64) {
    for (unsigned a : kSmall) {
      if (detail::miller_rabin_witness(n, a, d, s)) return false;
    }
    return true;
  }
  const std::size_t width = bytes_for_bits(bit_length(n));
  Prg bases(to_bytes(n, width), "miller-rabin");
  for (int i = 0; i < rounds; ++i) {
    BigInt a = bases.uniform(BigInt(2), n - 1);
    if (detail::miller_rabin_witness(n, a, d, s)) return false;
  }
  return true;
}

/// Prime-order subgroup of Z_p^*: q | p - 1 and g has order q.
struct GroupParams {
  BigInt p;
  BigInt q;
  BigInt g;
  std::size_t bit_len = 0;

  /// Octet width used for every residue of this group on the wire.
  std::size_t element_bytes() const { return bytes_for_bits(bit_len); }

  friend bool operator==(const GroupParams&, const GroupParams&) = default;
};

struct Validation {
  bool ok = true;
  std::vector<std::string> problems;

  void fail(std::string why) {
    ok = false;
    problems.push_back(std::move(why));
  }
  explicit operator bool() const { return ok; }
};

inline Validation validate_group_params(const GroupParams& gp) {
  Validation v;
  if (gp.bit_len < 2 || bit_length(gp.p) != gp.bit_len) {
    v.fail("p does not have bit length " + std::to_string(gp.bit_len));
  }
  if (!is_probable_prime(gp.p)) v.fail("p is not prime");
  if (!is_probable_prime(gp.q)) v.fail("q is not prime");
  if (gp.q < 2 || gp.p < 3 || (gp.p - 1) % gp.q != 0) v.fail("q does not divide p - 1");
  if (gp.g <= 1 || gp.g >= gp.p) {
    v.fail("g is not in [2, p)");
  } else if (gp.p >= 2 && mod_exp(gp.g, gp.q, gp.p) != 1) {
    v.fail("g does not have order q");
  }
  return v;
}

/// Schnorr-group search: a prime q of ceil(bit_len/2) bits, then p = k*q + 1
/// of exactly bit_len bits, then g = h^((p-1)/q) for h until g != 1.
inline GroupParams gen_group_params(std::size_t bit_len, ByteView seed) {
  if (bit_len < 16) throw ParameterError("gen_group_params: bit_len must be at least 16");
  Prg rng(seed, "group-params/" + std::to_string(bit_len));
  const std::size_t q_bits = (bit_len + 1) / 2;
  const BigInt p_lo = BigInt(1) << (bit_len - 1);
  const BigInt p_hi = BigInt(1) << bit_len;
  for (;;) {
    BigInt q = rng.uniform(BigInt(1) << (q_bits - 1), BigInt(1) << q_bits) | 1;
    if (!is_probable_prime(q)) continue;
    // k must be even for p to be odd; k ranges so that p has bit_len bits.
    const BigInt k_lo = (p_lo - 1 + q - 1) / q;
    const BigInt k_hi = (p_hi - 2) / q + 1;
    if (k_hi <= k_lo + 1) continue;
    for (int attempt = 0; attempt < 4 * static_cast<int>(bit_len); ++attempt) {
      BigInt k = rng.uniform(k_lo, k_hi);
      if (k & 1) ++k;
      BigInt p = k * q + 1;
      if (p < p_lo || p >= p_hi || !is_probable_prime(p)) continue;
      for (;;) {
        BigInt h = rng.uniform(BigInt(2), p - 1);
        BigInt g = mod_exp(h, k, p);
        if (g != 1) return GroupParams{p, q, g, bit_len};
      }
    }
  }
}

inline GroupParams gen_group_params(std::size_t bit_len, std::string_view seed) {
  return gen_group_params(
      bit_len, ByteView(reinterpret_cast<const std::uint8_t*>(seed.data()), seed.size()));
}

inline nlohmann::json to_json(const GroupParams& gp) {
  const std::size_t w = gp.element_bytes();
  return {{"p", to_hex(gp.p, w)}, {"q", to_hex(gp.q, w)}, {"g", to_hex(gp.g, w)},
          {"bit_len", gp.bit_len}};
}

inline GroupParams group_params_from_json(const nlohmann::json& j) {
  try {
    GroupParams gp;
    gp.p = from_hex(j.at("p").get<std::string>());
    gp.q = from_hex(j.at("q").get<std::string>());
    gp.g = from_hex(j.at("g").get<std::string>());
    gp.bit_len = j.at("bit_len").get<std::size_t>();
    return gp;
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("malformed group parameters: ") + e.what());
  }
}

}  // namespace wmn
