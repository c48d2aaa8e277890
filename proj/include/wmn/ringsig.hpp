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

// Discrete-log trapdoor ring signatures with a keyed Feistel combining
// function. Every ring member has its own group (p_t, q_t, g_t); all groups
// in a ring share one bit length b, which is also the width of the
// combining function's domain.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wmn/bigint.hpp"
#include "wmn/hash.hpp"
#include "wmn/numtheory.hpp"
#include "wmn/permute.hpp"
#include "wmn/prg.hpp"

namespace wmn {

/// The publicly known part of a user's key material.
struct UserPublicKey {
  std::string user_id;
  GroupParams params;
  BigInt y;

  friend bool operator==(const UserPublicKey&, const UserPublicKey&) = default;
};

struct UserKeyMaterial {
  GroupParams params;
  BigInt x;  // secret exponent in [1, q)
  BigInt y;  // g^x mod p
  std::string user_id;

  UserPublicKey public_view() const { return {user_id, params, y}; }

  static UserKeyMaterial generate(std::string user_id, const GroupParams& params, Prg& rng) {
    UserKeyMaterial k;
    k.params = params;
    k.user_id = std::move(user_id);
    do {
      k.x = rng.uniform(BigInt(1), params.q);
      k.y = mod_exp(params.g, k.x, params.p);
    } while (k.y == 1);
    return k;
  }

  Validation validate() const {
    Validation v;
    if (x < 1 || x >= params.q) v.fail("x is not in [1, q)");
    if (params.p < 2 || y != mod_exp(params.g, x, params.p)) v.fail("y != g^x mod p");
    if (y == 1) v.fail("y == 1");
    return v;
  }
};

using KeyDirectory = std::map<std::string, UserPublicKey>;

struct TrapdoorPreimage {
  BigInt alpha;  // in (0, p)
  BigInt beta;   // in [0, q)

  friend bool operator==(const TrapdoorPreimage&, const TrapdoorPreimage&) = default;
};

/// f(alpha, beta) = alpha * y^(alpha mod q) * g^beta mod p. Needs only the
/// public key.
inline BigInt trapdoor_eval(const UserPublicKey& member, const TrapdoorPreimage& pre) {
  const auto& gp = member.params;
  if (mod_floor(pre.alpha, gp.p) == 0) throw ParameterError("trapdoor_eval: alpha = 0 mod p");
  if (pre.beta < 0) throw ParameterError("trapdoor_eval: negative beta");
  const BigInt alpha_star = mod_floor(pre.alpha, gp.q);
  BigInt r = mod_floor(pre.alpha, gp.p);
  r = (r * mod_exp(member.y, alpha_star, gp.p)) % gp.p;
  r = (r * mod_exp(gp.g, pre.beta, gp.p)) % gp.p;
  return r;
}

namespace detail {

/// Inversion with an explicit nonce. With t = g^K and e = K*t mod q:
/// alpha = target * g^(-e), beta = (K*t - x * (alpha mod q)) mod q, so that
/// f(alpha, beta) = alpha * g^e = target.
inline TrapdoorPreimage trapdoor_invert_with_nonce(const UserKeyMaterial& member,
                                                   const BigInt& target, const BigInt& nonce) {
  const auto& gp = member.params;
  if (target <= 0 || target >= gp.p) {
    throw ParameterError("trapdoor_invert: target must be in (0, p)");
  }
  const BigInt t = mod_exp(gp.g, nonce, gp.p);
  const BigInt e = mod_floor(nonce * t, gp.q);
  const BigInt g_neg_e = mod_exp(gp.g, mod_floor(-e, gp.q), gp.p);
  TrapdoorPreimage pre;
  pre.alpha = (target * g_neg_e) % gp.p;
  const BigInt alpha_star = mod_floor(pre.alpha, gp.q);
  pre.beta = mod_floor(nonce * t - member.x * alpha_star, gp.q);
  return pre;
}

}  // namespace detail

/// Randomized preimage of `target` under the member's trapdoor function.
/// The nonce is drawn from `rng` and never leaves this call.
inline TrapdoorPreimage trapdoor_invert(const UserKeyMaterial& member, const BigInt& target,
                                        Prg& rng) {
  BigInt nonce = rng.uniform(BigInt(1), member.params.q);
  TrapdoorPreimage pre = detail::trapdoor_invert_with_nonce(member, target, nonce);
  nonce = 0;
  return pre;
}

/// C_{k,v}(y_1..y_n) = E_k(y_n ^ E_k(y_{n-1} ^ ... E_k(y_1 ^ v))). Returns v
/// for an empty list.
inline BitString combine(const Digest& k, const BitString& v, const std::vector<BitString>& y_hats) {
  BitString acc = v;
  for (const auto& y : y_hats) {
    if (y.width() != v.width()) throw ParameterError("combine: width mismatch");
    acc = permute_forward(k, y ^ acc);
  }
  return acc;
}

/// The unique value for slot `index` that closes the ring equation
/// C_{k,v}(...) = v, given every other slot in order.
inline BitString solve_ring(const Digest& k, const BitString& v,
                            const std::vector<BitString>& others, std::size_t index) {
  if (index > others.size()) throw ParameterError("solve_ring: index out of range");
  for (const auto& y : others) {
    if (y.width() != v.width()) throw ParameterError("solve_ring: width mismatch");
  }
  BitString forward = v;
  for (std::size_t s = 0; s < index; ++s) forward = permute_forward(k, others[s] ^ forward);
  BitString backward = v;
  for (std::size_t s = others.size(); s > index; --s) {
    backward = permute_inverse(k, backward) ^ others[s - 1];
  }
  return permute_inverse(k, backward) ^ forward;
}

struct RingSignature {
  std::vector<UserPublicKey> ring;
  BitString v;
  BigInt V;
  BigInt R;
  std::vector<TrapdoorPreimage> pairs;
  /// Wire width of V and R.
  std::size_t commit_bytes = 0;

  std::size_t b() const { return v.width(); }
};

enum class VerifyReason { kOk, kStructural, kRingEquation };

inline const char* to_string(VerifyReason r) {
  switch (r) {
    case VerifyReason::kOk: return "ok";
    case VerifyReason::kStructural: return "structural";
    case VerifyReason::kRingEquation: return "ring-equation";
  }
  return "unknown";
}

struct VerifyResult {
  VerifyReason reason = VerifyReason::kOk;
  std::string detail;

  bool accepted() const { return reason == VerifyReason::kOk; }
  explicit operator bool() const { return accepted(); }
};

namespace detail {

inline std::optional<std::string> ring_structure_problem(const std::vector<UserPublicKey>& ring) {
  if (ring.empty()) return "empty ring";
  const std::size_t bits = ring.front().params.bit_len;
  if (bits < 8 || bits % 2 != 0) return "ring bit length must be even and at least 8";
  for (std::size_t t = 0; t < ring.size(); ++t) {
    const auto& m = ring[t];
    if (m.params.bit_len != bits) return "member " + std::to_string(t) + " has a different bit length";
    if (m.params.p < 3 || m.params.q < 2) return "member " + std::to_string(t) + " has degenerate group";
    if (m.y <= 1 || m.y >= m.params.p) return "member " + std::to_string(t) + " has invalid public key";
  }
  return std::nullopt;
}

inline std::vector<BitString> ring_images(const std::vector<UserPublicKey>& ring,
                                          const std::vector<TrapdoorPreimage>& pairs,
                                          std::size_t width) {
  std::vector<BitString> out;
  out.reserve(ring.size());
  for (std::size_t t = 0; t < ring.size(); ++t) {
    out.emplace_back(width, trapdoor_eval(ring[t], pairs[t]));
  }
  return out;
}

}  // namespace detail

struct SignOutcome {
  RingSignature signature;
  /// Number of v draws until the solved slot landed in (0, p_i).
  int attempts = 0;
};

inline SignOutcome ring_sign_counted(const std::vector<UserPublicKey>& ring,
                                     std::size_t signer_index, const UserKeyMaterial& signer,
                                     const Digest& k, const BigInt& V, const BigInt& R, Prg& rng,
                                     std::size_t commit_bytes = 0) {
  if (auto problem = detail::ring_structure_problem(ring)) {
    throw ParameterError("ring_sign: " + *problem);
  }
  if (signer_index >= ring.size()) throw ParameterError("ring_sign: signer index out of range");
  if (ring[signer_index] != signer.public_view()) {
    throw ParameterError("ring_sign: signer key does not match ring slot");
  }
  const std::size_t b = ring.front().params.bit_len;
  if (commit_bytes == 0) {
    commit_bytes = std::max(bytes_for_bits(bit_length(V)), bytes_for_bits(bit_length(R)));
    commit_bytes = std::max<std::size_t>(commit_bytes, 1);
  }

  SignOutcome out;
  auto& sig = out.signature;
  sig.ring = ring;
  sig.V = V;
  sig.R = R;
  sig.commit_bytes = commit_bytes;
  sig.pairs.resize(ring.size());

  std::vector<BitString> others;
  others.reserve(ring.size() - 1);
  for (std::size_t t = 0; t < ring.size(); ++t) {
    if (t == signer_index) continue;
    const auto& gp = ring[t].params;
    TrapdoorPreimage pre{rng.uniform(BigInt(1), gp.p), rng.uniform(BigInt(0), gp.q)};
    others.emplace_back(b, trapdoor_eval(ring[t], pre));
    sig.pairs[t] = std::move(pre);
  }

  const BigInt space = BigInt(1) << b;
  const BigInt& p_i = signer.params.p;
  for (;;) {
    ++out.attempts;
    BitString v(b, rng.uniform(BigInt(0), space));
    BitString y_i = solve_ring(k, v, others, signer_index);
    if (y_i.value() > 0 && y_i.value() < p_i) {
      sig.v = std::move(v);
      sig.pairs[signer_index] = trapdoor_invert(signer, y_i.value(), rng);
      return out;
    }
  }
}

inline RingSignature ring_sign(const std::vector<UserPublicKey>& ring, std::size_t signer_index,
                               const UserKeyMaterial& signer, const Digest& k, const BigInt& V,
                               const BigInt& R, Prg& rng, std::size_t commit_bytes = 0) {
  return ring_sign_counted(ring, signer_index, signer, k, V, R, rng, commit_bytes).signature;
}

/// Applies the same check to every slot; never throws on malformed input.
inline VerifyResult ring_verify(const RingSignature& sig, const Digest& k) {
  if (auto problem = detail::ring_structure_problem(sig.ring)) {
    return {VerifyReason::kStructural, *problem};
  }
  if (sig.pairs.size() != sig.ring.size()) {
    return {VerifyReason::kStructural, "pair count does not match ring size"};
  }
  const std::size_t b = sig.ring.front().params.bit_len;
  if (sig.v.width() != b) return {VerifyReason::kStructural, "v width differs from ring bit length"};
  for (std::size_t t = 0; t < sig.ring.size(); ++t) {
    const auto& gp = sig.ring[t].params;
    const auto& pre = sig.pairs[t];
    if (pre.alpha <= 0 || pre.alpha >= gp.p || pre.beta < 0 || pre.beta >= gp.q) {
      return {VerifyReason::kStructural, "pair " + std::to_string(t) + " out of range"};
    }
  }
  const auto images = detail::ring_images(sig.ring, sig.pairs, b);
  if (combine(k, sig.v, images) != sig.v) {
    return {VerifyReason::kRingEquation, "ring equation does not close"};
  }
  return {};
}

/// Canonical JSON: sorted keys, fixed-width lowercase hex. The ring is
/// carried by user id only; public keys are resolved against a directory.
inline nlohmann::json to_json(const RingSignature& sig) {
  nlohmann::json ring = nlohmann::json::array();
  for (const auto& m : sig.ring) ring.push_back(m.user_id);
  nlohmann::json pairs = nlohmann::json::array();
  for (std::size_t t = 0; t < sig.pairs.size(); ++t) {
    const std::size_t w = sig.ring.at(t).params.element_bytes();
    pairs.push_back({{"alpha", to_hex(sig.pairs[t].alpha, w)}, {"beta", to_hex(sig.pairs[t].beta, w)}});
  }
  return {{"ring", std::move(ring)},
          {"v", to_hex(sig.v.value(), sig.v.byte_width())},
          {"V", to_hex(sig.V, sig.commit_bytes)},
          {"R", to_hex(sig.R, sig.commit_bytes)},
          {"pairs", std::move(pairs)},
          {"b", sig.b()}};
}

inline RingSignature ring_signature_from_json(const nlohmann::json& j, const KeyDirectory& directory) {
  try {
    RingSignature sig;
    for (const auto& id : j.at("ring")) {
      auto it = directory.find(id.get<std::string>());
      if (it == directory.end()) throw ParameterError("unknown ring member: " + id.get<std::string>());
      sig.ring.push_back(it->second);
    }
    const auto b = j.at("b").get<std::size_t>();
    const auto v_hex = j.at("v").get<std::string>();
    const BigInt v = from_hex(v_hex);
    if (bit_length(v) > b) throw ParameterError("v exceeds declared width");
    sig.v = BitString(b, v);
    const auto V_hex = j.at("V").get<std::string>();
    sig.V = from_hex(V_hex);
    sig.R = from_hex(j.at("R").get<std::string>());
    sig.commit_bytes = V_hex.size() / 2;
    for (const auto& p : j.at("pairs")) {
      sig.pairs.push_back({from_hex(p.at("alpha").get<std::string>()),
                           from_hex(p.at("beta").get<std::string>())});
    }
    return sig;
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("malformed ring signature: ") + e.what());
  }
}

}  // namespace wmn
