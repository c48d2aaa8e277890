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

// Three-round anonymous authenticated key exchange between a ring member and
// the authentication server.
//
//   Round 1 (client):  R = g^x1, Q = (y_B^x1 mod p) mod q, X = g^xA,
//                      V = X * g^-Q, l = H(X, Q, V, y_B); ring-sign with k = l;
//                      send (sigma, l).
//   Round 2 (server):  Q = (R^xB mod p) mod q, X = V * g^Q, check l and sigma;
//                      Y = g^xb, K_s = X^xb, h = H(K_s, X, Y, l); send (h, Y, l).
//   Round 3 (client):  K_s' = Y^xA, accept iff H(K_s', X, Y, l) = h.

#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wmn/bigint.hpp"
#include "wmn/hash.hpp"
#include "wmn/numtheory.hpp"
#include "wmn/prg.hpp"
#include "wmn/ringsig.hpp"
#include "wmn/simtime.hpp"

namespace wmn::ake {

struct ServerPublicKey {
  GroupParams params;
  BigInt y;

  friend bool operator==(const ServerPublicKey&, const ServerPublicKey&) = default;
};

struct ServerKeyMaterial {
  GroupParams params;
  BigInt x;  // secret exponent in [1, q)
  BigInt y;  // g^x mod p

  ServerPublicKey public_view() const { return {params, y}; }

  static ServerKeyMaterial generate(const GroupParams& params, Prg& rng) {
    ServerKeyMaterial k;
    k.params = params;
    do {
      k.x = rng.uniform(BigInt(1), params.q);
      k.y = mod_exp(params.g, k.x, params.p);
    } while (k.y == 1);
    return k;
  }

  Validation validate() const {
    Validation v;
    if (x < 1 || x >= params.q) v.fail("x_B is not in [1, q)");
    if (params.p < 2 || y != mod_exp(params.g, x, params.p)) v.fail("y_B != g^x_B mod p");
    if (y == 1) v.fail("y_B == 1");
    return v;
  }
};

enum class Reject {
  kNone,
  kStructural,
  kTagMismatch,
  kRingInvalid,
  kReplay,
  kServerAuthFailed,
};

inline const char* to_string(Reject r) {
  switch (r) {
    case Reject::kNone: return "none";
    case Reject::kStructural: return "structural";
    case Reject::kTagMismatch: return "tag-mismatch";
    case Reject::kRingInvalid: return "ring-invalid";
    case Reject::kReplay: return "replay";
    case Reject::kServerAuthFailed: return "server-auth-failed";
  }
  return "unknown";
}

/// Thrown when a client state is used for a second round 3.
class StateConsumedError : public std::logic_error {
 public:
  StateConsumedError() : std::logic_error("state-consumed: round-1 state already used") {}
};

struct Round1Message {
  RingSignature sig;
  Digest l;
};

struct Round2Message {
  Digest h;
  BigInt Y;
  Digest l;
  std::size_t element_bytes = 0;
};

/// Client secrets and derived values kept between round 1 and round 3.
/// Single use: round 3 zeroes x1 and xA and marks the state consumed.
struct ClientRound1State {
  BigInt x1;
  BigInt xA;
  BigInt X;
  BigInt Q;
  BigInt V;
  Digest l;
  std::vector<UserPublicKey> ring;
  std::size_t signer_index = 0;
  ServerPublicKey server;
  bool consumed = false;

  void erase_secrets() {
    x1 = 0;
    xA = 0;
  }
};

struct Round1Output {
  Round1Message message;
  ClientRound1State state;
};

struct ServerDecision {
  Reject verdict = Reject::kNone;
  std::string detail;
  BigInt X;
  BigInt K_s;
  Digest h;
  BigInt Y;
  Digest l;
  std::size_t element_bytes = 0;

  bool accepted() const { return verdict == Reject::kNone; }
  Round2Message response() const { return {h, Y, l, element_bytes}; }
};

struct SessionKey {
  BigInt K_s;
  Digest transcript_tag;

  friend bool operator==(const SessionKey&, const SessionKey&) = default;
};

struct Round3Result {
  std::optional<SessionKey> key;
  Reject verdict = Reject::kNone;

  bool accepted() const { return key.has_value(); }
};

/// Recently accepted transcript tags. Membership check and insertion are a
/// single atomic step; entries older than `horizon` are forgotten.
class ReplayCache {
 public:
  explicit ReplayCache(SimTime horizon = seconds(3600)) : horizon_(horizon) {}

  /// Records `tag`; returns false if it was already present within the horizon.
  bool admit(const Digest& tag, SimTime now) {
    std::lock_guard lock(mu_);
    expire(now);
    return seen_.emplace(tag, now).second;
  }

  bool contains(const Digest& tag, SimTime now) {
    std::lock_guard lock(mu_);
    expire(now);
    return seen_.count(tag) != 0;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return seen_.size();
  }

 private:
  void expire(SimTime now) {
    for (auto it = seen_.begin(); it != seen_.end();) {
      if (now - it->second > horizon_) {
        it = seen_.erase(it);
      } else {
        ++it;
      }
    }
  }

  SimTime horizon_;
  mutable std::mutex mu_;
  std::map<Digest, SimTime> seen_;
};

namespace detail {

inline Digest transcript_tag(const BigInt& X, const BigInt& Q, const BigInt& V,
                             const ServerPublicKey& server) {
  const std::size_t w = server.params.element_bytes();
  return Hasher().part(X, w).part(Q, w).part(V, w).part(server.y, w).finish();
}

inline Digest confirmation_tag(const BigInt& K_s, const BigInt& X, const BigInt& Y,
                               const Digest& l, std::size_t width) {
  return Hasher().part(K_s, width).part(X, width).part(Y, width).part(l).finish();
}

}  // namespace detail

inline Round1Output client_round1(const std::vector<UserPublicKey>& ring, std::size_t signer_index,
                                  const UserKeyMaterial& signer, const ServerPublicKey& server,
                                  Prg& rng) {
  const auto& gp = server.params;
  if (ring.empty()) throw ParameterError("client_round1: empty ring");
  if (signer_index >= ring.size()) throw ParameterError("client_round1: signer index out of range");
  if (ring[signer_index] != signer.public_view()) {
    throw ParameterError("client_round1: signer does not match ring slot");
  }
  if (auto problem = wmn::detail::ring_structure_problem(ring)) {
    throw ParameterError("client_round1: " + *problem);
  }
  if (gp.p < 3 || gp.q < 2 || server.y <= 1 || server.y >= gp.p) {
    throw ParameterError("client_round1: invalid server public key");
  }

  ClientRound1State st;
  st.ring = ring;
  st.signer_index = signer_index;
  st.server = server;
  st.x1 = rng.uniform(BigInt(1), gp.q);
  st.xA = rng.uniform(BigInt(1), gp.q);
  const BigInt R = mod_exp(gp.g, st.x1, gp.p);
  st.Q = mod_exp(server.y, st.x1, gp.p) % gp.q;
  st.X = mod_exp(gp.g, st.xA, gp.p);
  st.V = (st.X * mod_exp(gp.g, mod_floor(-st.Q, gp.q), gp.p)) % gp.p;
  st.l = detail::transcript_tag(st.X, st.Q, st.V, server);

  Round1Output out;
  out.message.l = st.l;
  out.message.sig = ring_sign(ring, signer_index, signer, st.l, st.V, R, rng, gp.element_bytes());
  out.state = std::move(st);
  return out;
}

/// Verifies a round-1 message and, on success, answers with (h, Y, l).
/// All inputs are untrusted: every failure is a verdict, never an exception.
/// When `cache` is given, a tag accepted earlier is rejected as a replay.
inline ServerDecision server_round2(const RingSignature& sig, const Digest& l,
                                    const ServerKeyMaterial& server, Prg& rng,
                                    ReplayCache* cache = nullptr, SimTime now = SimTime{0}) {
  const auto& gp = server.params;
  ServerDecision d;
  d.l = l;
  d.element_bytes = gp.element_bytes();
  if (sig.V <= 0 || sig.V >= gp.p || sig.R <= 0 || sig.R >= gp.p) {
    d.verdict = Reject::kStructural;
    d.detail = "V or R outside (0, p)";
    return d;
  }
  const BigInt Q = mod_exp(sig.R, server.x, gp.p) % gp.q;
  const BigInt X = (sig.V * mod_exp(gp.g, Q, gp.p)) % gp.p;
  if (detail::transcript_tag(X, Q, sig.V, server.public_view()) != l) {
    d.verdict = Reject::kTagMismatch;
    d.detail = "recomputed l differs";
    return d;
  }
  VerifyResult vr;
  try {
    vr = ring_verify(sig, l);
  } catch (const std::exception& e) {
    vr = {VerifyReason::kStructural, e.what()};
  }
  if (!vr) {
    d.verdict = vr.reason == VerifyReason::kStructural ? Reject::kStructural : Reject::kRingInvalid;
    d.detail = vr.detail;
    return d;
  }
  if (cache != nullptr && !cache->admit(l, now)) {
    d.verdict = Reject::kReplay;
    d.detail = "transcript tag seen before";
    return d;
  }
  BigInt xb = rng.uniform(BigInt(1), gp.q);
  d.X = X;
  d.Y = mod_exp(gp.g, xb, gp.p);
  d.K_s = mod_exp(X, xb, gp.p);
  xb = 0;
  d.h = detail::confirmation_tag(d.K_s, X, d.Y, l, gp.element_bytes());
  return d;
}

inline Round3Result client_round3(ClientRound1State& state, const Digest& h, const BigInt& Y,
                                  const Digest& l_echo) {
  if (state.consumed) throw StateConsumedError();
  state.consumed = true;
  const auto& gp = state.server.params;
  Round3Result r;
  if (Y <= 1 || Y >= gp.p || l_echo != state.l) {
    state.erase_secrets();
    r.verdict = Reject::kServerAuthFailed;
    return r;
  }
  BigInt K = mod_exp(Y, state.xA, gp.p);
  state.erase_secrets();
  if (detail::confirmation_tag(K, state.X, Y, state.l, gp.element_bytes()) != h) {
    r.verdict = Reject::kServerAuthFailed;
    return r;
  }
  r.key = SessionKey{std::move(K), state.l};
  return r;
}

}  // namespace wmn::ake
