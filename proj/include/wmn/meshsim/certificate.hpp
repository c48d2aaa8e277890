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

// CA-signed identity assertions for mesh routers. Each router holds two: one
// for joining through a neighbour, one for authenticating to the server.
// Signatures are Schnorr over the server's group.

#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "wmn/bigint.hpp"
#include "wmn/hash.hpp"
#include "wmn/numtheory.hpp"
#include "wmn/prg.hpp"

namespace wmn::sim {

struct SchnorrSignature {
  BigInt e;
  BigInt s;
};

inline BigInt schnorr_challenge(const GroupParams& gp, const BigInt& r, const std::string& msg) {
  return Hasher().part(r, gp.element_bytes()).part(msg).finish().to_int() % gp.q;
}

inline SchnorrSignature schnorr_sign(const GroupParams& gp, const BigInt& x, const std::string& msg,
                                     Prg& rng) {
  for (;;) {
    const BigInt k = rng.uniform(BigInt(1), gp.q);
    const BigInt r = mod_exp(gp.g, k, gp.p);
    const BigInt e = schnorr_challenge(gp, r, msg);
    if (e == 0) continue;
    return {e, mod_floor(k + x * e, gp.q)};
  }
}

inline bool schnorr_verify(const GroupParams& gp, const BigInt& y, const std::string& msg,
                           const SchnorrSignature& sig) {
  if (sig.e <= 0 || sig.e >= gp.q || sig.s < 0 || sig.s >= gp.q) return false;
  if (y <= 1 || y >= gp.p) return false;
  const BigInt r = (mod_exp(gp.g, sig.s, gp.p) * mod_exp(y, gp.q - sig.e, gp.p)) % gp.p;
  return schnorr_challenge(gp, r, msg) == sig.e;
}

enum class CertPurpose { kAccess, kServer };

inline const char* to_string(CertPurpose p) {
  return p == CertPurpose::kAccess ? "access" : "server";
}

struct Certificate {
  std::string subject;
  CertPurpose purpose = CertPurpose::kAccess;
  BigInt subject_key;
  SchnorrSignature signature;

  std::string signed_text(std::size_t width) const {
    return "cert|" + subject + "|" + to_string(purpose) + "|" + to_hex(subject_key, width);
  }

  nlohmann::json to_json(std::size_t width) const {
    return {{"subject", subject},
            {"purpose", to_string(purpose)},
            {"key", to_hex(subject_key, width)},
            {"e", to_hex(signature.e, width)},
            {"s", to_hex(signature.s, width)}};
  }

  static Certificate from_json(const nlohmann::json& j) {
    Certificate c;
    c.subject = j.at("subject").get<std::string>();
    c.purpose = j.at("purpose").get<std::string>() == "server" ? CertPurpose::kServer : CertPurpose::kAccess;
    c.subject_key = from_hex(j.at("key").get<std::string>());
    c.signature = {from_hex(j.at("e").get<std::string>()), from_hex(j.at("s").get<std::string>())};
    return c;
  }
};

struct CertificateAuthority {
  GroupParams params;
  BigInt x;
  BigInt y;

  static CertificateAuthority generate(const GroupParams& gp, Prg& rng) {
    CertificateAuthority ca{gp, rng.uniform(BigInt(1), gp.q), 0};
    ca.y = mod_exp(gp.g, ca.x, gp.p);
    return ca;
  }

  Certificate issue(std::string subject, CertPurpose purpose, const BigInt& key, Prg& rng) const {
    Certificate c{std::move(subject), purpose, key, {}};
    c.signature = schnorr_sign(params, x, c.signed_text(params.element_bytes()), rng);
    return c;
  }

  bool verify(const Certificate& c, CertPurpose expected) const {
    return c.purpose == expected &&
           schnorr_verify(params, y, c.signed_text(params.element_bytes()), c.signature);
  }
};

}  // namespace wmn::sim
