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

// Reduced invariant suites, runnable from the command line as a smoke gate.
// The full suites live under tests/.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wmn/anonake.hpp"
#include "wmn/keysched.hpp"
#include "wmn/meshsim/simulator.hpp"
#include "wmn/numtheory.hpp"
#include "wmn/permute.hpp"
#include "wmn/prg.hpp"
#include "wmn/ringsig.hpp"

namespace wmn::selftest {

struct CheckResult {
  std::string suite;
  std::string name;
  bool ok = true;
  std::string detail;
};

namespace detail {

class Suite {
 public:
  Suite(std::string name, std::vector<CheckResult>& out) : name_(std::move(name)), out_(out) {}

  void check(const std::string& name, const std::function<std::string()>& body) {
    CheckResult r{name_, name, true, {}};
    try {
      r.detail = body();
      r.ok = r.detail.empty();
    } catch (const std::exception& e) {
      r.ok = false;
      r.detail = std::string("exception: ") + e.what();
    }
    out_.push_back(std::move(r));
  }

 private:
  std::string name_;
  std::vector<CheckResult>& out_;
};

inline std::uint64_t mulmod_u64(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % m);
}

inline std::uint64_t powmod_u64(std::uint64_t b, std::uint64_t e, std::uint64_t m) {
  std::uint64_t r = 1 % m;
  b %= m;
  for (; e != 0; e >>= 1) {
    if (e & 1) r = mulmod_u64(r, b, m);
    b = mulmod_u64(b, b, m);
  }
  return r;
}

}  // namespace detail

inline void numtheory_suite(std::vector<CheckResult>& out) {
  detail::Suite s("numtheory", out);
  s.check("mod_exp agrees with 128-bit square-and-multiply", [] {
    Prg rng(1, "selftest/modexp");
    for (int i = 0; i < 200; ++i) {
      const std::uint64_t m = rng.uniform(std::uint64_t{2}, std::uint64_t{1} << 62);
      const std::uint64_t b = rng.next_u64();
      const std::uint64_t e = rng.next_u64();
      if (mod_exp(BigInt(b), BigInt(e), BigInt(m)) != detail::powmod_u64(b, e, m)) {
        return std::string("mismatch");
      }
    }
    return std::string();
  });
  s.check("generated groups validate", [] {
    for (std::size_t bits : {16u, 32u, 64u}) {
      auto v = validate_group_params(gen_group_params(bits, "selftest"));
      if (!v) return "bit_len " + std::to_string(bits) + ": " + v.problems.front();
    }
    return std::string();
  });
}

inline void permute_suite(std::vector<CheckResult>& out) {
  detail::Suite s("permute", out);
  s.check("inverse undoes forward", [] {
    Prg rng(2, "selftest/permute");
    for (std::size_t width : {8u, 16u, 64u, 130u}) {
      const Digest key = Hasher().part(std::to_string(width)).finish();
      for (int i = 0; i < 50; ++i) {
        BitString x(width, rng.uniform(BigInt(0), BigInt(1) << width));
        if (permute_inverse(key, permute_forward(key, x)) != x) return std::string("round trip failed");
      }
    }
    return std::string();
  });
}

inline void ringsig_suite(std::vector<CheckResult>& out) {
  detail::Suite s("ringsig", out);
  s.check("sign/verify and tamper rejection", [] {
    const GroupParams gp = gen_group_params(32, "selftest/ring");
    Prg rng(3, "selftest/ring");
    std::vector<UserKeyMaterial> users;
    std::vector<UserPublicKey> ring;
    for (int i = 0; i < 4; ++i) {
      users.push_back(UserKeyMaterial::generate("u" + std::to_string(i), gp, rng));
      ring.push_back(users.back().public_view());
    }
    for (int i = 0; i < 20; ++i) {
      const std::size_t signer = static_cast<std::size_t>(i) % ring.size();
      const Digest k = Hasher().part(static_cast<std::uint64_t>(i)).finish();
      RingSignature sig = ring_sign(ring, signer, users[signer], k, 5, 7, rng);
      if (!ring_verify(sig, k)) return std::string("honest signature rejected");
      sig.pairs[0].beta = mod_floor(sig.pairs[0].beta + 1, gp.q);
      if (ring_verify(sig, k)) return std::string("tampered signature accepted");
    }
    return std::string();
  });
}

inline void anonake_suite(std::vector<CheckResult>& out) {
  detail::Suite s("anonake", out);
  s.check("key agreement and replay rejection", [] {
    const GroupParams gp = gen_group_params(32, "selftest/ake");
    Prg rng(4, "selftest/ake");
    const auto server = ake::ServerKeyMaterial::generate(gp, rng);
    std::vector<UserKeyMaterial> users;
    std::vector<UserPublicKey> ring;
    for (int i = 0; i < 3; ++i) {
      users.push_back(UserKeyMaterial::generate("u" + std::to_string(i), gp, rng));
      ring.push_back(users.back().public_view());
    }
    ake::ReplayCache cache;
    for (int i = 0; i < 10; ++i) {
      auto r1 = ake::client_round1(ring, 1, users[1], server.public_view(), rng);
      auto d = ake::server_round2(r1.message.sig, r1.message.l, server, rng, &cache);
      if (!d.accepted()) return std::string("honest round 1 rejected: ") + ake::to_string(d.verdict);
      auto r3 = ake::client_round3(r1.state, d.h, d.Y, d.l);
      if (!r3.accepted() || r3.key->K_s != d.K_s) return std::string("session keys differ");
      auto again = ake::server_round2(r1.message.sig, r1.message.l, server, rng, &cache);
      if (again.verdict != ake::Reject::kReplay) return std::string("replay accepted");
    }
    return std::string();
  });
}

inline void keysched_suite(std::vector<CheckResult>& out) {
  detail::Suite s("keysched", out);
  s.check("key index and validity match slot walking", [] {
    Prg rng(5, "selftest/keysched");
    for (int i = 0; i < 500; ++i) {
      const SimTime timeout(static_cast<std::int64_t>(rng.uniform(1, 10'000'000'000)));
      const SimTime ts(static_cast<std::int64_t>(rng.uniform(0, 1'000'000'000'000)));
      const SimTime t(ts.count() + static_cast<std::int64_t>(rng.uniform(0, 40 * static_cast<std::uint64_t>(timeout.count()))));
      std::int64_t idx = 1;
      SimTime end = ts + timeout;
      while (end <= t) {
        end += timeout;
        ++idx;
      }
      if (keysched::current_key_index(t, ts, timeout) != idx) return std::string("key_idx mismatch");
      if (keysched::remaining_validity(t, ts, timeout) != end - t) return std::string("T_i mismatch");
    }
    return std::string();
  });
}

inline void meshsim_suite(std::vector<CheckResult>& out) {
  detail::Suite s("meshsim", out);
  s.check("smoke chain joins deterministically", [] {
    const auto cfg = sim::scenario_from_json(nlohmann::json::parse(R"({
      "nodes": [{"id": "as", "role": "AS"}, {"id": "gw", "role": "IGW"}, {"id": "mr1", "role": "MR"}],
      "links": [{"a": "as", "b": "gw", "latency": "0.005", "wired": true},
                {"a": "gw", "b": "mr1", "latency": "0.01"}],
      "keylist": {"cardinality": 4, "timeout": "5"},
      "ake": {"ring_size": 1, "bit_len": 32},
      "traffic": [{"src": "gw", "dst": "mr1", "rate": 10, "start": "1", "stop": "20"}],
      "duration": "30", "seed": 1})"));
    sim::Simulator a(cfg);
    const auto sa = a.run();
    sim::Simulator b(cfg);
    b.run();
    if (a.metrics().jsonl() != b.metrics().jsonl()) return std::string("metrics differ between runs");
    if (a.phase("mr1") != sim::JoinPhase::kFullMr) return std::string("mr1 did not join");
    for (const auto& f : sa.flows) {
      if (f.sent != f.delivered + f.dropped()) return std::string("packet conservation violated");
      if (f.dropped() != 0) return std::string("drops on a lossless chain");
    }
    return std::string();
  });
}

inline std::vector<CheckResult> run_all() {
  std::vector<CheckResult> out;
  numtheory_suite(out);
  permute_suite(out);
  ringsig_suite(out);
  anonake_suite(out);
  keysched_suite(out);
  meshsim_suite(out);
  return out;
}

/// Checks a parameter/key file written by `params gen`.
inline Validation validate_key_file(const nlohmann::json& j) {
  Validation v;
  GroupParams gp;
  try {
    gp = group_params_from_json(j.at("params"));
  } catch (const std::exception& e) {
    v.fail(std::string("params: ") + e.what());
    return v;
  }
  for (auto& p : validate_group_params(gp).problems) v.fail("params: " + p);
  if (!j.contains("key")) return v;
  try {
    const auto& k = j.at("key");
    UserKeyMaterial km{gp, from_hex(k.at("x").get<std::string>()), from_hex(k.at("y").get<std::string>()),
                       k.at("user_id").get<std::string>()};
    for (auto& p : km.validate().problems) v.fail("key: " + p);
  } catch (const std::exception& e) {
    v.fail(std::string("key: ") + e.what());
  }
  return v;
}

}  // namespace wmn::selftest
