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

// Command-line entry point. Exit status: 0 success, 1 verification failure,
// 2 usage or configuration error.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "wmn/wmn.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kVerifyFailed = 1;
constexpr int kUsage = 2;

using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string seed_label(std::uint64_t seed) { return "wmnsec/" + std::to_string(seed); }

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError(path + ": " + e.what());
  }
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path);
  out << text;
  if (!out) throw UsageError("cannot write " + path);
}

std::string fingerprint(const wmn::GroupParams& gp, const wmn::BigInt& y) {
  const std::size_t w = gp.element_bytes();
  return wmn::Hasher().part(gp.p, w).part(gp.q, w).part(gp.g, w).part(y, w).finish().hex().substr(0, 16);
}

// ---- params ---------------------------------------------------------------

struct ParamsArgs {
  std::size_t bit_len = 0;
  std::uint64_t seed = 1;
  std::string out;
  std::string user_id = "user-1";
};

int cmd_params(const ParamsArgs& a) {
  const wmn::GroupParams gp = wmn::gen_group_params(a.bit_len, seed_label(a.seed));
  wmn::Prg rng(a.seed, "params/key");
  const auto key = wmn::UserKeyMaterial::generate(a.user_id, gp, rng);
  const std::size_t w = gp.element_bytes();
  const json doc{{"params", wmn::to_json(gp)},
                 {"key", {{"user_id", key.user_id}, {"x", wmn::to_hex(key.x, w)}, {"y", wmn::to_hex(key.y, w)}}}};
  write_file(a.out, doc.dump(2) + "\n");
  std::cout << json{{"out", a.out}, {"fingerprint", fingerprint(gp, key.y)}}.dump() << "\n";
  return kOk;
}

// ---- ringsig --------------------------------------------------------------

struct RingArgs {
  std::size_t ring_size = 3;
  std::size_t bit_len = 32;
  std::size_t signer = 0;
  std::uint64_t seed = 1;
  std::string message = "hello";
  std::string tamper = "none";
};

int cmd_ringsig(const RingArgs& a) {
  if (a.signer >= a.ring_size) throw UsageError("--signer must be below --ring-size");
  if (a.bit_len % 2 != 0) throw UsageError("--bit-len must be even for ring signatures");
  const wmn::GroupParams gp = wmn::gen_group_params(a.bit_len, seed_label(a.seed));
  wmn::Prg rng(a.seed, "ringsig-demo");
  std::vector<wmn::UserKeyMaterial> users;
  std::vector<wmn::UserPublicKey> ring;
  for (std::size_t i = 0; i < a.ring_size; ++i) {
    users.push_back(wmn::UserKeyMaterial::generate("user-" + std::to_string(i + 1), gp, rng));
    ring.push_back(users.back().public_view());
  }
  const wmn::Digest k = wmn::Hasher().part(a.message).finish();
  const std::size_t w = gp.element_bytes();
  const wmn::BigInt V = rng.uniform(wmn::BigInt(1), gp.p);
  const wmn::BigInt R = rng.uniform(wmn::BigInt(1), gp.p);
  wmn::RingSignature sig = wmn::ring_sign(ring, a.signer, users[a.signer], k, V, R, rng, w);
  wmn::Digest verify_k = k;
  if (a.tamper == "alpha") {
    auto& alpha = sig.pairs[0].alpha;
    alpha = alpha % (gp.p - 1) + 1;
  } else if (a.tamper == "beta") {
    sig.pairs[0].beta = wmn::mod_floor(sig.pairs[0].beta + 1, gp.q);
  } else if (a.tamper == "v") {
    sig.v = sig.v ^ wmn::BitString(sig.b(), 1);
  } else if (a.tamper == "message") {
    verify_k = wmn::Hasher().part(a.message + "!").finish();
  }
  std::cout << json{{"type", "signature"}, {"message", a.message}, {"signature", wmn::to_json(sig)}}.dump() << "\n";
  const wmn::VerifyResult vr = wmn::ring_verify(sig, verify_k);
  std::cout << json{{"type", "verify"}, {"accepted", vr.accepted()}, {"reason", wmn::to_string(vr.reason)}}.dump()
            << "\n";
  if (!vr) {
    std::cerr << "verification failed: " << wmn::to_string(vr.reason) << "\n";
    return kVerifyFailed;
  }
  return kOk;
}

// ---- ake ------------------------------------------------------------------

struct AkeArgs {
  std::size_t ring_size = 3;
  std::size_t bit_len = 32;
  std::uint64_t seed = 1;
  std::string tamper = "none";
};

json frame_body(const wmn::Bytes& frame) {
  return json::parse(frame.begin() + static_cast<std::ptrdiff_t>(wmn::ake::kFramePrefix), frame.end());
}

int cmd_ake(const AkeArgs& a) {
  namespace ake = wmn::ake;
  if (a.bit_len % 2 != 0) throw UsageError("--bit-len must be even");
  const wmn::GroupParams gp = wmn::gen_group_params(a.bit_len, seed_label(a.seed));
  wmn::Prg rng(a.seed, "ake-demo");
  const auto server = ake::ServerKeyMaterial::generate(gp, rng);
  std::vector<wmn::UserKeyMaterial> users;
  std::vector<wmn::UserPublicKey> ring;
  wmn::KeyDirectory directory;
  for (std::size_t i = 0; i < a.ring_size; ++i) {
    users.push_back(wmn::UserKeyMaterial::generate("user-" + std::to_string(i + 1), gp, rng));
    ring.push_back(users.back().public_view());
    directory[ring.back().user_id] = ring.back();
  }
  const std::size_t signer = static_cast<std::size_t>(rng.uniform(0, a.ring_size));
  const std::size_t w = gp.element_bytes();
  std::cout << json{{"type", "setup"}, {"params", wmn::to_json(gp)}, {"server_y", wmn::to_hex(server.y, w)},
                    {"ring", [&] {
                       json ids = json::array();
                       for (const auto& m : ring) ids.push_back(m.user_id);
                       return ids;
                     }()}}
                   .dump()
            << "\n";

  auto reject = [](const char* by, ake::Reject why) {
    std::cout << json{{"type", "reject"}, {"by", by}, {"reason", ake::to_string(why)}}.dump() << "\n";
    std::cerr << "verification failed: " << ake::to_string(why) << "\n";
    return kVerifyFailed;
  };

  auto r1 = ake::client_round1(ring, signer, users[signer], server.public_view(), rng);
  if (a.tamper == "R") r1.message.sig.R = r1.message.sig.R % (gp.p - 1) + 1;
  if (a.tamper == "V") r1.message.sig.V = r1.message.sig.V % (gp.p - 1) + 1;
  if (a.tamper == "sigma") r1.message.sig.pairs[0].beta = wmn::mod_floor(r1.message.sig.pairs[0].beta + 1, gp.q);
  const wmn::Bytes f1 = ake::encode_message(r1.message);
  std::cout << json{{"type", "round1"}, {"frame_bytes", f1.size()}, {"message", frame_body(f1)}}.dump() << "\n";

  const auto m1 = std::get<ake::Round1Message>(ake::decode_message(f1, directory));
  ake::ReplayCache cache;
  const ake::ServerDecision d = ake::server_round2(m1.sig, m1.l, server, rng, &cache);
  if (!d.accepted()) return reject("server", d.verdict);
  ake::Round2Message out2 = d.response();
  if (a.tamper == "h") out2.h.bytes[0] ^= 1;
  if (a.tamper == "Y") out2.Y = out2.Y % (gp.p - 1) + 1;
  const wmn::Bytes f2 = ake::encode_message(out2);
  std::cout << json{{"type", "round2"}, {"frame_bytes", f2.size()}, {"message", frame_body(f2)}}.dump() << "\n";

  const auto m2 = std::get<ake::Round2Message>(ake::decode_message(f2, directory));
  ake::Round3Result r3 = ake::client_round3(r1.state, m2.h, m2.Y, m2.l);
  if (!r3.accepted()) return reject("client", r3.verdict);
  std::cout << json{{"type", "round3"}, {"accepted", true}, {"transcript_tag", r3.key->transcript_tag.hex()}}.dump()
            << "\n";
  std::cout << json{{"side", "client"}, {"K_s", wmn::to_hex(r3.key->K_s, w)}}.dump() << "\n";
  std::cout << json{{"side", "server"}, {"K_s", wmn::to_hex(d.K_s, w)}}.dump() << "\n";
  const bool equal = r3.key->K_s == d.K_s;
  std::cout << json{{"check", "K_s(client) = K_s(server)"}, {"equal", equal}}.dump() << "\n";
  if (!equal) {
    std::cerr << "verification failed: session keys differ\n";
    return kVerifyFailed;
  }
  return kOk;
}

// ---- sched ----------------------------------------------------------------

struct SchedArgs {
  std::string ts_kl;
  std::string timeout;
  std::int64_t cardinality = static_cast<std::int64_t>(wmn::keysched::kDefaultCardinality);
  std::string t_now;
  std::optional<std::string> t_last;
};

wmn::SimTime parse_time(const std::string& flag, const std::string& text) {
  try {
    return wmn::parse_seconds(text);
  } catch (const wmn::ParameterError& e) {
    throw UsageError(flag + ": " + e.what());
  }
}

int cmd_sched(const SchedArgs& a) {
  namespace ks = wmn::keysched;
  const auto ts_kl = parse_time("--ts-kl", a.ts_kl);
  const auto timeout = parse_time("--timeout", a.timeout);
  const auto t_now = parse_time("--t-now", a.t_now);
  if (timeout <= wmn::SimTime::zero()) throw UsageError("--timeout must be positive");
  if (t_now < ts_kl) throw UsageError("--t-now must not precede --ts-kl");
  if (a.cardinality < 1) throw UsageError("--cardinality must be at least 1");
  std::int64_t c = 0;
  if (a.t_last) {
    const auto t_last = parse_time("--t-last", *a.t_last);
    if (t_last < wmn::SimTime::zero()) throw UsageError("--t-last must be non-negative");
    c = ks::correction_factor(t_last, timeout);
  }
  std::cout << json{{"key_idx", ks::current_key_index(t_now, ts_kl, timeout)},
                    {"T_i", wmn::format_seconds(ks::remaining_validity(t_now, ts_kl, timeout))},
                    {"c", c},
                    {"trigger_index", ks::request_trigger_index(a.cardinality, c)}}
                   .dump()
            << "\n";
  return kOk;
}

// ---- simulate -------------------------------------------------------------

struct SimArgs {
  std::string config;
  std::string metrics;
};

int cmd_simulate(const SimArgs& a) {
  wmn::sim::ScenarioConfig cfg;
  try {
    cfg = wmn::sim::load_scenario(a.config);
  } catch (const wmn::sim::ConfigError& e) {
    for (const auto& issue : e.issues()) std::cerr << a.config << ": " << issue << "\n";
    return kUsage;
  }
  std::unique_ptr<std::ofstream> file;
  std::ostream* mirror = nullptr;
  if (a.metrics == "-") {
    mirror = &std::cout;
  } else if (!a.metrics.empty()) {
    file = std::make_unique<std::ofstream>(a.metrics, std::ios::binary);
    if (!*file) throw UsageError("cannot write " + a.metrics);
    mirror = file.get();
  }
  const auto summary = wmn::sim::run(cfg, mirror);
  std::cout << json{{"summary", summary.to_json()}}.dump() << "\n";
  return kOk;
}

// ---- selftest -------------------------------------------------------------

int cmd_selftest(const std::string& validate) {
  if (!validate.empty()) {
    const auto v = wmn::selftest::validate_key_file(read_json(validate));
    std::cout << json{{"file", validate}, {"ok", v.ok}, {"problems", v.problems}}.dump() << "\n";
    return v ? kOk : kVerifyFailed;
  }
  bool all = true;
  for (const auto& r : wmn::selftest::run_all()) {
    std::cout << (r.ok ? "PASS " : "FAIL ") << r.suite << ": " << r.name;
    if (!r.ok) std::cout << " (" << r.detail << ")";
    std::cout << "\n";
    all = all && r.ok;
  }
  return all ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anonymous authentication and key-list scheduling for wireless mesh networks"};
  app.require_subcommand(1);

  ParamsArgs params_args;
  auto* params = app.add_subcommand("params", "Group parameters and key pairs");
  params->require_subcommand(1);
  auto* params_gen = params->add_subcommand("gen", "Generate group parameters and a key pair");
  params_gen->add_option("--bit-len", params_args.bit_len, "Bit length of p")
      ->required()
      ->check(CLI::Range(std::size_t{16}, std::size_t{512}));
  params_gen->add_option("--seed", params_args.seed, "Deterministic seed");
  params_gen->add_option("--out", params_args.out, "Output JSON file")->required();
  params_gen->add_option("--user-id", params_args.user_id, "Identity bound to the key pair");

  RingArgs ring_args;
  auto* ringsig = app.add_subcommand("ringsig", "Ring signatures");
  ringsig->require_subcommand(1);
  auto* ring_demo = ringsig->add_subcommand("demo", "Sign and verify over a generated ring");
  ring_demo->add_option("--ring-size", ring_args.ring_size)->check(CLI::Range(1, 64));
  ring_demo->add_option("--bit-len", ring_args.bit_len)->check(CLI::Range(16, 512));
  ring_demo->add_option("--signer", ring_args.signer, "Signer position in the ring");
  ring_demo->add_option("--seed", ring_args.seed);
  ring_demo->add_option("--message", ring_args.message);
  ring_demo->add_option("--tamper", ring_args.tamper)
      ->check(CLI::IsMember({"none", "alpha", "beta", "v", "message"}));

  AkeArgs ake_args;
  auto* ake = app.add_subcommand("ake", "Anonymous key exchange");
  ake->require_subcommand(1);
  auto* ake_demo = ake->add_subcommand("demo", "Run the three rounds and print the transcript");
  ake_demo->add_option("--ring-size", ake_args.ring_size)->check(CLI::Range(1, 64));
  ake_demo->add_option("--bit-len", ake_args.bit_len)->check(CLI::Range(16, 512));
  ake_demo->add_option("--seed", ake_args.seed);
  ake_demo->add_option("--tamper", ake_args.tamper, "Corrupt one transcript field")
      ->check(CLI::IsMember({"none", "R", "V", "sigma", "h", "Y"}));

  SchedArgs sched_args;
  std::string t_last;
  auto* sched = app.add_subcommand("sched", "Key index, remaining validity and request trigger");
  sched->add_option("--ts-kl", sched_args.ts_kl, "List generation time, decimal seconds")->required();
  sched->add_option("--timeout", sched_args.timeout, "Key validity, decimal seconds")->required();
  sched->add_option("--cardinality", sched_args.cardinality);
  sched->add_option("--t-now", sched_args.t_now, "Local time, decimal seconds")->required();
  auto* t_last_opt = sched->add_option("--t-last", t_last, "Last response time, decimal seconds");

  SimArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Run a mesh scenario");
  simulate->add_option("--config", sim_args.config, "Scenario JSON")->required();
  simulate->add_option("--metrics", sim_args.metrics, "Metrics JSON-lines file, or - for stdout");

  std::string validate;
  auto* selftest = app.add_subcommand("selftest", "Run invariant suites or validate a key file");
  selftest->add_option("--validate", validate, "Parameter/key file to check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (params_gen->parsed()) return cmd_params(params_args);
    if (ring_demo->parsed()) return cmd_ringsig(ring_args);
    if (ake_demo->parsed()) return cmd_ake(ake_args);
    if (sched->parsed()) {
      if (t_last_opt->count() > 0) sched_args.t_last = t_last;
      return cmd_sched(sched_args);
    }
    if (simulate->parsed()) return cmd_simulate(sim_args);
    if (selftest->parsed()) return cmd_selftest(validate);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const wmn::ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kVerifyFailed;
  }
  return kUsage;
}
