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

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "wmn/meshsim/simulator.hpp"

#ifndef WMN_SCENARIO_DIR
#error "WMN_SCENARIO_DIR must point at the scenarios directory"
#endif

namespace wmn::sim {
namespace {

using nlohmann::json;

ScenarioConfig scenario(const std::string& name) {
  return load_scenario(std::string(WMN_SCENARIO_DIR) + "/" + name + ".json");
}

// as --wired D-- gw --L-- r1 --L-- r2 ... rk
json chain(int k, const std::string& L = "0.01", const std::string& D = "0.005") {
  json j;
  j["nodes"] = json::array({{{"id", "as"}, {"role", "AS"}}, {{"id", "gw"}, {"role", "IGW"}}});
  j["links"] = json::array({{{"a", "as"}, {"b", "gw"}, {"latency", D}, {"wired", true}}});
  std::string prev = "gw";
  for (int i = 1; i <= k; ++i) {
    const std::string id = "r" + std::to_string(i);
    j["nodes"].push_back({{"id", id}, {"role", "MR"}});
    j["links"].push_back({{"a", prev}, {"b", id}, {"latency", L}});
    prev = id;
  }
  j["keylist"] = {{"cardinality", 4}, {"timeout", "5"}};
  j["ake"] = {{"ring_size", 1}, {"bit_len", 32}};
  j["duration"] = "20";
  j["seed"] = 5;
  return j;
}

std::vector<const MetricsRecord*> events(const Simulator& sim, const std::string& node, const std::string& ev) {
  std::vector<const MetricsRecord*> out;
  for (const auto& r : sim.metrics().records()) {
    if (r.event == ev && (node.empty() || r.node == node)) out.push_back(&r);
  }
  return out;
}

TEST(Simulator, SmokeScenarioJoins) {
  Simulator sim(scenario("smoke"));
  const Summary s = sim.run();
  EXPECT_EQ(s.join_order, std::vector<std::string>{"mr1"});
  EXPECT_EQ(s.join_parent.at("mr1"), "gw");
  EXPECT_TRUE(s.rejected.empty());
  EXPECT_EQ(sim.phase("mr1"), JoinPhase::kFullMr);
  EXPECT_GT(s.auth_bytes, 0u);
  EXPECT_THROW(sim.run(), std::logic_error);
}

TEST(Simulator, DeterministicMetricsStream) {
  auto once = [] {
    std::ostringstream out;
    Simulator sim(scenario("fig8"), &out);
    const auto s = sim.run();
    return out.str() + s.to_json().dump();
  };
  const std::string a = once();
  EXPECT_EQ(a, once());
  EXPECT_GT(a.size(), 1000u);
}

TEST(Simulator, SeedChangesTheRun) {
  auto cfg = scenario("fig8");
  Simulator a(cfg);
  cfg.seed += 1;
  Simulator b(cfg);
  EXPECT_NE(a.run().to_json().dump(), b.run().to_json().dump());
}

TEST(Simulator, BootstrapWaveOrder) {
  Simulator sim(scenario("fig8"));
  const Summary s = sim.run();
  EXPECT_EQ(s.join_order, (std::vector<std::string>{"A", "B", "C", "D"}));
  EXPECT_EQ(s.join_parent.at("A"), "gw");
  EXPECT_EQ(s.join_parent.at("D"), "B");
  EXPECT_EQ(s.mc_auth_completed, 2u);
  EXPECT_EQ(s.mc_auth_failed, 0u);
  EXPECT_EQ(s.ake_checked, 2u);
  EXPECT_EQ(s.ake_agreed, 2u);
  ASSERT_EQ(s.flows.size(), 1u);
  EXPECT_GT(s.flows[0].delivered, 0u);
}

TEST(Simulator, ChainJoinLatencyClosedForm) {
  // Two exchanges with the parent, two with the server, then one request and
  // one list delivery: 4L + 6 * (k L + D) for the router k hops out.
  const SimTime L = std::chrono::milliseconds(10);
  const SimTime D = std::chrono::milliseconds(5);
  Simulator sim(scenario_from_json(chain(3)));
  const Summary s = sim.run();
  ASSERT_EQ(s.join_order, (std::vector<std::string>{"r1", "r2", "r3"}));
  for (int k = 1; k <= 3; ++k) {
    const std::string id = "r" + std::to_string(k);
    const auto starts = events(sim, id, event::kJoinStart);
    ASSERT_EQ(starts.size(), 1u);
    EXPECT_EQ(s.join_times.at(id) - starts[0]->time, 4 * L + 6 * (k * L + D)) << id;
    const auto phases = events(sim, id, event::kJoinPhaseComplete);
    ASSERT_EQ(phases.size(), 3u);
    EXPECT_EQ(phases[0]->value, 1);
    EXPECT_EQ(phases[1]->value, 2);
    EXPECT_EQ(phases[2]->value, 3);
  }
  // Gateway: one request and one delivery over the wired link.
  EXPECT_EQ(s.join_times.at("gw"), 2 * D);
}

TEST(Simulator, ResponseDelayAddsToJoin) {
  auto j = chain(1);
  j["keylist"]["response_delay"] = "0.25";
  Simulator sim(scenario_from_json(j));
  const Summary s = sim.run();
  const auto starts = events(sim, "r1", event::kJoinStart);
  ASSERT_EQ(starts.size(), 1u);
  EXPECT_EQ(s.join_times.at("r1") - starts[0]->time,
            10 * std::chrono::milliseconds(10) + 6 * std::chrono::milliseconds(5) + std::chrono::milliseconds(250));
}

TEST(Simulator, FirstKeyRequestRelaysLaterOnesDirect) {
  Simulator sim(scenario_from_json(chain(1)));
  sim.run();
  const auto reqs = events(sim, "r1", event::kKeyRequest);
  ASSERT_GE(reqs.size(), 2u);
  EXPECT_EQ(reqs[0]->note, "relay-via-peer");
  for (std::size_t i = 1; i < reqs.size(); ++i) EXPECT_EQ(reqs[i]->note, "direct-backbone");
}

TEST(Simulator, ParentLinkDownRestartsJoin) {
  auto j = chain(1);
  j["nodes"].push_back({{"id", "r2"}, {"role", "MR"}});
  j["links"].push_back({{"a", "gw"}, {"b", "r2"}, {"latency", "0.01"}});
  j["links"].push_back({{"a", "r1"}, {"b", "r2"}, {"latency", "0.01"}});
  // r2 picks gw (one hop to the server); cut it while r2 is still joining.
  j["nodes"][3]["start"] = "1";
  j["link_events"] = json::array({{{"time", "1.015"}, {"a", "gw"}, {"b", "r2"}, {"up", false}}});
  Simulator sim(scenario_from_json(j));
  const Summary s = sim.run();
  const auto restarts = events(sim, "r2", event::kJoinRestart);
  ASSERT_FALSE(restarts.empty());
  EXPECT_EQ(restarts[0]->note, "parent-link-down");
  EXPECT_EQ(s.join_parent.at("r2"), "r1");
  EXPECT_EQ(sim.phase("r2"), JoinPhase::kFullMr);
}

class InvalidCert : public ::testing::TestWithParam<std::string> {};

TEST_P(InvalidCert, RouterRejected) {
  auto j = chain(2);
  j["nodes"][2]["invalid_cert"] = GetParam();
  Simulator sim(scenario_from_json(j));
  const Summary s = sim.run();
  EXPECT_EQ(s.rejected, std::vector<std::string>{"r1"});
  EXPECT_EQ(s.join_times.count("r1"), 0u);
  // r2 has no other way in.
  EXPECT_EQ(s.join_times.count("r2"), 0u);
  const auto rej = events(sim, "r1", event::kJoinRejected);
  ASSERT_EQ(rej.size(), 1u);
  EXPECT_EQ(rej[0]->note, GetParam() + "-certificate");
  EXPECT_NE(sim.phase("r1"), JoinPhase::kFullMr);
}

INSTANTIATE_TEST_SUITE_P(Purposes, InvalidCert, ::testing::Values("access", "server"));

json with_client(json j, std::size_t ring, std::size_t extra) {
  j["nodes"].push_back({{"id", "mc1"}, {"role", "MC"}, {"attach", "r1"}, {"start", "2"}});
  j["links"].push_back({{"a", "r1"}, {"b", "mc1"}, {"latency", "0.002"}});
  j["ake"] = {{"ring_size", ring}, {"bit_len", 32}, {"extra_users", extra}};
  return j;
}

TEST(Simulator, ClientWithSingletonRing) {
  Simulator sim(scenario_from_json(with_client(chain(1), 1, 0)));
  const Summary s = sim.run();
  EXPECT_EQ(s.mc_auth_completed, 1u);
  EXPECT_EQ(s.ake_agreed, 1u);
  ASSERT_TRUE(sim.session_key("mc1").has_value());
  EXPECT_EQ(sim.phase("mc1"), JoinPhase::kFullMr);
}

TEST(Simulator, RingTooSmallFailsClient) {
  Simulator sim(scenario_from_json(with_client(chain(1), 3, 0)));
  const Summary s = sim.run();
  EXPECT_EQ(s.mc_auth_failed, 1u);
  const auto f = events(sim, "mc1", event::kMcAuthFailed);
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0]->note, "ring-too-small");
}

TEST(Simulator, SignatureBytesGrowWithRing) {
  std::int64_t prev = 0;
  for (std::size_t n = 1; n <= 8; ++n) {
    Simulator sim(scenario_from_json(with_client(chain(1), n, 8)));
    sim.run();
    const auto sig = events(sim, "mc1", event::kSigBytes);
    ASSERT_EQ(sig.size(), 1u) << n;
    EXPECT_EQ(sig[0]->ring_size, n);
    EXPECT_GT(sig[0]->value, prev) << n;
    prev = sig[0]->value;
  }
}

TEST(Simulator, TotalLossFailsWithoutHanging) {
  auto j = with_client(chain(1), 1, 0);
  j["links"][2]["loss"] = 1.0;
  Simulator sim(scenario_from_json(j));
  const Summary s = sim.run();
  EXPECT_EQ(s.mc_auth_completed, 0u);
  EXPECT_EQ(s.mc_auth_failed, 1u);
  EXPECT_EQ(events(sim, "mc1", event::kMcAuthFailed)[0]->note, "timeout");
}

TEST(Simulator, PacketConservation) {
  for (const char* name : {"fig8", "rotation", "baseline-static-key"}) {
    Simulator sim(scenario(name));
    const Summary s = sim.run();
    for (const auto& f : s.flows) {
      EXPECT_EQ(f.sent, f.delivered + f.dropped()) << name << " " << f.src << "->" << f.dst;
    }
  }
}

TEST(Simulator, LossCompoundsPerHop) {
  auto j = chain(3);
  for (std::size_t i = 1; i < j["links"].size(); ++i) j["links"][i]["loss"] = 0.05;
  j["keylist"] = {{"cardinality", 16}, {"timeout", "10"}, {"rotation", false}};
  j["traffic"] = json::array({{{"src", "gw"}, {"dst", "r3"}, {"rate", 400}, {"start", "1"}, {"stop", "40"}}});
  j["duration"] = "40";
  Simulator sim(scenario_from_json(j));
  const Summary s = sim.run();
  const auto& f = s.flows.at(0);
  ASSERT_GE(f.sent, 10000u);
  const double p = std::pow(0.95, 3);
  const double n = static_cast<double>(f.sent);
  const double ratio = static_cast<double>(f.delivered) / n;
  EXPECT_NEAR(ratio, p, 3 * std::sqrt(p * (1 - p) / n));
  EXPECT_EQ(f.drops.count(DropCause::kKeyMismatch), 0u);
}

TEST(Simulator, PartitionScenarios) {
  const Summary neg = Simulator(scenario("partition-negative")).run();
  const Summary pos = Simulator(scenario("partition-positive")).run();
  EXPECT_GE(neg.partition_alerts, 1u);
  EXPECT_EQ(pos.partition_alerts, 0u);
}

TEST(Simulator, CorrectionFactorMeasured) {
  Simulator sim(scenario("partition-positive"));
  sim.run();
  EXPECT_EQ(sim.schedule("r1").correction(), 2);
  EXPECT_EQ(sim.schedule("r1").trigger_index(), 14);
}

TEST(Simulator, RotationOnlyAddsBoundaryDrops) {
  const Summary rot = Simulator(scenario("rotation")).run();
  const Summary base = Simulator(scenario("baseline-static-key")).run();
  ASSERT_EQ(rot.flows.size(), base.flows.size());
  std::uint64_t mismatches = 0;
  for (std::size_t i = 0; i < rot.flows.size(); ++i) {
    EXPECT_EQ(rot.flows[i].sent, base.flows[i].sent);
    EXPECT_EQ(base.flows[i].dropped(), 0u);
    auto it = rot.flows[i].drops.find(DropCause::kKeyMismatch);
    if (it != rot.flows[i].drops.end()) mismatches += it->second;
    EXPECT_EQ(rot.flows[i].drops.count(DropCause::kLinkLoss), 0u);
  }
  EXPECT_GT(mismatches, 0u);
}

TEST(Simulator, RotationDropsSitAtSlotBoundaries) {
  // Server-issued lists sit on a grid of `timeout` in server time, so every
  // rotate boundary is a multiple of the timeout.
  Simulator sim(scenario("rotation"));
  sim.run();
  const auto& kl = sim.config().keylist;
  std::size_t drops = 0;
  for (const auto* r : events(sim, "", event::kPktDropped)) {
    ++drops;
    ASSERT_EQ(r->cause, DropCause::kKeyMismatch);
    const SimTime phase = r->time % kl.timeout;
    EXPECT_LE(std::min(phase, kl.timeout - phase), kl.delta()) << format_seconds(r->time);
  }
  EXPECT_GT(drops, 0u);
}

TEST(Simulator, RoutersAuthenticateViaAke) {
  auto j = chain(2);
  j["ake"]["mr_phase2"] = "ake";
  j["ake"]["ring_size"] = 2;
  Simulator sim(scenario_from_json(j));
  const Summary s = sim.run();
  EXPECT_EQ(s.join_order, (std::vector<std::string>{"r1", "r2"}));
  EXPECT_EQ(s.ake_agreed, 2u);
  EXPECT_TRUE(sim.session_key("r1").has_value());
  EXPECT_FALSE(events(sim, "r1", event::kSigBytes).empty());
}

TEST(Config, ErrorsCarryJsonPaths) {
  auto j = chain(1);
  j["links"][1]["latency"] = "-1";
  j["links"].push_back({{"a", "r1"}, {"b", "ghost"}, {"latency", "0.01"}});
  try {
    scenario_from_json(j);
    FAIL();
  } catch (const ConfigError& e) {
    const auto& is = e.issues();
    auto has = [&](const std::string& prefix) {
      return std::any_of(is.begin(), is.end(), [&](const std::string& s) { return s.rfind(prefix, 0) == 0; });
    };
    EXPECT_TRUE(has("$.links[1].latency")) << e.what();
    EXPECT_TRUE(has("$.links[2].b")) << e.what();
  }
  auto k = chain(1);
  k["bogus"] = 1;
  k["keylist"]["timeout"] = "soon";
  try {
    scenario_from_json(k);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("$.bogus"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("$.keylist.timeout"), std::string::npos);
  }
  auto m = chain(1);
  m["links"][0]["wired"] = false;
  EXPECT_THROW(scenario_from_json(m), ConfigError);
  EXPECT_THROW(load_scenario("/nonexistent/scenario.json"), ConfigError);
}

TEST(Config, ProgrammaticConfigValidated) {
  ScenarioConfig cfg;
  cfg.duration = seconds(1);
  EXPECT_THROW(Simulator{cfg}, ConfigError);
}

}  // namespace
}  // namespace wmn::sim
