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
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wmn/keysched.hpp"
#include "wmn/simtime.hpp"

namespace wmn::sim {

enum class Role { kAS, kIGW, kMR, kMC };

inline const char* to_string(Role r) {
  switch (r) {
    case Role::kAS: return "AS";
    case Role::kIGW: return "IGW";
    case Role::kMR: return "MR";
    case Role::kMC: return "MC";
  }
  return "?";
}

enum class CertDefect { kNone, kAccess, kServer };

struct NodeConfig {
  std::string id;
  Role role = Role::kMR;
  /// MR: when the node starts looking for a parent. MC: when it authenticates.
  SimTime start{0};
  /// MC: the router it attaches to. Empty means any joined neighbour.
  std::string attach;
  std::optional<SimTime> clock_offset;
  CertDefect invalid_cert = CertDefect::kNone;
};

struct LinkConfig {
  std::string a;
  std::string b;
  SimTime latency{0};
  double loss = 0.0;
  bool wired = false;
};

struct LinkEvent {
  SimTime time{0};
  std::string a;
  std::string b;
  bool up = false;
};

struct KeyListConfig {
  std::int64_t cardinality = static_cast<std::int64_t>(keysched::kDefaultCardinality);
  SimTime timeout = keysched::kDefaultTimeout;
  /// Receivers accept the neighbouring slot's key this close to a boundary.
  /// Defaults to timeout / 20.
  std::optional<SimTime> skew_window;
  /// Clock offsets not given per node are drawn from [-max/2, max/2].
  SimTime max_clock_skew{0};
  /// Extra time the server holds every key-list response.
  SimTime response_delay{0};
  bool rotation = true;
  bool correction = true;

  SimTime delta() const { return skew_window.value_or(timeout / 20); }
};

struct AkeConfig {
  std::size_t ring_size = 3;
  std::size_t bit_len = 32;
  /// Registered identities besides the mesh clients, available as ring decoys.
  std::size_t extra_users = 0;
  /// How routers authenticate to the server in their second join phase.
  bool mr_phase2_via_ake = false;
};

struct FlowConfig {
  std::string src;
  std::string dst;
  std::size_t packet_size = 512;
  /// Packets per second.
  double rate = 10.0;
  SimTime start{0};
  SimTime stop{0};
};

struct ScenarioConfig {
  std::vector<NodeConfig> nodes;
  std::vector<LinkConfig> links;
  std::vector<LinkEvent> link_events;
  KeyListConfig keylist;
  AkeConfig ake;
  std::vector<FlowConfig> traffic;
  SimTime duration{0};
  std::uint64_t seed = 1;
};

/// Rejected scenario; `issues` holds one "json.path: problem" line each.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> issues)
      : std::runtime_error(join(issues)), issues_(std::move(issues)) {}
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string out = "invalid scenario:";
    for (const auto& i : issues) out += "\n  " + i;
    return out;
  }
  std::vector<std::string> issues_;
};

/// Semantic checks shared by the JSON loader and programmatic configs.
inline std::vector<std::string> validate(const ScenarioConfig& cfg) {
  std::vector<std::string> issues;
  std::map<std::string, Role> roles;
  int servers = 0;
  for (std::size_t i = 0; i < cfg.nodes.size(); ++i) {
    const auto& n = cfg.nodes[i];
    const std::string path = "$.nodes[" + std::to_string(i) + "]";
    if (n.id.empty()) issues.push_back(path + ".id: must be non-empty");
    if (!roles.emplace(n.id, n.role).second) issues.push_back(path + ".id: duplicate id '" + n.id + "'");
    if (n.role == Role::kAS) ++servers;
    if (n.start < SimTime::zero()) issues.push_back(path + ".start: must be >= 0");
  }
  if (servers != 1) issues.push_back("$.nodes: exactly one AS required, found " + std::to_string(servers));
  for (std::size_t i = 0; i < cfg.nodes.size(); ++i) {
    const auto& n = cfg.nodes[i];
    if (!n.attach.empty() && !roles.count(n.attach)) {
      issues.push_back("$.nodes[" + std::to_string(i) + "].attach: unknown node '" + n.attach + "'");
    }
  }
  bool igw_wired = false;
  std::set<std::pair<std::string, std::string>> seen_links;
  for (std::size_t i = 0; i < cfg.links.size(); ++i) {
    const auto& l = cfg.links[i];
    const std::string path = "$.links[" + std::to_string(i) + "]";
    if (!roles.count(l.a)) issues.push_back(path + ".a: unknown node '" + l.a + "'");
    if (!roles.count(l.b)) issues.push_back(path + ".b: unknown node '" + l.b + "'");
    if (l.a == l.b) issues.push_back(path + ": self link");
    if (l.latency <= SimTime::zero()) issues.push_back(path + ".latency: must be > 0");
    if (!(l.loss >= 0.0 && l.loss <= 1.0)) issues.push_back(path + ".loss: must be in [0, 1]");
    auto key = std::minmax(l.a, l.b);
    if (!seen_links.emplace(key.first, key.second).second) issues.push_back(path + ": duplicate link");
    if (roles.count(l.a) && roles.count(l.b)) {
      const Role ra = roles[l.a], rb = roles[l.b];
      if ((ra == Role::kAS && rb == Role::kIGW) || (ra == Role::kIGW && rb == Role::kAS)) {
        igw_wired = igw_wired || l.wired;
      }
    }
  }
  if (!igw_wired) issues.push_back("$.links: at least one IGW must have a wired link to the AS");
  for (std::size_t i = 0; i < cfg.link_events.size(); ++i) {
    const auto& e = cfg.link_events[i];
    const std::string path = "$.link_events[" + std::to_string(i) + "]";
    auto key = std::minmax(e.a, e.b);
    if (!seen_links.count({key.first, key.second})) issues.push_back(path + ": no such link");
    if (e.time < SimTime::zero()) issues.push_back(path + ".time: must be >= 0");
  }
  if (cfg.keylist.cardinality < 1) issues.push_back("$.keylist.cardinality: must be >= 1");
  if (cfg.keylist.timeout <= SimTime::zero()) issues.push_back("$.keylist.timeout: must be > 0");
  if (cfg.keylist.delta() < SimTime::zero()) issues.push_back("$.keylist.skew_window: must be >= 0");
  if (cfg.keylist.max_clock_skew < SimTime::zero()) issues.push_back("$.keylist.max_clock_skew: must be >= 0");
  if (cfg.keylist.response_delay < SimTime::zero()) issues.push_back("$.keylist.response_delay: must be >= 0");
  if (cfg.ake.ring_size < 1) issues.push_back("$.ake.ring_size: must be >= 1");
  if (cfg.ake.bit_len < 16 || cfg.ake.bit_len % 2 != 0 || cfg.ake.bit_len > 512) {
    issues.push_back("$.ake.bit_len: must be even and in [16, 512]");
  }
  for (std::size_t i = 0; i < cfg.traffic.size(); ++i) {
    const auto& f = cfg.traffic[i];
    const std::string path = "$.traffic[" + std::to_string(i) + "]";
    if (!roles.count(f.src)) issues.push_back(path + ".src: unknown node '" + f.src + "'");
    if (!roles.count(f.dst)) issues.push_back(path + ".dst: unknown node '" + f.dst + "'");
    if (f.src == f.dst) issues.push_back(path + ": src equals dst");
    if (!(f.rate > 0.0)) issues.push_back(path + ".rate: must be > 0");
    if (f.stop < f.start) issues.push_back(path + ".stop: must be >= start");
  }
  if (cfg.duration <= SimTime::zero()) issues.push_back("$.duration: must be > 0");
  return issues;
}

namespace detail {

class Reader {
 public:
  std::vector<std::string> issues;

  SimTime time(const nlohmann::json& j, const std::string& path) {
    try {
      if (j.is_string()) return parse_seconds(j.get<std::string>());
      if (j.is_number_integer()) return seconds(j.get<std::int64_t>());
      if (j.is_number()) return from_double_seconds(j.get<double>());
    } catch (const std::exception& e) {
      issues.push_back(path + ": " + e.what());
      return SimTime{0};
    }
    issues.push_back(path + ": expected decimal seconds");
    return SimTime{0};
  }

  template <typename T>
  T value(const nlohmann::json& obj, const char* key, const std::string& path, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
      return obj.at(key).get<T>();
    } catch (const std::exception&) {
      issues.push_back(path + "." + key + ": wrong type");
      return fallback;
    }
  }

  std::string required_string(const nlohmann::json& obj, const char* key, const std::string& path) {
    if (!obj.contains(key) || !obj.at(key).is_string()) {
      issues.push_back(path + "." + key + ": required string");
      return {};
    }
    return obj.at(key).get<std::string>();
  }

  void unknown_keys(const nlohmann::json& obj, const std::string& path, std::set<std::string> known) {
    if (!obj.is_object()) {
      issues.push_back(path + ": expected object");
      return;
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!known.count(it.key())) issues.push_back(path + "." + it.key() + ": unknown field");
    }
  }
};

}  // namespace detail

inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  detail::Reader rd;
  ScenarioConfig cfg;
  if (!j.is_object()) throw ConfigError({"$: scenario must be a JSON object"});
  rd.unknown_keys(j, "$", {"nodes", "links", "link_events", "keylist", "ake", "traffic", "duration", "seed"});

  if (!j.contains("nodes") || !j["nodes"].is_array()) {
    rd.issues.push_back("$.nodes: required array");
  } else {
    for (std::size_t i = 0; i < j["nodes"].size(); ++i) {
      const auto& n = j["nodes"][i];
      const std::string path = "$.nodes[" + std::to_string(i) + "]";
      if (!n.is_object()) {
        rd.issues.push_back(path + ": expected object");
        continue;
      }
      rd.unknown_keys(n, path, {"id", "role", "start", "attach", "clock_offset", "invalid_cert"});
      NodeConfig nc;
      nc.id = rd.required_string(n, "id", path);
      const std::string role = rd.required_string(n, "role", path);
      if (role == "AS") nc.role = Role::kAS;
      else if (role == "IGW") nc.role = Role::kIGW;
      else if (role == "MR") nc.role = Role::kMR;
      else if (role == "MC") nc.role = Role::kMC;
      else if (!role.empty()) rd.issues.push_back(path + ".role: must be one of AS, IGW, MR, MC");
      if (n.contains("start")) nc.start = rd.time(n["start"], path + ".start");
      nc.attach = rd.value<std::string>(n, "attach", path, "");
      if (n.contains("clock_offset")) nc.clock_offset = rd.time(n["clock_offset"], path + ".clock_offset");
      const std::string bad = rd.value<std::string>(n, "invalid_cert", path, "");
      if (bad == "access") nc.invalid_cert = CertDefect::kAccess;
      else if (bad == "server") nc.invalid_cert = CertDefect::kServer;
      else if (!bad.empty()) rd.issues.push_back(path + ".invalid_cert: must be 'access' or 'server'");
      cfg.nodes.push_back(std::move(nc));
    }
  }

  if (j.contains("links")) {
    if (!j["links"].is_array()) rd.issues.push_back("$.links: expected array");
    else
      for (std::size_t i = 0; i < j["links"].size(); ++i) {
        const auto& l = j["links"][i];
        const std::string path = "$.links[" + std::to_string(i) + "]";
        rd.unknown_keys(l, path, {"a", "b", "latency", "loss", "wired"});
        LinkConfig lc;
        lc.a = rd.required_string(l, "a", path);
        lc.b = rd.required_string(l, "b", path);
        if (!l.contains("latency")) rd.issues.push_back(path + ".latency: required");
        else lc.latency = rd.time(l["latency"], path + ".latency");
        lc.loss = rd.value<double>(l, "loss", path, 0.0);
        lc.wired = rd.value<bool>(l, "wired", path, false);
        cfg.links.push_back(std::move(lc));
      }
  }

  if (j.contains("link_events") && j["link_events"].is_array()) {
    for (std::size_t i = 0; i < j["link_events"].size(); ++i) {
      const auto& e = j["link_events"][i];
      const std::string path = "$.link_events[" + std::to_string(i) + "]";
      rd.unknown_keys(e, path, {"time", "a", "b", "up"});
      LinkEvent ev;
      ev.time = e.contains("time") ? rd.time(e["time"], path + ".time") : SimTime{0};
      ev.a = rd.required_string(e, "a", path);
      ev.b = rd.required_string(e, "b", path);
      ev.up = rd.value<bool>(e, "up", path, false);
      cfg.link_events.push_back(std::move(ev));
    }
  }

  if (j.contains("keylist")) {
    const auto& k = j["keylist"];
    const std::string path = "$.keylist";
    rd.unknown_keys(k, path, {"cardinality", "timeout", "skew_window", "max_clock_skew",
                              "response_delay", "rotation", "correction"});
    cfg.keylist.cardinality = rd.value<std::int64_t>(k, "cardinality", path, cfg.keylist.cardinality);
    if (k.contains("timeout")) cfg.keylist.timeout = rd.time(k["timeout"], path + ".timeout");
    if (k.contains("skew_window")) cfg.keylist.skew_window = rd.time(k["skew_window"], path + ".skew_window");
    if (k.contains("max_clock_skew")) cfg.keylist.max_clock_skew = rd.time(k["max_clock_skew"], path + ".max_clock_skew");
    if (k.contains("response_delay")) cfg.keylist.response_delay = rd.time(k["response_delay"], path + ".response_delay");
    cfg.keylist.rotation = rd.value<bool>(k, "rotation", path, true);
    cfg.keylist.correction = rd.value<bool>(k, "correction", path, true);
  }

  if (j.contains("ake")) {
    const auto& a = j["ake"];
    const std::string path = "$.ake";
    rd.unknown_keys(a, path, {"ring_size", "bit_len", "extra_users", "mr_phase2"});
    cfg.ake.ring_size = rd.value<std::size_t>(a, "ring_size", path, cfg.ake.ring_size);
    cfg.ake.bit_len = rd.value<std::size_t>(a, "bit_len", path, cfg.ake.bit_len);
    cfg.ake.extra_users = rd.value<std::size_t>(a, "extra_users", path, 0);
    const std::string mode = rd.value<std::string>(a, "mr_phase2", path, "certificate");
    if (mode == "ake") cfg.ake.mr_phase2_via_ake = true;
    else if (mode != "certificate") rd.issues.push_back(path + ".mr_phase2: must be 'certificate' or 'ake'");
  }

  if (j.contains("traffic")) {
    if (!j["traffic"].is_array()) rd.issues.push_back("$.traffic: expected array");
    else
      for (std::size_t i = 0; i < j["traffic"].size(); ++i) {
        const auto& f = j["traffic"][i];
        const std::string path = "$.traffic[" + std::to_string(i) + "]";
        rd.unknown_keys(f, path, {"src", "dst", "packet_size", "rate", "start", "stop"});
        FlowConfig fc;
        fc.src = rd.required_string(f, "src", path);
        fc.dst = rd.required_string(f, "dst", path);
        fc.packet_size = rd.value<std::size_t>(f, "packet_size", path, fc.packet_size);
        fc.rate = rd.value<double>(f, "rate", path, fc.rate);
        if (f.contains("start")) fc.start = rd.time(f["start"], path + ".start");
        if (f.contains("stop")) fc.stop = rd.time(f["stop"], path + ".stop");
        cfg.traffic.push_back(std::move(fc));
      }
  }

  if (!j.contains("duration")) rd.issues.push_back("$.duration: required");
  else cfg.duration = rd.time(j["duration"], "$.duration");
  cfg.seed = rd.value<std::uint64_t>(j, "seed", "$", 1);

  if (rd.issues.empty()) rd.issues = validate(cfg);
  if (!rd.issues.empty()) throw ConfigError(std::move(rd.issues));
  return cfg;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"$: cannot open scenario file '" + path + "'"});
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError({"$: JSON parse error at byte " + std::to_string(e.byte) + ": " + e.what()});
  }
  return scenario_from_json(j);
}

}  // namespace wmn::sim
