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

// Discrete-event model of the mesh: routers join outward from the gateway in
// three phases, clients authenticate anonymously through them, and backbone
// hops check key-list tags.
//
// Timing model. A control exchange is a request/response pair routed over
// the current backbone; a message's delay is the sum of hop latencies and
// each hop loses it independently. Unanswered requests are retried up to
// kAttempts times; attempt k waits (2 * path + first_hop) * 2^k.
//
// Join latency on a lossless path with parent-link latency L and one-way
// parent-to-server latency D is 10L + 6D plus the key-list response delay:
// Phase I is two exchanges with the parent (4L), Phase II two with the
// server (4(L + D)), Phase III one request to the server and the list back
// (2(L + D)).

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "wmn/anonake.hpp"
#include "wmn/keysched.hpp"
#include "wmn/meshsim/backbone.hpp"
#include "wmn/meshsim/certificate.hpp"
#include "wmn/meshsim/config.hpp"
#include "wmn/meshsim/events.hpp"
#include "wmn/meshsim/metrics.hpp"
#include "wmn/numtheory.hpp"
#include "wmn/prg.hpp"
#include "wmn/ringsig.hpp"
#include "wmn/simtime.hpp"
#include "wmn/wire.hpp"

namespace wmn::sim {

inline constexpr int kAttempts = 3;

enum class JoinPhase { kDetached, kPhase1Client, kPhase2Authenticating, kPhase3KeyList, kFullMr };

inline const char* to_string(JoinPhase p) {
  switch (p) {
    case JoinPhase::kDetached: return "DETACHED";
    case JoinPhase::kPhase1Client: return "PHASE1-CLIENT";
    case JoinPhase::kPhase2Authenticating: return "PHASE2-AUTHENTICATING";
    case JoinPhase::kPhase3KeyList: return "PHASE3-KEYLIST";
    case JoinPhase::kFullMr: return "FULL-MR";
  }
  return "?";
}

struct FlowSummary {
  std::string src;
  std::string dst;
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::map<DropCause, std::uint64_t> drops;

  std::uint64_t dropped() const {
    std::uint64_t n = 0;
    for (const auto& [cause, k] : drops) n += k;
    return n;
  }

  /// delivered / sent to six decimals, truncated; "1.000000" for idle flows.
  std::string delivery_ratio() const {
    const std::uint64_t scaled = sent == 0 ? 1000000 : delivered * 1000000 / sent;
    std::string frac = std::to_string(scaled % 1000000);
    frac.insert(0, 6 - frac.size(), '0');
    return std::to_string(scaled / 1000000) + "." + frac;
  }
};

struct Summary {
  std::map<std::string, SimTime> join_times;
  std::vector<std::string> join_order;
  std::map<std::string, std::string> join_parent;
  std::vector<std::string> rejected;
  std::uint64_t partition_alerts = 0;
  std::uint64_t auth_bytes = 0;
  std::uint64_t mc_auth_completed = 0;
  std::uint64_t mc_auth_failed = 0;
  std::uint64_t ake_checked = 0;
  std::uint64_t ake_agreed = 0;
  std::vector<FlowSummary> flows;
  std::uint64_t events = 0;

  nlohmann::json to_json() const {
    nlohmann::json times = nlohmann::json::object();
    for (const auto& [id, t] : join_times) times[id] = format_seconds(t);
    nlohmann::json flow_list = nlohmann::json::array();
    for (const auto& f : flows) {
      nlohmann::json drops = nlohmann::json::object();
      for (DropCause c : {DropCause::kLinkLoss, DropCause::kNoKey, DropCause::kKeyMismatch}) {
        auto it = f.drops.find(c);
        drops[to_string(c)] = it == f.drops.end() ? 0 : it->second;
      }
      flow_list.push_back({{"src", f.src},
                           {"dst", f.dst},
                           {"sent", f.sent},
                           {"delivered", f.delivered},
                           {"drops", drops},
                           {"delivery_ratio", f.delivery_ratio()}});
    }
    return {{"join_times", times},
            {"join_order", join_order},
            {"join_parent", join_parent},
            {"rejected", rejected},
            {"partition_alerts", partition_alerts},
            {"auth_bytes", auth_bytes},
            {"mc_auth", {{"completed", mc_auth_completed}, {"failed", mc_auth_failed}}},
            {"ake_key_agreement", {{"checked", ake_checked}, {"agreed", ake_agreed}}},
            {"flows", flow_list},
            {"events", events}};
  }
};

class Simulator {
 public:
  explicit Simulator(ScenarioConfig cfg, std::ostream* metrics_mirror = nullptr)
      : cfg_(std::move(cfg)), log_(metrics_mirror), root_(cfg_.seed, "meshsim") {
    if (auto issues = validate(cfg_); !issues.empty()) throw ConfigError(std::move(issues));
    setup();
  }

  Summary run() {
    if (ran_) throw std::logic_error("Simulator::run called twice");
    ran_ = true;
    start();
    q_.run_until(cfg_.duration);
    // Let packets already in flight land; everything else is frozen.
    draining_ = true;
    q_.run_until(cfg_.duration + drain_window_);
    return summarize();
  }

  const MetricsLog& metrics() const { return log_; }
  const ScenarioConfig& config() const { return cfg_; }

  JoinPhase phase(const std::string& id) const { return nodes_.at(index_.at(id)).phase; }
  SimTime clock_offset(const std::string& id) const { return nodes_.at(index_.at(id)).offset; }
  const keysched::KeyListSchedule& schedule(const std::string& id) const {
    return nodes_.at(index_.at(id)).sched;
  }
  std::optional<ake::SessionKey> session_key(const std::string& id) const {
    return nodes_.at(index_.at(id)).session;
  }
  const GroupParams& group() const { return server_.params; }

 private:
  struct Node {
    NodeConfig cfg;
    SimTime offset{0};
    JoinPhase phase = JoinPhase::kDetached;
    int parent = -1;  // MR: join parent. MC: access router.
    std::uint64_t epoch = 0;
    keysched::KeyListSchedule sched;
    std::uint64_t tick_gen = 0;
    std::optional<SimTime> full_time;
    bool rejected = false;
    bool waiting = false;
    bool started = false;
    BigInt x;
    BigInt y;
    Certificate access_cert;
    Certificate server_cert;
    std::optional<UserKeyMaterial> user;
    std::optional<ake::SessionKey> session;
  };

  struct Link {
    SimTime latency{0};
    double loss = 0.0;
    bool wired = false;
    bool up = true;
  };

  struct Reply {
    std::size_t bytes = 0;
    std::function<void()> on_arrive;
  };

  struct Request {
    std::size_t bytes = 0;
    bool auth = false;
    std::function<std::optional<Reply>()> serve;
  };

  struct Packet {
    std::size_t flow = 0;
    std::vector<int> path;
  };

  // ---- setup -------------------------------------------------------------

  void setup() {
    for (const auto& nc : cfg_.nodes) {
      index_[nc.id] = static_cast<int>(nodes_.size());
      Node n;
      n.cfg = nc;
      n.sched = keysched::KeyListSchedule({cfg_.keylist.correction});
      if (nc.role == Role::kAS) {
        as_ = static_cast<int>(nodes_.size());
      } else if (nc.clock_offset) {
        n.offset = *nc.clock_offset;
      } else if (cfg_.keylist.max_clock_skew > SimTime::zero()) {
        Prg rng = root_.fork("clock/" + nc.id);
        const auto span = static_cast<std::uint64_t>(cfg_.keylist.max_clock_skew.count());
        n.offset = SimTime(static_cast<std::int64_t>(rng.uniform(0, span + 1)) -
                           static_cast<std::int64_t>(span / 2));
      }
      nodes_.push_back(std::move(n));
    }
    for (const auto& lc : cfg_.links) {
      const int a = index_.at(lc.a);
      const int b = index_.at(lc.b);
      links_[key(a, b)] = Link{lc.latency, lc.loss, lc.wired, true};
      adjacency_[a].insert(b);
      adjacency_[b].insert(a);
      max_latency_ = std::max(max_latency_, lc.latency);
      drain_window_ += lc.latency;
    }
    drain_window_ += SimTime(1);

    server_.params = gen_group_params(cfg_.ake.bit_len, "meshsim-group/" + std::to_string(cfg_.seed));
    Prg keys = root_.fork("credentials");
    server_ = ake::ServerKeyMaterial::generate(server_.params, keys);
    ca_ = CertificateAuthority::generate(server_.params, keys);
    for (auto& n : nodes_) {
      const Role r = n.cfg.role;
      if (r == Role::kMR || r == Role::kIGW) {
        n.x = keys.uniform(BigInt(1), server_.params.q);
        n.y = mod_exp(server_.params.g, n.x, server_.params.p);
        n.access_cert = ca_.issue(n.cfg.id, CertPurpose::kAccess, n.y, keys);
        n.server_cert = ca_.issue(n.cfg.id, CertPurpose::kServer, n.y, keys);
        // A defective certificate carries a signature that does not verify.
        if (n.cfg.invalid_cert == CertDefect::kAccess) corrupt(n.access_cert);
        if (n.cfg.invalid_cert == CertDefect::kServer) corrupt(n.server_cert);
      }
      if (r == Role::kMC || (r == Role::kMR && cfg_.ake.mr_phase2_via_ake)) {
        n.user = UserKeyMaterial::generate(n.cfg.id, server_.params, keys);
        directory_[n.cfg.id] = n.user->public_view();
      }
    }
    for (std::size_t k = 1; k <= cfg_.ake.extra_users; ++k) {
      const std::string id = "user-" + std::to_string(k);
      if (directory_.count(id) != 0) continue;
      directory_[id] = UserKeyMaterial::generate(id, server_.params, keys).public_view();
    }

    flows_.resize(cfg_.traffic.size());
    for (std::size_t i = 0; i < cfg_.traffic.size(); ++i) {
      flows_[i].src = cfg_.traffic[i].src;
      flows_[i].dst = cfg_.traffic[i].dst;
      flow_loss_.push_back(root_.fork("flow-loss/" + std::to_string(i)));
    }
  }

  void corrupt(Certificate& c) const {
    c.signature.s = mod_floor(c.signature.s + 1, server_.params.q);
  }

  static std::pair<int, int> key(int a, int b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

  // ---- scheduling helpers ------------------------------------------------

  SimTime now() const { return q_.now(); }
  SimTime local(const Node& n) const { return now() + n.offset; }

  /// Protocol and timer work stops at the horizon; packet hops do not.
  void at(SimTime t, EventKind kind, std::function<void()> fn) {
    q_.schedule(std::max(t, now()), kind, [this, kind, fn = std::move(fn)] {
      if (draining_ && kind != EventKind::kMsgDeliver) return;
      fn();
    });
  }

  void record(MetricsRecord r) { log_.append(std::move(r)); }

  void record(const Node& n, const char* ev, std::int64_t value = 0, std::string note = {}) {
    MetricsRecord r;
    r.time = now();
    r.node = n.cfg.id;
    r.event = ev;
    r.value = value;
    r.note = std::move(note);
    record(std::move(r));
  }

  // ---- routing -----------------------------------------------------------

  /// Joined router or gateway: may relay and serve downstream joins.
  bool full_router(int i) const {
    const Node& n = nodes_[i];
    return (n.cfg.role == Role::kMR || n.cfg.role == Role::kIGW) && n.phase == JoinPhase::kFullMr;
  }

  bool is_relay(int i) const { return nodes_[i].cfg.role == Role::kAS || full_router(i); }

  const Link* link(int a, int b) const {
    auto it = links_.find(key(a, b));
    return it == links_.end() ? nullptr : &it->second;
  }

  bool link_up(int a, int b) const {
    const Link* l = link(a, b);
    return l != nullptr && l->up;
  }

  /// Shortest-latency path between relays; ties go to lower node index.
  std::vector<int> relay_path(int src, int dst) const {
    if (src == dst) return {src};
    if (!is_relay(src) || !is_relay(dst)) return {};
    const auto inf = SimTime::max();
    std::vector<SimTime> dist(nodes_.size(), inf);
    std::vector<int> prev(nodes_.size(), -1);
    std::set<std::pair<SimTime, int>> frontier;
    dist[src] = SimTime::zero();
    frontier.insert({SimTime::zero(), src});
    while (!frontier.empty()) {
      auto [d, u] = *frontier.begin();
      frontier.erase(frontier.begin());
      if (u == dst) break;
      auto adj = adjacency_.find(u);
      if (adj == adjacency_.end()) continue;
      for (int v : adj->second) {
        if (!is_relay(v) || !link_up(u, v)) continue;
        const SimTime nd = d + link(u, v)->latency;
        if (nd < dist[v]) {
          frontier.erase({dist[v], v});
          dist[v] = nd;
          prev[v] = u;
          frontier.insert({nd, v});
        }
      }
    }
    if (dist[dst] == inf) return {};
    std::vector<int> path;
    for (int v = dst; v != -1; v = prev[v]) path.push_back(v);
    std::reverse(path.begin(), path.end());
    return path;
  }

  /// Non-relay endpoints reach the backbone only through their parent.
  std::vector<int> route(int src, int dst) const {
    int from = src;
    int to = dst;
    if (!is_relay(src)) {
      const int p = nodes_[src].parent;
      if (p < 0 || !link_up(src, p)) return {};
      from = p;
    }
    if (!is_relay(dst)) {
      const int p = nodes_[dst].parent;
      if (p < 0 || !link_up(dst, p)) return {};
      to = p;
    }
    if (from == dst) return {src, dst};
    if (to == src) return {src, dst};
    std::vector<int> mid = relay_path(from, to);
    if (mid.empty()) return {};
    std::vector<int> path;
    if (from != src) path.push_back(src);
    path.insert(path.end(), mid.begin(), mid.end());
    if (to != dst) path.push_back(dst);
    return path;
  }

  SimTime path_latency(const std::vector<int>& path) const {
    SimTime total{0};
    for (std::size_t i = 0; i + 1 < path.size(); ++i) total += link(path[i], path[i + 1])->latency;
    return total;
  }

  // ---- control transport -------------------------------------------------

  void transmit(int src, int dst, std::size_t bytes, bool auth, std::function<void()> on_arrive) {
    if (auth) {
      auth_bytes_ += bytes;
      record(nodes_[src], event::kAuthBytes, static_cast<std::int64_t>(bytes));
    }
    const std::vector<int> path = route(src, dst);
    if (path.empty()) return;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      const Link* l = link(path[i], path[i + 1]);
      if (ctl_loss_.bernoulli(l->loss)) return;
    }
    at(now() + path_latency(path), EventKind::kMsgDeliver, std::move(on_arrive));
  }

  struct RpcState {
    int src = 0;
    int dst = 0;
    int attempt = 0;
    bool done = false;
    std::function<Request()> make;
    std::function<void()> on_fail;
  };

  /// Request/response with retransmission. `make` builds each attempt, so a
  /// retry may carry fresh content.
  void rpc(int src, int dst, std::function<Request()> make, std::function<void()> on_fail) {
    auto st = std::make_shared<RpcState>();
    st->src = src;
    st->dst = dst;
    st->make = std::move(make);
    st->on_fail = std::move(on_fail);
    rpc_attempt(st);
  }

  void rpc_attempt(const std::shared_ptr<RpcState>& st) {
    const std::vector<int> path = route(st->src, st->dst);
    SimTime base = 3 * max_latency_;
    if (path.size() >= 2) base = 2 * path_latency(path) + link(path[0], path[1])->latency;
    Request req = st->make();
    transmit(st->src, st->dst, req.bytes, req.auth, [this, st, serve = req.serve, auth = req.auth] {
      std::optional<Reply> rep = serve();
      if (!rep) return;
      transmit(st->dst, st->src, rep->bytes, auth, [st, fn = std::move(rep->on_arrive)] {
        if (st->done) return;
        st->done = true;
        fn();
      });
    });
    const SimTime wait = base * (std::int64_t{1} << st->attempt);
    at(now() + wait, EventKind::kTimer, [this, st] {
      if (st->done) return;
      if (++st->attempt < kAttempts) {
        rpc_attempt(st);
        return;
      }
      st->done = true;
      if (st->on_fail) st->on_fail();
    });
  }

  static std::size_t framed(const nlohmann::json& j) { return ake::frame(j).size(); }

  // ---- lifecycle ---------------------------------------------------------

  void start() {
    for (const auto& ev : cfg_.link_events) {
      const int a = index_.at(ev.a);
      const int b = index_.at(ev.b);
      at(ev.time, EventKind::kTimer, [this, a, b, up = ev.up] { set_link(a, b, up); });
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const int id = static_cast<int>(i);
      Node& n = nodes_[i];
      switch (n.cfg.role) {
        case Role::kAS: break;
        case Role::kIGW:
          at(n.cfg.start, EventKind::kTimer, [this, id] { igw_start(id); });
          break;
        case Role::kMR:
          at(n.cfg.start, EventKind::kTimer, [this, id] {
            nodes_[id].started = true;
            try_join(id);
          });
          break;
        case Role::kMC:
          at(n.cfg.start, EventKind::kTimer, [this, id] {
            nodes_[id].started = true;
            try_attach(id);
          });
          break;
      }
    }
    for (std::size_t i = 0; i < cfg_.traffic.size(); ++i) {
      at(cfg_.traffic[i].start, EventKind::kTrafficEmit, [this, i] { emit(i); });
    }
  }

  void set_link(int a, int b, bool up) {
    Link* l = &links_.at(key(a, b));
    if (l->up == up) return;
    l->up = up;
    if (up) {
      wake_waiters();
      return;
    }
    for (int side : {a, b}) {
      Node& n = nodes_[side];
      const int other = side == a ? b : a;
      if (n.cfg.role != Role::kMR || n.parent != other) continue;
      if (n.phase == JoinPhase::kDetached || n.phase == JoinPhase::kFullMr) continue;
      restart_join(side, "parent-link-down");
    }
  }

  void wake_waiters() {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      Node& n = nodes_[i];
      if (!n.waiting) continue;
      if (n.cfg.role == Role::kMR) try_join(static_cast<int>(i));
      if (n.cfg.role == Role::kMC) try_attach(static_cast<int>(i));
    }
  }

  /// Full neighbours reachable over a live link, nearest to the server first.
  std::vector<int> parent_candidates(int id) const {
    std::vector<std::pair<SimTime, int>> ranked;
    auto adj = adjacency_.find(id);
    if (adj == adjacency_.end()) return {};
    for (int v : adj->second) {
      if (!full_router(v) || !link_up(id, v)) continue;
      const std::vector<int> up = relay_path(v, as_);
      if (up.empty()) continue;
      ranked.push_back({link(id, v)->latency + path_latency(up), v});
    }
    std::sort(ranked.begin(), ranked.end());
    std::vector<int> out;
    for (const auto& [d, v] : ranked) out.push_back(v);
    return out;
  }

  // ---- gateway -----------------------------------------------------------

  void igw_start(int id) {
    Node& n = nodes_[id];
    n.started = true;
    n.phase = JoinPhase::kPhase3KeyList;
    n.parent = as_;
    record(n, event::kJoinStart);
    request_key_list(id, /*joining=*/true);
  }

  // ---- router join -------------------------------------------------------

  void try_join(int id) {
    Node& n = nodes_[id];
    if (!n.started || n.rejected || n.phase != JoinPhase::kDetached) return;
    const std::vector<int> candidates = parent_candidates(id);
    if (candidates.empty()) {
      n.waiting = true;
      return;
    }
    n.waiting = false;
    n.parent = candidates.front();
    n.phase = JoinPhase::kPhase1Client;
    ++n.epoch;
    record(n, event::kJoinStart, 0, nodes_[n.parent].cfg.id);
    phase1(id);
  }

  void restart_join(int id, const std::string& why) {
    Node& n = nodes_[id];
    ++n.epoch;
    n.phase = JoinPhase::kDetached;
    n.parent = -1;
    n.sched = keysched::KeyListSchedule({cfg_.keylist.correction});
    record(n, event::kJoinRestart, 0, why);
    try_join(id);
  }

  void reject_join(int id, const std::string& why) {
    Node& n = nodes_[id];
    ++n.epoch;
    n.phase = JoinPhase::kDetached;
    n.parent = -1;
    n.rejected = true;
    n.waiting = false;
    rejected_.push_back(n.cfg.id);
    record(n, event::kJoinRejected, 0, why);
  }

  /// Wraps a continuation so it runs only if the join it belongs to is live.
  std::function<void()> guarded(int id, std::function<void()> fn) {
    const std::uint64_t epoch = nodes_[id].epoch;
    return [this, id, epoch, fn = std::move(fn)] {
      if (nodes_[id].epoch == epoch) fn();
    };
  }

  std::string nonce_hex() { return hex_encode(nonces_.bytes(16)); }

  std::string proof_text(const std::string& verifier, const std::string& nonce) const {
    return "proof|" + verifier + "|" + nonce;
  }

  nlohmann::json proof_json(const SchnorrSignature& s) const {
    const std::size_t w = server_.params.element_bytes();
    return {{"e", to_hex(s.e, w)}, {"s", to_hex(s.s, w)}};
  }

  /// Two exchanges: present a certificate and receive a nonce, then prove
  /// possession of the certified key. `verifier` judges the second message.
  void certificate_handshake(int id, int peer, CertPurpose purpose, const std::string& hello_type,
                             std::function<void()> on_accept) {
    Node& n = nodes_[id];
    const std::size_t w = server_.params.element_bytes();
    const Certificate& cert = purpose == CertPurpose::kAccess ? n.access_cert : n.server_cert;
    const nlohmann::json hello{{"type", hello_type}, {"cert", cert.to_json(w)}};
    auto on_fail = guarded(id, [this, id] { restart_join(id, "handshake-timeout"); });
    auto nonce = std::make_shared<std::string>();

    rpc(id, peer,
        [this, id, peer, hello, nonce, purpose, on_accept, on_fail] {
          return Request{framed(hello), true, [this, id, peer, nonce, purpose, on_accept, on_fail]()
                                                   -> std::optional<Reply> {
            if (!is_relay(peer)) return std::nullopt;
            const std::string challenge = nonce_hex();
            const nlohmann::json body{{"type", "challenge"}, {"nonce", challenge}};
            return Reply{framed(body), guarded(id, [this, id, peer, challenge, purpose, on_accept, on_fail] {
                           prove(id, peer, challenge, purpose, on_accept, on_fail);
                         })};
          }};
        },
        on_fail);
  }

  void prove(int id, int peer, const std::string& challenge, CertPurpose purpose,
             std::function<void()> on_accept, std::function<void()> on_fail) {
    Node& n = nodes_[id];
    const SchnorrSignature sig =
        schnorr_sign(server_.params, n.x, proof_text(nodes_[peer].cfg.id, challenge), signing_);
    const nlohmann::json body{{"type", "proof"}, {"nonce", challenge}, {"sig", proof_json(sig)}};
    rpc(id, peer,
        [this, id, peer, body, sig, challenge, purpose, on_accept] {
          return Request{framed(body), true, [this, id, peer, sig, challenge, purpose, on_accept]()
                                                 -> std::optional<Reply> {
            if (!is_relay(peer)) return std::nullopt;
            const Node& n = nodes_[id];
            const Certificate& cert = purpose == CertPurpose::kAccess ? n.access_cert : n.server_cert;
            const bool ok = cert.subject == n.cfg.id && ca_.verify(cert, purpose) &&
                            schnorr_verify(server_.params, cert.subject_key,
                                           proof_text(nodes_[peer].cfg.id, challenge), sig);
            const nlohmann::json body{{"type", ok ? "accept" : "reject"}};
            const std::string why = purpose == CertPurpose::kAccess ? "access-certificate" : "server-certificate";
            return Reply{framed(body), guarded(id, [this, id, ok, why, on_accept] {
                           if (ok) on_accept();
                           else reject_join(id, why);
                         })};
          }};
        },
        on_fail);
  }

  void phase1(int id) {
    certificate_handshake(id, nodes_[id].parent, CertPurpose::kAccess, "join-probe", [this, id] {
      Node& n = nodes_[id];
      record(n, event::kJoinPhaseComplete, 1);
      n.phase = JoinPhase::kPhase2Authenticating;
      if (cfg_.ake.mr_phase2_via_ake) {
        phase2_ake(id);
      } else {
        certificate_handshake(id, as_, CertPurpose::kServer, "auth-hello", [this, id] { phase3(id); });
      }
    });
  }

  void phase2_ake(int id) {
    auto on_fail = guarded(id, [this, id] { restart_join(id, "handshake-timeout"); });
    const std::uint64_t epoch = nodes_[id].epoch;
    authenticate_user(id, guarded(id, [this, id] { phase3(id); }), on_fail,
                      [this, id, epoch](const std::string& why) {
                        if (nodes_[id].epoch == epoch) reject_join(id, why);
                      });
  }

  void phase3(int id) {
    Node& n = nodes_[id];
    record(n, event::kJoinPhaseComplete, 2);
    n.phase = JoinPhase::kPhase3KeyList;
    request_key_list(id, /*joining=*/true);
  }

  void become_full(int id) {
    Node& n = nodes_[id];
    n.phase = JoinPhase::kFullMr;
    n.full_time = now();
    join_order_.push_back(n.cfg.id);
    record(n, event::kJoinPhaseComplete, 3, nodes_[n.parent].cfg.id);
    wake_waiters();
  }

  // ---- key lists ---------------------------------------------------------

  SimTime session_length() const { return cfg_.keylist.timeout * cfg_.keylist.cardinality; }

  const keysched::KeyList& server_list(std::uint64_t id) {
    auto it = lists_.find(id);
    if (it != lists_.end()) return it->second;
    Prg rng = root_.fork("keylist/" + std::to_string(id));
    auto list = keysched::generate_key_list(rng, static_cast<std::size_t>(cfg_.keylist.cardinality),
                                            session_length() * static_cast<std::int64_t>(id - 1), id - 1,
                                            cfg_.keylist.timeout);
    return lists_.emplace(id, std::move(list)).first->second;
  }

  std::uint64_t newest_held(const Node& n) const {
    if (n.sched.next()) return n.sched.next()->list_id;
    return n.sched.has_list() ? n.sched.list().list_id : 0;
  }

  /// Sends a key-list request; the schedule has already been told when the
  /// owner is ticking, otherwise (joining) it is told here.
  void request_key_list(int id, bool joining) {
    Node& n = nodes_[id];
    keysched::RequestRoute route_kind = keysched::RequestRoute::kDirectBackbone;
    if (joining) route_kind = n.sched.request_sent(local(n));
    else route_kind = n.sched.requests_sent() <= 1 ? keysched::RequestRoute::kRelayViaPeer
                                                   : keysched::RequestRoute::kDirectBackbone;
    const std::uint64_t have = newest_held(n);
    record(n, event::kKeyRequest, static_cast<std::int64_t>(have), keysched::to_string(route_kind));
    const nlohmann::json body{{"type", "keylist-request"}, {"have", have}, {"route", keysched::to_string(route_kind)}};
    auto on_fail = guarded(id, [this, id, joining] {
      if (joining) restart_join(id, "keylist-timeout");
      else nodes_[id].sched.request_failed();
    });
    rpc(id, as_,
        [this, id, body, have] {
          return Request{framed(body), false, [this, id, have]() -> std::optional<Reply> {
            serve_key_list(id, have);
            return Reply{framed({{"type", "ack"}}), [] {}};
          }};
        },
        on_fail);
  }

  /// Server side: the current session's list for a newcomer, otherwise the
  /// session after the newest one the node holds. Sent after the configured
  /// response delay over the node's authenticated channel.
  void serve_key_list(int id, std::uint64_t have) {
    const auto s_now = static_cast<std::uint64_t>(now() / session_length()) + 1;
    const std::uint64_t list_id = have == 0 ? s_now : std::max(have + 1, s_now);
    const std::uint64_t epoch = nodes_[id].epoch;
    at(now() + cfg_.keylist.response_delay, EventKind::kTimer, [this, id, list_id, epoch] {
      const keysched::KeyList list = server_list(list_id);
      nlohmann::json keys = nlohmann::json::array();
      for (const auto& k : list.keys) keys.push_back(hex_encode(ByteView(k.data(), k.size())));
      const nlohmann::json body{{"type", "keylist"},
                                {"list_id", list.list_id},
                                {"ts_kl", format_seconds(list.ts_kl)},
                                {"timeout", format_seconds(list.timeout)},
                                {"keys", keys}};
      rpc(as_, id,
          [this, id, list, body, epoch] {
            return Request{framed(body), false, [this, id, list, epoch]() -> std::optional<Reply> {
              if (nodes_[id].epoch == epoch) install(id, list);
              return Reply{framed({{"type", "ack"}}), [] {}};
            }};
          },
          nullptr);
    });
  }

  void install(int id, const keysched::KeyList& list) {
    Node& n = nodes_[id];
    const std::uint64_t before = newest_held(n);
    n.sched.response_received(list, local(n));
    if (newest_held(n) != before) record(n, event::kKeyListInstalled, static_cast<std::int64_t>(list.list_id));
    if (n.phase == JoinPhase::kPhase3KeyList && n.sched.has_list()) become_full(id);
    if (n.phase == JoinPhase::kFullMr) tick(id);
  }

  void tick(int id) {
    Node& n = nodes_[id];
    const std::uint64_t gen = ++n.tick_gen;
    for (const keysched::Action& a : n.sched.on_clock_tick(local(n))) {
      switch (a.kind) {
        case keysched::ActionKind::kRotateKey:
          record(n, event::kKeyRotate, a.tag.key_idx, std::to_string(a.tag.list_id));
          break;
        case keysched::ActionKind::kSessionRollover:
          break;
        case keysched::ActionKind::kPartitionAlert:
          ++partition_alerts_;
          record(n, event::kPartitionAlert, static_cast<std::int64_t>(a.tag.list_id));
          break;
        case keysched::ActionKind::kSendRequest:
          request_key_list(id, /*joining=*/false);
          break;
      }
    }
    if (auto b = n.sched.next_boundary(local(n))) {
      at(*b - n.offset, EventKind::kTimer, [this, id, gen] {
        if (nodes_[id].tick_gen == gen) tick(id);
      });
    }
  }

  // ---- anonymous authentication -----------------------------------------

  /// Ring of the user plus ring_size - 1 other registered identities, the
  /// user at a random position.
  std::optional<std::pair<std::vector<UserPublicKey>, std::size_t>> pick_ring(int id) {
    const Node& n = nodes_[id];
    std::vector<UserPublicKey> others;
    for (const auto& [uid, pk] : directory_) {
      if (uid != n.cfg.id) others.push_back(pk);
    }
    const std::size_t want = cfg_.ake.ring_size;
    if (want == 0 || others.size() + 1 < want) return std::nullopt;
    std::shuffle(others.begin(), others.end(), ring_rng_);
    others.resize(want - 1);
    const auto pos = static_cast<std::size_t>(ring_rng_.uniform(0, want));
    others.insert(others.begin() + static_cast<std::ptrdiff_t>(pos), n.user->public_view());
    return std::pair{std::move(others), pos};
  }

  /// Three-round anonymous key exchange with the server; every retry
  /// starts from a fresh round 1.
  void authenticate_user(int id, std::function<void()> on_success, std::function<void()> on_fail,
                         std::function<void(const std::string&)> on_reject) {
    auto ring = pick_ring(id);
    if (!ring) {
      on_reject("ring-too-small");
      return;
    }
    auto members = std::make_shared<std::vector<UserPublicKey>>(std::move(ring->first));
    const std::size_t pos = ring->second;
    const std::size_t n_ring = members->size();
    rpc(id, as_,
        [this, id, members, pos, n_ring, on_success, on_reject] {
          Node& n = nodes_[id];
          auto out = ake::client_round1(*members, pos, *n.user, server_.public_view(), ake_rng_);
          auto state = std::make_shared<ake::ClientRound1State>(std::move(out.state));
          Bytes wire = ake::encode_message(out.message);
          MetricsRecord r;
          r.time = now();
          r.node = n.cfg.id;
          r.event = event::kSigBytes;
          r.value = static_cast<std::int64_t>(wire.size());
          r.ring_size = n_ring;
          record(std::move(r));
          const std::size_t size = wire.size();
          return Request{size, true, [this, id, wire = std::move(wire), state, on_success, on_reject]()
                                         -> std::optional<Reply> {
            return serve_round1(id, wire, state, on_success, on_reject);
          }};
        },
        on_fail);
  }

  std::optional<Reply> serve_round1(int id, const Bytes& wire, std::shared_ptr<ake::ClientRound1State> state,
                                    std::function<void()> on_success,
                                    std::function<void(const std::string&)> on_reject) {
    ake::Round1Message m1;
    try {
      m1 = std::get<ake::Round1Message>(ake::decode_message(wire, directory_));
    } catch (const std::exception&) {
      return std::nullopt;
    }
    ake::ServerDecision d = ake::server_round2(m1.sig, m1.l, server_, ake_rng_, &replay_, now());
    if (!d.accepted()) {
      const std::string why = ake::to_string(d.verdict);
      return Reply{framed({{"type", "reject"}, {"reason", why}}), [on_reject, why] { on_reject(why); }};
    }
    server_sessions_[d.l.hex()] = d.K_s;
    Bytes reply = ake::encode_message(d.response());
    const std::size_t size = reply.size();
    return Reply{size, [this, id, reply = std::move(reply), state, on_success, on_reject] {
                   const auto m2 = std::get<ake::Round2Message>(ake::decode_message(reply, directory_));
                   ake::Round3Result r3 = ake::client_round3(*state, m2.h, m2.Y, m2.l);
                   if (!r3.accepted()) {
                     on_reject(ake::to_string(r3.verdict));
                     return;
                   }
                   Node& n = nodes_[id];
                   n.session = r3.key;
                   ++ake_checked_;
                   auto it = server_sessions_.find(r3.key->transcript_tag.hex());
                   if (it != server_sessions_.end() && it->second == r3.key->K_s) ++ake_agreed_;
                   on_success();
                 }};
  }

  void try_attach(int id) {
    Node& n = nodes_[id];
    if (!n.started || n.phase != JoinPhase::kDetached || n.rejected) return;
    int router = -1;
    if (!n.cfg.attach.empty()) {
      const int a = index_.at(n.cfg.attach);
      if (full_router(a) && link_up(id, a)) router = a;
    } else {
      const std::vector<int> c = parent_candidates(id);
      if (!c.empty()) router = c.front();
    }
    if (router < 0) {
      n.waiting = true;
      return;
    }
    n.waiting = false;
    n.parent = router;
    n.phase = JoinPhase::kPhase2Authenticating;
    ++n.epoch;
    record(n, event::kJoinStart, 0, nodes_[router].cfg.id);
    auto fail = [this, id](const std::string& why) {
      Node& n = nodes_[id];
      n.phase = JoinPhase::kDetached;
      n.rejected = true;
      ++mc_failed_;
      record(n, event::kMcAuthFailed, 0, why);
    };
    authenticate_user(
        id, guarded(id, [this, id] {
          Node& n = nodes_[id];
          n.phase = JoinPhase::kFullMr;
          n.full_time = now();
          ++mc_completed_;
          record(n, event::kMcAuthComplete, 0, nodes_[n.parent].cfg.id);
        }),
        guarded(id, [fail] { fail("timeout"); }), [fail](const std::string& why) { fail(why); });
  }

  // ---- traffic -----------------------------------------------------------

  bool ready(int i) const {
    const Node& n = nodes_[i];
    return n.cfg.role == Role::kAS || n.phase == JoinPhase::kFullMr;
  }

  bool backbone(int i) const {
    const Role r = nodes_[i].cfg.role;
    return r == Role::kMR || r == Role::kIGW;
  }

  /// Clients are endpoints only; they never relay even once authenticated.
  std::vector<int> data_route(int src, int dst) const { return route(src, dst); }

  void emit(std::size_t f) {
    const FlowConfig& fc = cfg_.traffic[f];
    if (now() >= fc.stop) return;
    const int src = index_.at(fc.src);
    const int dst = index_.at(fc.dst);
    if (ready(src) && ready(dst)) {
      std::vector<int> path = data_route(src, dst);
      if (path.size() >= 2) {
        ++flows_[f].sent;
        MetricsRecord r;
        r.time = now();
        r.node = fc.src;
        r.event = event::kPktSent;
        r.value = static_cast<std::int64_t>(fc.packet_size);
        r.flow = f;
        record(std::move(r));
        forward(Packet{f, std::move(path)}, 0);
      }
    }
    const auto interval = SimTime(std::max<std::int64_t>(
        1, static_cast<std::int64_t>(static_cast<double>(kNanosPerSecond) / fc.rate + 0.5)));
    at(now() + interval, EventKind::kTrafficEmit, [this, f] { emit(f); });
  }

  void drop(const Packet& p, int at_node, DropCause cause) {
    ++flows_[p.flow].drops[cause];
    MetricsRecord r;
    r.time = now();
    r.node = nodes_[at_node].cfg.id;
    r.event = event::kPktDropped;
    r.cause = cause;
    r.flow = p.flow;
    record(std::move(r));
  }

  void forward(Packet p, std::size_t hop) {
    const int u = p.path[hop];
    const int v = p.path[hop + 1];
    const Link* l = link(u, v);
    if (!l->up || flow_loss_[p.flow].bernoulli(l->loss)) {
      drop(p, u, DropCause::kLinkLoss);
      return;
    }
    std::optional<keysched::KeyTag> tag;
    const bool checked = cfg_.keylist.rotation && !l->wired && backbone(u) && backbone(v);
    if (checked) {
      tag = backbone_encrypt_tag(nodes_[u].sched, local(nodes_[u]));
      if (!tag) {
        drop(p, u, DropCause::kNoKey);
        return;
      }
    }
    q_.schedule(now() + l->latency, EventKind::kMsgDeliver, [this, p = std::move(p), hop, v, tag]() mutable {
      if (tag) {
        const Node& rx = nodes_[v];
        const FrameVerdict verdict = backbone_check(*tag, rx.sched, local(rx), cfg_.keylist.delta());
        if (verdict == FrameVerdict::kNoKey) return drop(p, v, DropCause::kNoKey);
        if (verdict == FrameVerdict::kKeyMismatch) return drop(p, v, DropCause::kKeyMismatch);
      }
      if (hop + 2 == p.path.size()) {
        ++flows_[p.flow].delivered;
        MetricsRecord r;
        r.time = now();
        r.node = nodes_[v].cfg.id;
        r.event = event::kPktDelivered;
        r.flow = p.flow;
        record(std::move(r));
        return;
      }
      forward(std::move(p), hop + 1);
    });
  }

  // ---- summary -----------------------------------------------------------

  Summary summarize() const {
    Summary s;
    for (const auto& n : nodes_) {
      if ((n.cfg.role == Role::kMR || n.cfg.role == Role::kIGW) && n.full_time) {
        s.join_times[n.cfg.id] = *n.full_time;
        s.join_parent[n.cfg.id] = nodes_[n.parent].cfg.id;
      }
    }
    for (const auto& id : join_order_) {
      if (nodes_[index_.at(id)].cfg.role == Role::kMR) s.join_order.push_back(id);
    }
    s.rejected = rejected_;
    s.partition_alerts = partition_alerts_;
    s.auth_bytes = auth_bytes_;
    s.mc_auth_completed = mc_completed_;
    s.mc_auth_failed = mc_failed_;
    s.ake_checked = ake_checked_;
    s.ake_agreed = ake_agreed_;
    s.flows = flows_;
    s.events = q_.executed();
    return s;
  }

  ScenarioConfig cfg_;
  MetricsLog log_;
  Prg root_;
  Prg ctl_loss_ = root_.fork("ctl-loss");
  Prg nonces_ = root_.fork("nonces");
  Prg signing_ = root_.fork("signing");
  Prg ring_rng_ = root_.fork("rings");
  Prg ake_rng_ = root_.fork("ake");
  std::vector<Prg> flow_loss_;

  EventQueue q_;
  bool ran_ = false;
  bool draining_ = false;
  SimTime drain_window_{0};
  SimTime max_latency_{0};

  std::vector<Node> nodes_;
  std::map<std::string, int> index_;
  std::map<std::pair<int, int>, Link> links_;
  std::map<int, std::set<int>> adjacency_;
  int as_ = -1;

  ake::ServerKeyMaterial server_;
  CertificateAuthority ca_;
  KeyDirectory directory_;
  ake::ReplayCache replay_;
  std::map<std::string, BigInt> server_sessions_;
  std::map<std::uint64_t, keysched::KeyList> lists_;

  std::vector<std::string> join_order_;
  std::vector<std::string> rejected_;
  std::vector<FlowSummary> flows_;
  std::uint64_t partition_alerts_ = 0;
  std::uint64_t auth_bytes_ = 0;
  std::uint64_t mc_completed_ = 0;
  std::uint64_t mc_failed_ = 0;
  std::uint64_t ake_checked_ = 0;
  std::uint64_t ake_agreed_ = 0;
};

/// Runs a scenario to completion. Throws ConfigError before simulating if
/// the configuration is invalid.
inline Summary run(const ScenarioConfig& cfg, std::ostream* metrics_mirror = nullptr) {
  return Simulator(cfg, metrics_mirror).run();
}

}  // namespace wmn::sim
