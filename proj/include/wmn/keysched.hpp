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

// Server-issued key lists for the mesh backbone.
//
// A key list generated at TS_KL holds `cardinality` keys, each valid for
// `timeout`; the list's session lasts cardinality * timeout. At local time
// t the active key is
//
//   key_idx = floor((t - TS_KL) / timeout) + 1
//   T_i     = key_idx * timeout - (t - TS_KL)       (time left on that key)
//
// and a node asks for the next session's list once key_idx reaches
// cardinality - c, where c = ceil((t_last - timeout) / timeout) when the last
// request took t_last >= timeout to be answered, else 0.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wmn/bigint.hpp"
#include "wmn/prg.hpp"
#include "wmn/simtime.hpp"

namespace wmn::keysched {

using SymmetricKey = std::array<std::uint8_t, 32>;

inline constexpr std::size_t kDefaultCardinality = 16;
inline const SimTime kDefaultTimeout = seconds(60);

class ClockSkewError : public ParameterError {
 public:
  ClockSkewError(SimTime now, SimTime ts_kl)
      : ParameterError("clock skew: t_now " + format_seconds(now) + " precedes TS_KL " +
                       format_seconds(ts_kl)) {}
};

struct KeyList {
  std::vector<SymmetricKey> keys;
  SimTime ts_kl{0};
  SimTime timeout = kDefaultTimeout;
  std::uint64_t list_id = 0;

  std::int64_t cardinality() const { return static_cast<std::int64_t>(keys.size()); }
  SimTime session_duration() const { return timeout * cardinality(); }
  SimTime expiry() const { return ts_kl + session_duration(); }
  SimTime slot_start(std::int64_t key_idx) const { return ts_kl + timeout * (key_idx - 1); }

  friend bool operator==(const KeyList&, const KeyList&) = default;
};

inline std::int64_t current_key_index(SimTime t_now, SimTime ts_kl, SimTime timeout) {
  if (timeout <= SimTime::zero()) throw ParameterError("timeout must be positive");
  if (t_now < ts_kl) throw ClockSkewError(t_now, ts_kl);
  return (t_now - ts_kl) / timeout + 1;
}

/// Index of the key in force at t_now; values above the cardinality mean the
/// session has expired.
inline std::int64_t current_key_index(SimTime t_now, const KeyList& list) {
  return current_key_index(t_now, list.ts_kl, list.timeout);
}

inline SimTime remaining_validity(SimTime t_now, SimTime ts_kl, SimTime timeout) {
  return timeout * current_key_index(t_now, ts_kl, timeout) - (t_now - ts_kl);
}

inline SimTime remaining_validity(SimTime t_now, const KeyList& list) {
  return remaining_validity(t_now, list.ts_kl, list.timeout);
}

inline std::int64_t correction_factor(SimTime t_last, SimTime timeout) {
  if (timeout <= SimTime::zero()) throw ParameterError("timeout must be positive");
  if (t_last < timeout) return 0;
  const auto excess = (t_last - timeout).count();
  const auto slot = timeout.count();
  return (excess + slot - 1) / slot;
}

inline std::int64_t request_trigger_index(std::int64_t cardinality, std::int64_t c) {
  if (cardinality < 1) throw ParameterError("cardinality must be at least 1");
  if (c < 0) throw ParameterError("correction factor must be non-negative");
  return std::max<std::int64_t>(1, cardinality - c);
}

inline KeyList generate_key_list(Prg& rng, std::size_t cardinality, SimTime t_now,
                                 std::uint64_t prev_id, SimTime timeout = kDefaultTimeout) {
  if (cardinality < 1) throw ParameterError("cardinality must be at least 1");
  if (timeout <= SimTime::zero()) throw ParameterError("timeout must be positive");
  KeyList list;
  list.ts_kl = t_now;
  list.timeout = timeout;
  list.list_id = prev_id + 1;
  std::set<SymmetricKey> seen;
  while (list.keys.size() < cardinality) {
    SymmetricKey k;
    for (auto& b : k) b = rng.next_byte();
    if (seen.insert(k).second) list.keys.push_back(k);
  }
  return list;
}

/// Identifies one key: which list and which slot in it.
struct KeyTag {
  std::uint64_t list_id = 0;
  std::int64_t key_idx = 0;

  friend auto operator<=>(const KeyTag&, const KeyTag&) = default;
};

enum class ActionKind { kSendRequest, kRotateKey, kSessionRollover, kPartitionAlert };

inline const char* to_string(ActionKind k) {
  switch (k) {
    case ActionKind::kSendRequest: return "send-request";
    case ActionKind::kRotateKey: return "rotate-key";
    case ActionKind::kSessionRollover: return "session-rollover";
    case ActionKind::kPartitionAlert: return "partition-alert";
  }
  return "unknown";
}

struct Action {
  ActionKind kind;
  KeyTag tag;

  friend bool operator==(const Action&, const Action&) = default;
};

/// How a key-list request travels: the very first one goes through the peer
/// the node is attached to, later ones straight over the backbone.
enum class RequestRoute { kRelayViaPeer, kDirectBackbone };

inline const char* to_string(RequestRoute r) {
  return r == RequestRoute::kRelayViaPeer ? "relay-via-peer" : "direct-backbone";
}

struct ScheduleOptions {
  /// When false, c stays 0 regardless of measured response times.
  bool correction_enabled = true;
};

/// Per-node key-list state machine. Times are the owning node's local clock.
class KeyListSchedule {
 public:
  explicit KeyListSchedule(ScheduleOptions options = {}) : options_(options) {}

  bool has_list() const { return current_.has_value(); }
  const KeyList& list() const { return current_.value(); }
  const std::optional<KeyList>& next() const { return next_; }
  const std::optional<KeyList>& previous() const { return previous_; }

  std::optional<SimTime> t_s() const { return t_s_; }
  std::optional<SimTime> t_r() const { return t_r_; }
  std::optional<SimTime> t_last() const {
    if (!t_s_ || !t_r_) return std::nullopt;
    return *t_r_ - *t_s_;
  }
  std::int64_t correction() const { return c_; }
  std::int64_t trigger_index() const {
    return current_ ? request_trigger_index(current_->cardinality(), c_) : 1;
  }
  bool partitioned() const { return partitioned_; }
  bool request_outstanding() const { return outstanding_; }
  std::uint64_t requests_sent() const { return requests_sent_; }

  /// Records a key-list request leaving the node at local time t.
  RequestRoute request_sent(SimTime t) {
    const RequestRoute route =
        requests_sent_ == 0 ? RequestRoute::kRelayViaPeer : RequestRoute::kDirectBackbone;
    ++requests_sent_;
    t_s_ = t;
    t_r_.reset();
    outstanding_ = true;
    return route;
  }

  /// The owner gave up on the outstanding request; a later tick may send a
  /// fresh one. A late answer still counts towards t_last.
  void request_failed() {
    outstanding_ = false;
    requested_this_session_ = false;
  }

  /// Installs a list answered by the server. The first list becomes current;
  /// later ones are held for the next session. Lists that are not newer
  /// than what is already held are ignored (duplicate responses).
  void response_received(KeyList list, SimTime t) {
    const std::uint64_t newest = next_ ? next_->list_id : (current_ ? current_->list_id : 0);
    if (current_ && list.list_id <= newest) return;
    if (t_s_ && !t_r_) {
      t_r_ = t;
      c_ = options_.correction_enabled ? correction_factor(*t_r_ - *t_s_, list.timeout) : 0;
    }
    outstanding_ = false;
    if (!current_) {
      current_ = std::move(list);
      return;
    }
    next_ = std::move(list);
  }

  /// Advances the state machine to local time t_now and returns what the
  /// owner must do, in order.
  std::vector<Action> on_clock_tick(SimTime t_now) {
    std::vector<Action> actions;
    if (!current_) return actions;
    for (;;) {
      // A list issued slightly in the future of a lagging local clock.
      if (t_now < current_->ts_kl) return actions;
      const std::int64_t idx = current_key_index(t_now, *current_);
      if (idx > current_->cardinality()) {
        if (next_ && t_now >= next_->ts_kl) {
          previous_ = std::move(current_);
          current_ = std::move(next_);
          next_.reset();
          requested_this_session_ = false;
          last_idx_ = 0;
          partitioned_ = false;
          actions.push_back({ActionKind::kSessionRollover, {current_->list_id, 0}});
          continue;
        }
        if (!partitioned_) {
          partitioned_ = true;
          actions.push_back({ActionKind::kPartitionAlert, {current_->list_id, idx}});
        }
        if (!outstanding_ && !next_) {
          request_sent(t_now);
          actions.push_back({ActionKind::kSendRequest, {current_->list_id, idx}});
        }
        return actions;
      }
      if (idx != last_idx_) {
        last_idx_ = idx;
        actions.push_back({ActionKind::kRotateKey, {current_->list_id, idx}});
      }
      if (!requested_this_session_ && !next_ && idx >= trigger_index()) {
        requested_this_session_ = true;
        if (!outstanding_) {
          request_sent(t_now);
          actions.push_back({ActionKind::kSendRequest, {current_->list_id, idx}});
        }
      }
      return actions;
    }
  }

  /// Local time of the next slot boundary after t (for timer scheduling).
  std::optional<SimTime> next_boundary(SimTime t) const {
    if (!current_) return std::nullopt;
    if (t < current_->ts_kl) return current_->ts_kl;
    const std::int64_t idx = current_key_index(t, *current_);
    if (idx > current_->cardinality()) {
      if (next_ && next_->ts_kl > t) return next_->ts_kl;
      return std::nullopt;
    }
    return current_->slot_start(idx + 1);
  }

  /// The list with the given id, if still held.
  const KeyList* find(std::uint64_t list_id) const {
    for (const auto* l : {&previous_, &current_, &next_}) {
      if (*l && (*l)->list_id == list_id) return &**l;
    }
    return nullptr;
  }

  /// The key in force at local time t among held lists, if any.
  std::optional<KeyTag> tag_at(SimTime t) const {
    for (const auto* l : {&current_, &next_, &previous_}) {
      if (*l && t >= (*l)->ts_kl && t < (*l)->expiry()) {
        return KeyTag{(*l)->list_id, current_key_index(t, **l)};
      }
    }
    return std::nullopt;
  }

 private:
  ScheduleOptions options_;
  std::optional<KeyList> previous_;
  std::optional<KeyList> current_;
  std::optional<KeyList> next_;
  std::optional<SimTime> t_s_;
  std::optional<SimTime> t_r_;
  std::int64_t c_ = 0;
  std::int64_t last_idx_ = 0;
  bool requested_this_session_ = false;
  bool partitioned_ = false;
  bool outstanding_ = false;
  std::uint64_t requests_sent_ = 0;
};

}  // namespace wmn::keysched
