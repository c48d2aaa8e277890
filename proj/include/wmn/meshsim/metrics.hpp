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

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wmn/simtime.hpp"

namespace wmn::sim {

enum class DropCause { kLinkLoss, kNoKey, kKeyMismatch };

inline const char* to_string(DropCause c) {
  switch (c) {
    case DropCause::kLinkLoss: return "link-loss";
    case DropCause::kNoKey: return "no-key";
    case DropCause::kKeyMismatch: return "key-mismatch";
  }
  return "?";
}

namespace event {
inline constexpr const char* kJoinStart = "join-start";
inline constexpr const char* kJoinPhaseComplete = "join-phase-complete";
inline constexpr const char* kJoinRestart = "join-restart";
inline constexpr const char* kJoinRejected = "join-rejected";
inline constexpr const char* kAuthBytes = "auth-bytes";
inline constexpr const char* kSigBytes = "sig-bytes";
inline constexpr const char* kMcAuthComplete = "mc-auth-complete";
inline constexpr const char* kMcAuthFailed = "mc-auth-failed";
inline constexpr const char* kKeyRequest = "key-request";
inline constexpr const char* kKeyListInstalled = "key-list-installed";
inline constexpr const char* kKeyRotate = "key-rotate";
inline constexpr const char* kPartitionAlert = "partition-alert";
inline constexpr const char* kPktSent = "pkt-sent";
inline constexpr const char* kPktDelivered = "pkt-delivered";
inline constexpr const char* kPktDropped = "pkt-dropped";
}  // namespace event

struct MetricsRecord {
  SimTime time{0};
  std::string node;
  std::string event;
  std::int64_t value = 0;
  std::optional<DropCause> cause;
  std::optional<std::size_t> flow;
  std::optional<std::size_t> ring_size;
  /// Free-form qualifier (request route, rejection reason, ...).
  std::string note;

  nlohmann::json to_json() const {
    nlohmann::json j{{"t", format_seconds(time)}, {"node", node}, {"event", event}, {"value", value}};
    if (cause) j["cause"] = to_string(*cause);
    if (flow) j["flow"] = *flow;
    if (ring_size) j["n"] = *ring_size;
    if (!note.empty()) j["note"] = note;
    return j;
  }
};

/// Append-only record stream, optionally mirrored as JSON lines.
class MetricsLog {
 public:
  explicit MetricsLog(std::ostream* mirror = nullptr) : mirror_(mirror) {}

  void append(MetricsRecord r) {
    if (mirror_ != nullptr) *mirror_ << r.to_json().dump() << '\n';
    records_.push_back(std::move(r));
  }

  const std::vector<MetricsRecord>& records() const { return records_; }

  std::string jsonl() const {
    std::string out;
    for (const auto& r : records_) out += r.to_json().dump() + "\n";
    return out;
  }

 private:
  std::ostream* mirror_;
  std::vector<MetricsRecord> records_;
};

}  // namespace wmn::sim
