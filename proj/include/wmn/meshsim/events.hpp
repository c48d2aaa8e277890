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
#include <functional>
#include <queue>
#include <stdexcept>
#include <vector>

#include "wmn/simtime.hpp"

namespace wmn::sim {

enum class EventKind { kMsgDeliver, kMsgDrop, kTimer, kTrafficEmit };

struct SimEvent {
  SimTime time{0};
  std::uint64_t seq = 0;
  EventKind kind = EventKind::kTimer;
  std::function<void()> action;
};

/// Min-queue ordered by (time, insertion sequence).
class EventQueue {
 public:
  SimTime now() const { return now_; }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  std::uint64_t executed() const { return executed_; }

  void schedule(SimTime at, EventKind kind, std::function<void()> action) {
    if (at < now_) throw std::logic_error("event scheduled in the past");
    heap_.push(SimEvent{at, next_seq_++, kind, std::move(action)});
  }

  void schedule_in(SimTime delay, EventKind kind, std::function<void()> action) {
    schedule(now_ + delay, kind, std::move(action));
  }

  /// Runs events with time <= `until`; returns the number executed.
  std::uint64_t run_until(SimTime until) {
    std::uint64_t n = 0;
    while (!heap_.empty() && heap_.top().time <= until) {
      SimEvent ev = heap_.top();
      heap_.pop();
      now_ = ev.time;
      ev.action();
      ++n;
      ++executed_;
    }
    if (until > now_) now_ = until;
    return n;
  }

 private:
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.seq > b.seq;
    }
  };

  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> heap_;
  SimTime now_{0};
  std::uint64_t next_seq_ = 0;
  std::uint64_t executed_ = 0;
};

}  // namespace wmn::sim
