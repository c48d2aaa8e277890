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

// Backbone frame protection, abstracted: a frame carries the (list_id,
// key_idx) of the key its sender used, and the receiver decides whether it
// could have decrypted it.

#pragma once

#include <optional>

#include "wmn/keysched.hpp"
#include "wmn/simtime.hpp"

namespace wmn::sim {

enum class FrameVerdict { kDeliver, kNoKey, kKeyMismatch };

/// The tag a sender stamps on a frame at its local time, or nullopt when it
/// holds no valid key.
inline std::optional<keysched::KeyTag> backbone_encrypt_tag(const keysched::KeyListSchedule& sender,
                                                            SimTime sender_local) {
  return sender.tag_at(sender_local);
}

/// Accepts an exact key match, or the slot adjacent to the receiver's current
/// one when the receiver's clock is within `delta` of the boundary between
/// them.
inline FrameVerdict backbone_check(const keysched::KeyTag& sent,
                                   const keysched::KeyListSchedule& receiver,
                                   SimTime receiver_local, SimTime delta) {
  const auto mine = receiver.tag_at(receiver_local);
  if (!mine) return FrameVerdict::kNoKey;
  if (*mine == sent) return FrameVerdict::kDeliver;
  const keysched::KeyList* their_list = receiver.find(sent.list_id);
  const keysched::KeyList* my_list = receiver.find(mine->list_id);
  if (their_list == nullptr || my_list == nullptr) return FrameVerdict::kKeyMismatch;
  if (sent.key_idx < 1 || sent.key_idx > their_list->cardinality()) return FrameVerdict::kKeyMismatch;
  const SimTime their_start = their_list->slot_start(sent.key_idx);
  const SimTime their_end = their_start + their_list->timeout;
  const SimTime my_start = my_list->slot_start(mine->key_idx);
  const SimTime my_end = my_start + my_list->timeout;
  if (their_end == my_start && receiver_local - my_start <= delta) return FrameVerdict::kDeliver;
  if (their_start == my_end && my_end - receiver_local <= delta) return FrameVerdict::kDeliver;
  return FrameVerdict::kKeyMismatch;
}

}  // namespace wmn::sim
