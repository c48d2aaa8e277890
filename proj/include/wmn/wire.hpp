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

// Wire framing for key-exchange messages: a 4-octet big-endian length
// followed by that many octets of compact JSON with sorted keys.
//
//   round1: {"l":<64 hex>,"sig":<ring signature>,"type":"round1"}
//   round2: {"Y":<hex>,"h":<64 hex>,"l":<64 hex>,"type":"round2"}
//
// The ring signature object is
//   {"R":hex,"V":hex,"b":int,"pairs":[{"alpha":hex,"beta":hex},...],"ring":[id,...],"v":hex}
// with every integer in fixed-width hex (the owning group's octet width).
//
// For a ring of n members whose ids are all L characters long, in groups of
// m octets, with V/R in c octets and v in w octets, a round-1 frame is
//
//   size(n) = (4m + L + 26) * n + 4c + 2w + 145 + digits(b)
//
// octets, where 145 covers the length prefix, the fixed keys, punctuation and
// the 64-digit l, and digits(b) is the decimal length of b.

#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "wmn/anonake.hpp"
#include "wmn/bigint.hpp"
#include "wmn/ringsig.hpp"

namespace wmn::ake {

/// Decoding failure; `position` is the octet offset in the frame where
/// decoding stopped.
class DecodeError : public std::runtime_error {
 public:
  DecodeError(const std::string& what, std::size_t position)
      : std::runtime_error(what + " (at octet " + std::to_string(position) + ")"),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

using Message = std::variant<Round1Message, Round2Message>;

inline constexpr std::size_t kFramePrefix = 4;

inline Bytes frame(const nlohmann::json& body) {
  const std::string text = body.dump();
  const std::uint64_t n = text.size();
  if (n > 0xffffffffu) throw ParameterError("message too large");
  Bytes out{static_cast<std::uint8_t>(n >> 24), static_cast<std::uint8_t>(n >> 16),
            static_cast<std::uint8_t>(n >> 8), static_cast<std::uint8_t>(n)};
  out.insert(out.end(), text.begin(), text.end());
  return out;
}

inline Bytes encode_message(const Round1Message& m) {
  return frame({{"type", "round1"}, {"l", m.l.hex()}, {"sig", to_json(m.sig)}});
}

inline Bytes encode_message(const Round2Message& m) {
  return frame({{"type", "round2"},
                {"h", m.h.hex()},
                {"Y", to_hex(m.Y, m.element_bytes)},
                {"l", m.l.hex()}});
}

inline Bytes encode_message(const Message& m) {
  return std::visit([](const auto& inner) { return encode_message(inner); }, m);
}

/// Ring members are resolved through `directory`; an unknown id is a decode
/// error.
inline Message decode_message(ByteView bytes, const KeyDirectory& directory) {
  if (bytes.size() < kFramePrefix) throw DecodeError("truncated length prefix", bytes.size());
  const std::size_t n = (std::size_t{bytes[0]} << 24) | (std::size_t{bytes[1]} << 16) |
                        (std::size_t{bytes[2]} << 8) | std::size_t{bytes[3]};
  if (bytes.size() - kFramePrefix < n) throw DecodeError("truncated payload", bytes.size());
  if (bytes.size() - kFramePrefix > n) {
    throw DecodeError("trailing octets after payload", kFramePrefix + n);
  }
  const auto body = bytes.subspan(kFramePrefix, n);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body.begin(), body.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw DecodeError(std::string("malformed JSON: ") + e.what(), kFramePrefix + e.byte);
  }
  auto digest = [&](const char* field) {
    try {
      return Digest::from_hex(j.at(field).get<std::string>());
    } catch (const std::exception& e) {
      throw DecodeError(std::string("field '") + field + "': " + e.what(), kFramePrefix);
    }
  };
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    throw DecodeError("missing message type", kFramePrefix);
  }
  const std::string type = j["type"].get<std::string>();
  if (type == "round1") {
    if (j.size() != 3 || !j.contains("sig")) throw DecodeError("unexpected round1 fields", kFramePrefix);
    Round1Message m;
    m.l = digest("l");
    try {
      m.sig = ring_signature_from_json(j.at("sig"), directory);
    } catch (const std::exception& e) {
      throw DecodeError(std::string("field 'sig': ") + e.what(), kFramePrefix);
    }
    return m;
  }
  if (type == "round2") {
    if (j.size() != 4) throw DecodeError("unexpected round2 fields", kFramePrefix);
    Round2Message m;
    m.h = digest("h");
    m.l = digest("l");
    try {
      const auto y_hex = j.at("Y").get<std::string>();
      m.Y = from_hex(y_hex);
      m.element_bytes = y_hex.size() / 2;
    } catch (const std::exception& e) {
      throw DecodeError(std::string("field 'Y': ") + e.what(), kFramePrefix);
    }
    return m;
  }
  throw DecodeError("unknown message type '" + type + "'", kFramePrefix);
}

}  // namespace wmn::ake
