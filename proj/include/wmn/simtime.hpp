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

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

#include "wmn/bigint.hpp"

namespace wmn {

/// Simulated time and durations: exact integer nanoseconds. Every decimal
/// with at most nine fractional digits is represented exactly.
using SimTime = std::chrono::nanoseconds;

inline constexpr std::int64_t kNanosPerSecond = 1'000'000'000;

inline SimTime seconds(std::int64_t s) { return SimTime(s * kNanosPerSecond); }

/// Parses "12", "-0.25", "2.500000001". Rejects exponents and more than nine
/// fractional digits.
inline SimTime parse_seconds(std::string_view text) {
  auto fail = [&](const char* why) {
    throw ParameterError("invalid decimal seconds '" + std::string(text) + "': " + why);
  };
  if (text.empty()) fail("empty");
  bool negative = false;
  std::size_t i = 0;
  if (text[0] == '-' || text[0] == '+') {
    negative = text[0] == '-';
    ++i;
  }
  std::int64_t whole = 0;
  std::int64_t frac = 0;
  int frac_digits = 0;
  bool any_digit = false;
  bool in_frac = false;
  constexpr std::int64_t kMaxWhole = std::numeric_limits<std::int64_t>::max() / kNanosPerSecond - 1;
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '.') {
      if (in_frac) fail("second decimal point");
      in_frac = true;
      continue;
    }
    if (c < '0' || c > '9') fail("unexpected character");
    any_digit = true;
    if (in_frac) {
      if (++frac_digits > 9) fail("more than nine fractional digits");
      frac = frac * 10 + (c - '0');
    } else {
      whole = whole * 10 + (c - '0');
      if (whole > kMaxWhole) fail("out of range");
    }
  }
  if (!any_digit) fail("no digits");
  for (int d = frac_digits; d < 9; ++d) frac *= 10;
  const std::int64_t ns = whole * kNanosPerSecond + frac;
  return SimTime(negative ? -ns : ns);
}

/// Shortest exact decimal rendering, e.g. "2.5", "0", "-0.000000001".
inline std::string format_seconds(SimTime t) {
  std::int64_t ns = t.count();
  std::string sign;
  if (ns < 0) {
    sign = "-";
    ns = -ns;
  }
  std::string out = sign + std::to_string(ns / kNanosPerSecond);
  std::int64_t frac = ns % kNanosPerSecond;
  if (frac != 0) {
    std::string digits = std::to_string(frac);
    digits.insert(0, 9 - digits.size(), '0');
    while (digits.back() == '0') digits.pop_back();
    out += "." + digits;
  }
  return out;
}

/// Nearest nanosecond to a floating-point number of seconds.
inline SimTime from_double_seconds(double s) {
  if (!std::isfinite(s)) throw ParameterError("non-finite time value");
  return SimTime(static_cast<std::int64_t>(std::llround(s * static_cast<double>(kNanosPerSecond))));
}

}  // namespace wmn
