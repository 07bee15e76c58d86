// Copyright 2026 The foodsurv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "foodsurv/common.h"

#include <chrono>
#include <cstdio>

namespace foodsurv {
namespace {

int HexDigit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

UserId UserId::FromHex(std::string_view hex) {
  if (hex.size() != 32) {
    throw DataError("user_id must be 32 hex digits, got '" + std::string(hex) +
                    "'");
  }
  UserId id;
  for (std::size_t i = 0; i < 16; ++i) {
    int hi = HexDigit(hex[2 * i]);
    int lo = HexDigit(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) {
      throw DataError("user_id has non-hex character: '" + std::string(hex) +
                      "'");
    }
    id.bytes[i] = static_cast<std::uint8_t>(hi * 16 + lo);
  }
  return id;
}

UserId UserId::FromWords(std::uint64_t hi, std::uint64_t lo) {
  UserId id;
  for (int i = 0; i < 8; ++i) {
    id.bytes[i] = static_cast<std::uint8_t>(hi >> (56 - 8 * i));
    id.bytes[8 + i] = static_cast<std::uint8_t>(lo >> (56 - 8 * i));
  }
  return id;
}

std::string UserId::ToHex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(32, '0');
  for (std::size_t i = 0; i < 16; ++i) {
    out[2 * i] = kDigits[bytes[i] >> 4];
    out[2 * i + 1] = kDigits[bytes[i] & 0xf];
  }
  return out;
}

bool UserId::IsZero() const {
  for (auto b : bytes) {
    if (b != 0) return false;
  }
  return true;
}

std::size_t UserIdHash::operator()(const UserId& id) const noexcept {
  std::uint64_t hi = 0, lo = 0;
  for (int i = 0; i < 8; ++i) {
    hi = hi << 8 | id.bytes[i];
    lo = lo << 8 | id.bytes[8 + i];
  }
  return static_cast<std::size_t>(SplitMix64(hi ^ SplitMix64(lo)));
}

std::int64_t ParseDate(std::string_view date) {
  auto bad = [&] {
    return DataError("date must be YYYY-MM-DD, got '" + std::string(date) + "'");
  };
  if (date.size() != 10 || date[4] != '-' || date[7] != '-') throw bad();
  auto num = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
      if (date[i] < '0' || date[i] > '9') throw bad();
      v = v * 10 + (date[i] - '0');
    }
    return v;
  };
  std::chrono::year_month_day ymd{std::chrono::year{num(0, 4)},
                                  std::chrono::month{static_cast<unsigned>(num(5, 2))},
                                  std::chrono::day{static_cast<unsigned>(num(8, 2))}};
  if (!ymd.ok()) throw bad();
  return std::chrono::sys_days{ymd}.time_since_epoch().count();
}

std::string FormatDate(std::int64_t days_since_epoch) {
  std::chrono::year_month_day ymd{
      std::chrono::sys_days{std::chrono::days{days_since_epoch}}};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

}  // namespace foodsurv
