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

#ifndef FOODSURV_COMMON_H_
#define FOODSURV_COMMON_H_

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace foodsurv {

// Integer UTC seconds. No time zones anywhere in the core.
using Timestamp = std::int64_t;

inline constexpr Timestamp kSecondsPerDay = 86400;
inline constexpr Timestamp kSecondsPerHour = 3600;

// Malformed input, referential or invariant failures. CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Divergence, separation, rank deficiency. CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration or arguments. CLI exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Opaque 128-bit user identifier. Serialized as 32 lowercase hex digits.
struct UserId {
  std::array<std::uint8_t, 16> bytes{};

  static UserId FromHex(std::string_view hex);  // throws DataError
  static UserId FromWords(std::uint64_t hi, std::uint64_t lo);
  std::string ToHex() const;
  bool IsZero() const;

  friend auto operator<=>(const UserId&, const UserId&) = default;
  friend bool operator==(const UserId&, const UserId&) = default;
};

struct UserIdHash {
  std::size_t operator()(const UserId& id) const noexcept;
};

// 64-bit FNV-1a over raw bytes.
constexpr std::uint64_t Fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Sub-seed derivation: (seed, label) -> seed. Every module draws its
// randomness from DeriveSeed(global_seed, "<module>") so stages can be re-run
// in isolation.
constexpr std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view label) {
  return SplitMix64(seed ^ SplitMix64(Fnv1a64(label)));
}

constexpr std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t a) {
  return SplitMix64(seed ^ SplitMix64(a + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t a,
                                   std::uint64_t b) {
  return DeriveSeed(DeriveSeed(seed, a), b);
}

// Maps 64 random bits to a double in the open interval (0, 1).
constexpr double ToUnitOpen(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

// Small counter-style URBG over SplitMix64; cheap to construct, so callers
// key a fresh one per (seed, entity, day) instead of sharing state.
class Rng {
 public:
  using result_type = std::uint64_t;
  explicit constexpr Rng(std::uint64_t seed) : state_(seed) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  constexpr result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double Uniform() { return ToUnitOpen((*this)()); }
  bool Bernoulli(double p) { return Uniform() < p; }
  // Uniform integer in [0, n).
  std::uint64_t Below(std::uint64_t n) {
    return static_cast<std::uint64_t>(Uniform() * static_cast<double>(n)) % n;
  }

 private:
  std::uint64_t state_;
};

// "YYYY-MM-DD" <-> days since 1970-01-01.
std::int64_t ParseDate(std::string_view date);  // throws DataError
std::string FormatDate(std::int64_t days_since_epoch);
inline std::int64_t DayOf(Timestamp ts) {
  return ts >= 0 ? ts / kSecondsPerDay : (ts - kSecondsPerDay + 1) / kSecondsPerDay;
}

}  // namespace foodsurv

#endif  // FOODSURV_COMMON_H_
