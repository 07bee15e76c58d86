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

// Pseudonymization, per-user contribution capping and Laplace release of
// per-restaurant counts with small-count suppression.

#ifndef FOODSURV_PRIVACY_H_
#define FOODSURV_PRIVACY_H_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "foodsurv/locmodel.h"
#include "foodsurv/logdata.h"

namespace foodsurv::privacy {

struct HashKey {
  std::array<std::uint8_t, 16> bytes{};

  static HashKey FromHex(std::string_view hex);  // throws UsageError
  static HashKey FromSeed(std::uint64_t seed);   // test-mode derivation
  std::string ToHex() const;
  bool IsZero() const;
};

struct PrivacyPolicy {
  bool enabled = true;
  double epsilon = 1.0;      // per released count
  double sensitivity = 1.0;  // guaranteed by CapContributions
  double suppress_below = 30.0;
  HashKey hash_key;
};

// Keyed BLAKE2b-128 of the raw id bytes.
UserId Pseudonymize(const UserId& raw, const HashKey& key);

// Replaces every user_id in queries and visits. Throws UsageError on a zero
// key.
Dataset AnonymizeIds(Dataset d, const HashKey& key);

// Keeps one link per (user, restaurant): the one with the earliest
// visit_exit_ts (ties: first in input). Input order is otherwise preserved.
std::vector<locmodel::ExposureLink> CapContributions(
    std::span<const locmodel::ExposureLink> links);

struct ReleasedAggregate {
  std::string restaurant_id;
  bool suppressed = false;
  // Zero when suppressed.
  double noised_visitors = 0.0;
  double noised_affected = 0.0;
  double released_proportion = 0.0;
  double signal = 0.0;  // Wilson lower bound on the noised counts
};

// Laplace(0, scale) noise from a counter-based stream keyed by
// (seed, restaurant_id); `counter` selects the draw within the stream.
double LaplaceNoise(std::uint64_t seed, std::string_view restaurant_id,
                    std::uint64_t counter, double scale);

// Adds independent Laplace(sensitivity / epsilon) noise to visitors and
// affected of every aggregate. Suppresses when noised visitors fall below
// suppress_below; otherwise the proportion is clamp(affected / max(visitors,
// 1), 0, 1). Output in restaurant_id order. With the policy disabled, raw
// counts pass through unsuppressed.
std::vector<ReleasedAggregate> Release(const locmodel::AggregateMap& aggregates,
                                       const PrivacyPolicy& policy,
                                       std::uint64_t seed);

// Ranking rows from the unsuppressed released aggregates.
std::vector<locmodel::RankCandidate> ToCandidates(
    std::span<const ReleasedAggregate> released);

}  // namespace foodsurv::privacy

#endif  // FOODSURV_PRIVACY_H_
