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

#include "foodsurv/privacy.h"

#include <sodium.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <utility>

namespace foodsurv::privacy {
namespace {

void EnsureSodium() {
  static const bool ok = sodium_init() >= 0;
  if (!ok) throw std::runtime_error("libsodium initialization failed");
}

}  // namespace

HashKey HashKey::FromHex(std::string_view hex) {
  try {
    return HashKey{UserId::FromHex(hex).bytes};
  } catch (const DataError&) {
    throw UsageError("hash key must be 32 hex digits");
  }
}

HashKey HashKey::FromSeed(std::uint64_t seed) {
  auto id = UserId::FromWords(DeriveSeed(seed, "hash_key.hi"),
                              DeriveSeed(seed, "hash_key.lo"));
  return HashKey{id.bytes};
}

std::string HashKey::ToHex() const { return UserId{bytes}.ToHex(); }

bool HashKey::IsZero() const { return UserId{bytes}.IsZero(); }

UserId Pseudonymize(const UserId& raw, const HashKey& key) {
  EnsureSodium();
  UserId out;
  crypto_generichash(out.bytes.data(), out.bytes.size(), raw.bytes.data(),
                     raw.bytes.size(), key.bytes.data(), key.bytes.size());
  return out;
}

Dataset AnonymizeIds(Dataset d, const HashKey& key) {
  if (key.IsZero()) throw UsageError("hash key must be non-zero");
  std::map<UserId, UserId> cache;
  auto map = [&](UserId& id) {
    auto it = cache.find(id);
    if (it == cache.end()) it = cache.emplace(id, Pseudonymize(id, key)).first;
    id = it->second;
  };
  for (auto& q : d.queries) map(q.user_id);
  for (auto& v : d.visits) map(v.user_id);
  return d;
}

std::vector<locmodel::ExposureLink> CapContributions(
    std::span<const locmodel::ExposureLink> links) {
  std::map<std::pair<UserId, std::string>, std::size_t> keep;
  for (std::size_t i = 0; i < links.size(); ++i) {
    auto key = std::make_pair(links[i].user_id, links[i].restaurant_id);
    auto [it, inserted] = keep.try_emplace(std::move(key), i);
    if (!inserted && links[i].visit_exit_ts < links[it->second].visit_exit_ts) {
      it->second = i;
    }
  }
  std::vector<std::size_t> idx;
  idx.reserve(keep.size());
  for (const auto& [_, i] : keep) idx.push_back(i);
  std::sort(idx.begin(), idx.end());
  std::vector<locmodel::ExposureLink> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(links[i]);
  return out;
}

double LaplaceNoise(std::uint64_t seed, std::string_view restaurant_id,
                    std::uint64_t counter, double scale) {
  const std::uint64_t stream = DeriveSeed(seed, Fnv1a64(restaurant_id));
  const double u = ToUnitOpen(SplitMix64(stream + counter * 0x9e3779b97f4a7c15ULL));
  // Inverse CDF of the Laplace distribution.
  return u < 0.5 ? scale * std::log(2 * u) : -scale * std::log(2 * (1 - u));
}

std::vector<ReleasedAggregate> Release(const locmodel::AggregateMap& aggregates,
                                       const PrivacyPolicy& policy,
                                       std::uint64_t seed) {
  if (policy.enabled && !(policy.epsilon > 0)) {
    throw UsageError("privacy epsilon must be > 0");
  }
  const double scale = policy.sensitivity / policy.epsilon;
  std::vector<ReleasedAggregate> out;
  out.reserve(aggregates.size());
  for (const auto& [id, a] : aggregates) {
    ReleasedAggregate r;
    r.restaurant_id = id;
    double v = static_cast<double>(a.visitors);
    double x = static_cast<double>(a.affected);
    if (policy.enabled) {
      v += LaplaceNoise(seed, id, 0, scale);
      x += LaplaceNoise(seed, id, 1, scale);
      if (v < policy.suppress_below) {
        r.suppressed = true;
        out.push_back(std::move(r));
        continue;
      }
    }
    r.noised_visitors = v;
    r.noised_affected = x;
    r.released_proportion = std::clamp(x / std::max(v, 1.0), 0.0, 1.0);
    r.signal = locmodel::WilsonLowerBound(r.released_proportion * std::max(v, 1.0),
                                          std::max(v, 1.0));
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<locmodel::RankCandidate> ToCandidates(
    std::span<const ReleasedAggregate> released) {
  std::vector<locmodel::RankCandidate> out;
  for (const auto& r : released) {
    if (r.suppressed) continue;
    out.push_back({r.restaurant_id, r.noised_visitors, r.noised_affected,
                   r.released_proportion, r.signal});
  }
  return out;
}

}  // namespace foodsurv::privacy
