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

// Location model: joins positive queries to the restaurant visits that
// precede them within the incubation window, aggregates distinct visitors
// and affected visitors per restaurant, ranks restaurants by signal and
// attributes each affected user to a likely source.

#ifndef FOODSURV_LOCMODEL_H_
#define FOODSURV_LOCMODEL_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "foodsurv/logdata.h"

namespace foodsurv::locmodel {

inline constexpr Timestamp kIncubationWindowS = 72 * kSecondsPerHour;  // 259200

// One-sided 95% normal quantile.
inline constexpr double kWilsonZ = 1.6448536269514722;

struct ScoredQuery {
  UserId user_id;
  Timestamp ts = 0;
  double score = 0.0;
};

struct ExposureLink {
  UserId user_id;
  std::string restaurant_id;
  Timestamp visit_exit_ts = 0;  // earliest qualifying visit to this restaurant
  Timestamp first_positive_query_ts = 0;
  int recency_rank = 1;  // 1 = most recently visited qualifying restaurant

  friend bool operator==(const ExposureLink&, const ExposureLink&) = default;
};

struct LinkParams {
  Timestamp window_s = kIncubationWindowS;
  double threshold = 0.7;  // p*: a query with score >= p* is positive
};

// For every user with a positive query, anchors on the first one and links
// each visit with 0 < t_q - exit_ts <= window_s. One link per
// (user, restaurant): the earliest qualifying visit is kept. Recency ranks
// order the user's linked restaurants by their latest qualifying exit,
// descending. Output sorted by (user_id, recency_rank).
std::vector<ExposureLink> LinkExposures(std::span<const VisitEvent> visits,
                                        std::span<const ScoredQuery> queries,
                                        const LinkParams& params = {});

// Visits count when exit_ts is in [begin, end).
struct Period {
  Timestamp begin = 0;
  Timestamp end = 0;
  bool Contains(Timestamp t) const { return t >= begin && t < end; }
};

struct RestaurantAggregate {
  std::string restaurant_id;
  std::int64_t visitors = 0;
  std::int64_t affected = 0;
  double proportion = 0.0;
  double signal = 0.0;

  friend bool operator==(const RestaurantAggregate&, const RestaurantAggregate&) =
      default;
};

using AggregateMap = std::map<std::string, RestaurantAggregate>;

// Lower end of the one-sided Wilson score interval. Real-valued inputs are
// accepted so noised counts can be scored; n <= 0 yields 0.
double WilsonLowerBound(double successes, double n, double z = kWilsonZ);

// visitors: distinct users with a visit in `period`; affected: distinct users
// with a link to the restaurant whose visit lies in `period`.
AggregateMap AggregateRestaurants(std::span<const VisitEvent> visits,
                                  std::span<const ExposureLink> links,
                                  const Period& period);

// A ranking row; counts are real so privacy-released values fit.
struct RankCandidate {
  std::string restaurant_id;
  double visitors = 0.0;
  double affected = 0.0;
  double proportion = 0.0;
  double signal = 0.0;
};

std::vector<RankCandidate> ToCandidates(const AggregateMap& aggregates);

// Drops visitors < min_visitors and signal < cutoff; sorts by signal desc,
// visitors desc, restaurant_id asc.
std::vector<RankCandidate> RankRestaurants(std::vector<RankCandidate> candidates,
                                           double min_visitors, double cutoff);

struct SourceAttribution {
  UserId user_id;
  std::string restaurant_id;
  int recency_rank = 1;
};

// Fractions for recency ranks 1, 2, 3, 4+.
using AttributionHistogram = std::array<double, 4>;

struct Attribution {
  std::vector<SourceAttribution> sources;  // one per affected user
  AttributionHistogram histogram{};        // all zero when no affected users
};

// For each user the linked restaurant with maximum signal; ties go to the
// smaller recency rank. Throws DataError if a linked restaurant has no
// aggregate.
Attribution AttributeSources(std::span<const ExposureLink> links,
                             const AggregateMap& aggregates);

// CSV "rank,fraction" with ranks 1,2,3,4+.
void WriteHistogramCsv(const AttributionHistogram& h,
                       const std::filesystem::path& path);
AttributionHistogram ReadHistogramCsv(const std::filesystem::path& path);

}  // namespace foodsurv::locmodel

#endif  // FOODSURV_LOCMODEL_H_
