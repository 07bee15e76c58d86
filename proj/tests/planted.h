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

// Planted-truth generators shared by unit tests and the acceptance suite.

#ifndef FOODSURV_TESTS_PLANTED_H_
#define FOODSURV_TESTS_PLANTED_H_

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "foodsurv/common.h"
#include "foodsurv/locmodel.h"
#include "foodsurv/stats.h"

namespace foodsurv::testing {

struct PlantedAttribution {
  std::array<double, 4> planted_fraction{};  // realised, from the draws
  locmodel::Attribution attribution;
  std::size_t affected_users = 0;
};

// Every affected user eats at 1-6 restaurants in the 48 h before their first
// positive query; the source sits at a planted recency rank (4+ spread over
// ranks 4-6) and is one of a few high-attack restaurants, the others are
// drawn from a large background pool. Healthy users dilute every restaurant.
inline PlantedAttribution PlantAttribution(const std::array<double, 4>& rank_probs,
                                           int affected_users, std::uint64_t seed) {
  constexpr int kSources = 100;
  constexpr int kBackground = 2000;
  const int healthy_users = 5 * affected_users;
  constexpr Timestamp kT0 = 1'000'000'000;
  Rng rng(seed);

  auto name = [](const char* prefix, int i) { return prefix + std::to_string(i); };
  std::vector<VisitEvent> visits;
  std::vector<locmodel::ScoredQuery> queries;
  std::array<double, 4> planted{};
  std::uint64_t next_user = 1;

  for (int u = 0; u < affected_users; ++u) {
    UserId id = UserId::FromWords(1, next_user++);
    double x = rng.Uniform();
    int rank = 1;
    for (double acc = rank_probs[0]; rank < 4 && x >= acc; acc += rank_probs[rank++]) {
    }
    planted[static_cast<std::size_t>(rank - 1)] += 1;
    if (rank == 4) rank += static_cast<int>(rng.Below(3));
    int meals = rank + static_cast<int>(rng.Below(static_cast<std::uint64_t>(7 - rank)));
    Timestamp tq = kT0 + static_cast<Timestamp>(rng.Below(30 * kSecondsPerDay));
    for (int j = 1; j <= meals; ++j) {
      // Meal j counted back from the query: exits at tq - j * 7h.
      Timestamp exit = tq - j * 7 * kSecondsPerHour;
      std::string r = j == rank ? name("src", static_cast<int>(rng.Below(kSources)))
                                : name("bg", static_cast<int>(rng.Below(kBackground)));
      visits.push_back({id, r, exit - 3600, exit});
    }
    queries.push_back({id, tq, 0.95});
  }
  for (int u = 0; u < healthy_users; ++u) {
    UserId id = UserId::FromWords(2, next_user++);
    for (int j = 0; j < 3; ++j) {
      Timestamp exit = kT0 + static_cast<Timestamp>(rng.Below(30 * kSecondsPerDay));
      std::string r = rng.Bernoulli(0.02) ? name("src", static_cast<int>(rng.Below(kSources)))
                                          : name("bg", static_cast<int>(rng.Below(kBackground)));
      visits.push_back({id, r, exit - 3600, exit});
    }
    queries.push_back({id, kT0, 0.05});
  }

  auto links = locmodel::LinkExposures(visits, queries);
  auto aggregates = locmodel::AggregateRestaurants(
      visits, links, {kT0 - 10 * kSecondsPerDay, kT0 + 40 * kSecondsPerDay});
  PlantedAttribution out;
  out.attribution = locmodel::AttributeSources(links, aggregates);
  out.affected_users = out.attribution.sources.size();
  for (auto& p : planted) p /= affected_users;
  out.planted_fraction = planted;
  return out;
}

// Rows with risk-level confounding and a planted group odds ratio:
// FINDER membership is more likely at High risk, and risk itself raises the
// odds of an Unsafe outcome.
struct PlantedLogitData {
  std::vector<stats::DesignRow> rows;
  stats::DesignMatrix design;
  std::vector<int> y;
};

inline PlantedLogitData PlantLogit(double group_or, int rows, std::uint64_t seed) {
  Rng rng(seed);
  PlantedLogitData d;
  const double beta_group = std::log(group_or);
  const double beta_risk[3] = {0.0, -0.5, -1.5};
  const double p_group[3] = {0.35, 0.2, 0.1};
  for (int i = 0; i < rows; ++i) {
    double r = rng.Uniform();
    int risk = r < 0.53 ? 0 : (r < 0.75 ? 1 : 2);
    int g = rng.Bernoulli(p_group[risk]) ? 1 : 0;
    double eta = -1.0 + beta_group * g + beta_risk[risk];
    d.rows.push_back({g, "A", static_cast<RiskLevel>(risk)});
    d.y.push_back(rng.Bernoulli(1.0 / (1.0 + std::exp(-eta))) ? 1 : 0);
  }
  d.design = stats::BuildDesign(d.rows, false, true);
  return d;
}

}  // namespace foodsurv::testing

#endif  // FOODSURV_TESTS_PLANTED_H_
