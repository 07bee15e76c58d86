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

// Deterministic synthetic city: restaurants with hidden safety states, diners,
// meal-borne infections with an incubation delay, symptom searches, biased
// complaints, routine and complaint-driven inspections, and simulated raters.
//
// Everything is a pure function of (config, seed). Per-user randomness is
// keyed by (seed, user, day) and per-inspection randomness by
// (seed, restaurant, date), so the output does not depend on evaluation order.

#ifndef FOODSURV_CITYSIM_H_
#define FOODSURV_CITYSIM_H_

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "foodsurv/logdata.h"
#include "foodsurv/wsm.h"

namespace foodsurv::citysim {

struct CitySpec {
  std::string name;
  int restaurants = 0;
};

struct SimConfig {
  std::vector<CitySpec> cities = {{"A", 150}, {"B", 150}};
  std::array<double, kNumRiskLevels> risk_mix = {0.53, 0.22, 0.25};
  std::array<double, kNumRiskLevels> unsafe_prob = {0.33, 0.23, 0.08};
  int users = 4000;
  int days = 45;
  std::string start_date = "2016-05-01";

  double meals_per_day = 0.6;
  int favorites = 6;         // per-user favourite restaurants in the home city
  double p_favorite = 0.7;   // a meal goes to a favourite with this probability

  double p_infect_unsafe = 0.05;
  double p_infect_safe = 0.003;
  double incubation_median_h = 24.0;  // lognormal, truncated to (6, 72] h
  double incubation_sigma = 0.6;
  double immune_days = 14.0;  // no reinfection within this many days of onset

  double p_search_given_ill = 0.7;
  double p_complaint_given_ill = 0.05;
  double p_blame_last = 0.75;

  double background_queries_per_day = 0.6;
  double p_symptom_query = 0.03;  // background share: ambiguous symptom searches
  double p_topic_query = 0.004;   // background share: foodborne-topic searches
  double p_ill_ambiguous = 0.35;  // ill searcher uses an ambiguous symptom phrase
  int results_per_query = 3;

  double routine_inspection_rate = 0.02;   // per restaurant per day
  double complaint_spurious_rate = 0.01;   // non-foodborne complaints, per restaurant per day
  double inspector_sensitivity = 0.9;
  double inspector_false_positive = 0.05;
  double critical_mean_safe = 0.2;
  double critical_mean_unsafe = 0.5;
  double major_mean_safe = 0.5;
  double major_mean_unsafe = 0.8;

  double rater_flip_md = 0.03;
  double rater_flip_non_md = 0.08;

  // Query phrase pools. Empty means the built-in vocabulary.
  std::vector<std::string> positive_phrases;
  std::vector<std::string> symptom_phrases;
  std::vector<std::string> topic_phrases;
  std::vector<std::string> background_phrases;
};

// Throws UsageError describing the first invalid field.
void ValidateConfig(const SimConfig& cfg);

enum class SafetyState { kSafe = 0, kUnsafe = 1 };

struct SimRestaurant {
  RestaurantRecord record;
  SafetyState state = SafetyState::kSafe;
};

struct SimUser {
  UserId raw_id;
  int home_city = 0;
  std::vector<int> favorites;  // indices into World::restaurants
};

// Latent states live here only; pipeline stages see the Dataset.
struct World {
  SimConfig cfg;
  std::vector<SimRestaurant> restaurants;
  std::vector<SimUser> users;
  std::vector<std::vector<int>> by_city;
  std::unordered_map<std::string, int> index;

  const SimRestaurant& At(const std::string& restaurant_id) const;  // DataError
};

World GenerateWorld(const SimConfig& cfg, std::uint64_t seed);

// Rebuilds a World (restaurants and states only) from saved ground truth.
World WorldFromStates(const SimConfig& cfg, std::span<const RestaurantRecord> registry,
                      const std::vector<SafetyState>& states);

struct Infection {
  UserId user_id;
  std::string restaurant_id;
  Timestamp meal_exit_ts = 0;
  Timestamp onset_ts = 0;
  bool searched = false;
  bool complained = false;
  std::string blamed_restaurant;  // empty when no complaint
};

struct GroundTruth {
  std::vector<Infection> infections;
  // Parallel to Dataset::queries: 1 when the query is about foodborne illness.
  std::vector<int> query_truth;
};

struct SimOutput {
  Dataset dataset;  // raw user ids; ROUTINE and COMPLAINT inspections only
  GroundTruth truth;
};

// Throws UsageError("days ≥ 1") when days < 1.
SimOutput Simulate(const World& world, int days, std::uint64_t seed);

InspectionRecord SimulateInspection(const World& world, const std::string& restaurant_id,
                                    std::int64_t date, std::uint64_t seed,
                                    Trigger trigger = Trigger::kRoutine);

// Each vote is the truth flipped with the rater-class flip probability.
wsm::JudgmentMatrix SimulateRaters(std::span<const int> truth_labels, double flip_md,
                                   double flip_non_md, std::uint64_t seed);

// Sampling helpers shared with tests.
std::int64_t SamplePoisson(Rng& rng, double mean);
double SampleNormal(Rng& rng);

}  // namespace foodsurv::citysim

#endif  // FOODSURV_CITYSIM_H_
