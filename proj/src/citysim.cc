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

#include "foodsurv/citysim.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

namespace foodsurv::citysim {
namespace {

struct Page {
  const char* url;
  const char* title;
  const char* snippet;
  std::vector<const char*> tags;
};

const std::vector<Page>& FoodbornePages() {
  static const std::vector<Page> kPages = {
      {"https://www.cdc.gov/foodsafety/symptoms.html",
       "Symptoms of Food Poisoning | Food Safety | CDC",
       "Common symptoms of foodborne illness include upset stomach, stomach cramps, "
       "nausea, vomiting, diarrhea and fever.",
       {"foodborne_illness", "food_safety"}},
      {"https://en.wikipedia.org/wiki/Foodborne_illness", "Foodborne illness - Wikipedia",
       "Foodborne illness is any illness resulting from the consumption of contaminated "
       "food, pathogenic bacteria, viruses, or parasites.",
       {"foodborne_illness"}},
      {"https://www.mayoclinic.org/diseases-conditions/food-poisoning/symptoms-causes",
       "Food poisoning - Symptoms and causes - Mayo Clinic",
       "Food poisoning symptoms vary with the source of contamination and usually start "
       "within hours of eating contaminated food.",
       {"foodborne_illness"}},
      {"https://www.webmd.com/food-recipes/food-poisoning/food-poisoning-symptoms",
       "Food Poisoning: Symptoms, Causes, and Treatment",
       "Learn how long food poisoning lasts, when to see a doctor, and how to stay "
       "hydrated while you recover.",
       {"foodborne_illness"}},
      {"https://www.cdc.gov/salmonella/general/index.html", "Salmonella Homepage | CDC",
       "Most people infected with Salmonella develop diarrhea, fever, and stomach "
       "cramps 6 hours to 6 days after infection.",
       {"foodborne_illness", "salmonella"}},
      {"https://www.cdc.gov/norovirus/about/symptoms.html",
       "Norovirus Symptoms | CDC",
       "Norovirus causes vomiting and diarrhea; it spreads through contaminated food, "
       "water and surfaces.",
       {"foodborne_illness", "norovirus"}},
      {"https://www.foodsafety.gov/food-poisoning", "Food Poisoning | FoodSafety.gov",
       "Food poisoning, also called foodborne illness, is caused by eating "
       "contaminated food.",
       {"foodborne_illness", "food_safety"}},
      {"https://www.healthline.com/health/food-poisoning",
       "Food Poisoning: How Long It Lasts, Symptoms, and Treatment",
       "Most cases of food poisoning resolve within 48 hours; watch for signs of "
       "dehydration.",
       {"foodborne_illness"}},
      {"https://www.fda.gov/food/outbreaks-foodborne-illness",
       "Outbreaks of Foodborne Illness | FDA",
       "Investigations of multistate outbreaks and food recalls linked to "
       "contaminated products.",
       {"foodborne_illness", "outbreak"}},
      {"https://www.nhs.uk/conditions/food-poisoning", "Food poisoning - NHS",
       "Food poisoning is rarely serious and usually gets better within a week; "
       "eat when you feel able to.",
       {"foodborne_illness"}},
  };
  return kPages;
}

const std::vector<Page>& HealthPages() {
  static const std::vector<Page> kPages = {
      {"https://www.webmd.com/digestive-disorders/diarrhea-overview",
       "Diarrhea: Causes, Symptoms, Treatment",
       "Diarrhea is loose, watery stools; causes include viruses, medications, and "
       "digestive disorders.",
       {"digestive_health"}},
      {"https://www.mayoclinic.org/diseases-conditions/viral-gastroenteritis",
       "Viral gastroenteritis (stomach flu) - Mayo Clinic",
       "Stomach flu is an intestinal infection marked by watery diarrhea, abdominal "
       "cramps, nausea or vomiting.",
       {"stomach_flu"}},
      {"https://www.healthline.com/health/nausea", "Nausea: Causes and When to See a Doctor",
       "Nausea can be caused by motion sickness, migraines, pregnancy or medication.",
       {"digestive_health"}},
      {"https://www.webmd.com/baby/morning-sickness", "Morning Sickness: Nausea in Pregnancy",
       "Morning sickness is nausea and vomiting during pregnancy and can happen at any "
       "time of day.",
       {"pregnancy"}},
      {"https://www.cdc.gov/flu/symptoms/symptoms.htm", "Flu Symptoms & Complications | CDC",
       "Flu symptoms include fever, chills, cough, sore throat, muscle aches and "
       "fatigue.",
       {"influenza"}},
      {"https://www.medicalnewstoday.com/articles/ibs",
       "Irritable bowel syndrome (IBS): Symptoms and treatment",
       "IBS causes cramping, abdominal pain, bloating, gas, and diarrhea or "
       "constipation.",
       {"ibs"}},
      {"https://www.drugs.com/pepto-bismol.html", "Pepto-Bismol Uses, Dosage & Side Effects",
       "Bismuth subsalicylate treats heartburn, indigestion, upset stomach and "
       "diarrhea.",
       {"medication"}},
      {"https://www.reddit.com/r/AskDocs/comments/stomach_pain",
       "Stomach pain for two days, should I worry? : AskDocs",
       "Sharp pain in lower stomach since Sunday, no fever, is this appendicitis?",
       {"digestive_health"}},
      {"https://www.clevelandclinic.org/health/migraine", "Migraine Headaches | Cleveland Clinic",
       "Migraines can cause nausea, sensitivity to light and throbbing headache pain.",
       {"migraine"}},
  };
  return kPages;
}

const std::vector<Page>& GenericPages() {
  static const std::vector<Page> kPages = {
      {"https://weather.com/weather/tenday", "10 Day Weather Forecast",
       "Hourly and ten day forecast with temperature, wind and precipitation.", {"weather"}},
      {"https://www.espn.com/nba/scoreboard", "NBA Scoreboard - ESPN",
       "Live scores and highlights from every game tonight.", {"sports"}},
      {"https://www.imdb.com/showtimes", "Movie Showtimes near you - IMDb",
       "Find showtimes and buy tickets at theaters near you.", {"movies"}},
      {"https://www.yelp.com/search?find_desc=tacos", "Best Tacos near me - Yelp",
       "Top rated taco spots with reviews, photos and menus.", {"restaurant"}},
      {"https://www.yelp.com/search?find_desc=pizza", "Top 10 Best Pizza near you - Yelp",
       "Reviews of pizza places open now with delivery and takeout.", {"restaurant"}},
      {"https://www.opentable.com/brunch", "Best Brunch Restaurants | OpenTable",
       "Book a table for brunch this weekend at the best restaurants in town.",
       {"restaurant"}},
      {"https://www.allrecipes.com/recipes/chicken", "Chicken Recipes | Allrecipes",
       "Easy chicken dinner recipes with ratings, reviews and cooking tips.", {"recipes"}},
      {"https://www.amazon.com/deals", "Today's Deals - Amazon",
       "Lightning deals and discounts on electronics, home and kitchen.", {"shopping"}},
      {"https://www.cnn.com/us", "US News - CNN", "Latest news headlines and breaking stories.",
       {"news"}},
      {"https://www.google.com/flights", "Cheap Flights - Google Flights",
       "Compare fares and find cheap flights to any destination.", {"travel"}},
      {"https://www.gasbuddy.com", "Gas Prices near me - GasBuddy",
       "Find the cheapest gas prices at stations near you.", {"auto"}},
      {"https://finance.yahoo.com/markets", "Stock Market Today - Yahoo Finance",
       "Market data, quotes and financial news.", {"finance"}},
      {"https://www.mlb.com/scores", "MLB Scores - MLB.com", "Baseball scores and standings.",
       {"sports"}},
      {"https://www.ticketmaster.com/concerts", "Concert Tickets | Ticketmaster",
       "Buy tickets for concerts and live events near you.", {"events"}},
      {"https://www.transitchicago.com/schedules", "Bus and Train Schedules",
       "Route maps, schedules and service alerts.", {"transit"}},
      {"https://www.wikihow.com/Tie-a-Tie", "How to Tie a Tie - wikiHow",
       "Step by step instructions with pictures.", {"howto"}},
      {"https://www.starbucks.com/store-locator", "Store Locator - Starbucks",
       "Find a coffee shop near you with hours and directions.", {"restaurant"}},
      {"https://www.grubhub.com/delivery/thai", "Thai Food Delivery | Grubhub",
       "Order Thai food online for delivery or pickup.", {"restaurant"}},
  };
  return kPages;
}

const std::vector<std::string>& DefaultPositive() {
  static const std::vector<std::string> k = {
      "food poisoning", "food poisoning symptoms", "how long does food poisoning last",
      "food poisoning treatment", "sick after eating out", "vomiting after eating",
      "stomach cramps after eating", "diarrhea after restaurant", "threw up after dinner",
      "salmonella symptoms", "norovirus symptoms", "e coli symptoms",
      "food poisoning vs stomach flu", "what to eat after food poisoning",
      "bad sushi symptoms", "undercooked chicken sick", "food poisoning fever",
      "food poisoning remedies", "food poisening", "food posioning symptoms"};
  return k;
}

const std::vector<std::string>& DefaultSymptom() {
  static const std::vector<std::string> k = {
      "diarrhea", "nausea", "stomach ache", "vomiting", "stomach pain", "upset stomach",
      "cramps and diarrhea", "fever and chills", "stomach flu", "throwing up",
      "nausea and headache", "pepto bismol dosage", "diarhea", "stomach bug"};
  return k;
}

const std::vector<std::string>& DefaultTopic() {
  static const std::vector<std::string> k = {
      "salmonella outbreak", "e coli outbreak", "food poisoning statistics",
      "listeria recall", "norovirus outbreak cruise", "how to prevent food poisoning",
      "foodborne illness", "chipotle e coli"};
  return k;
}

const std::vector<std::string>& DefaultBackground() {
  static const std::vector<std::string> k = {
      "weather tomorrow", "pizza near me", "best tacos", "movie times", "nba scores",
      "cheap flights", "chicken recipe", "restaurant reviews", "coffee shop open now",
      "gas prices", "news today", "how to tie a tie", "sushi near me",
      "thai food delivery", "brunch spots", "happy hour deals", "bus schedule",
      "stock market", "baseball scores", "concert tickets", "yoga class",
      "haircut near me", "dentist appointment", "car wash", "grocery store hours",
      "pho restaurant", "burger place", "vegan restaurant", "steakhouse reservations",
      "ice cream shop"};
  return k;
}

const std::vector<std::string>& Tails() {
  static const std::vector<std::string> k = {
      "today", "tonight", "yesterday", "now", "reddit", "2016", "downtown", "chicago",
      "vegas", "help", "fast", "adult", "child", "toddler", "after 2 days", "all night",
      "no fever", "with fever", "and chills", "and headache", "bad", "severe", "mild",
      "weekend", "monday", "friday", "near me", "open late", "best", "cheap"};
  return k;
}

const std::vector<std::string>& HealthPrefixes() {
  static const std::vector<std::string> k = {"", "", "", "my", "kids", "why", "is it",
                                             "can you get"};
  return k;
}

const std::vector<std::string>& HealthSuffixes() {
  static const std::vector<std::string> k = {
      "",       "",      "",          "remedy", "how long", "at night", "what to do",
      "symptoms", "treatment", "24 hours", "cure",   "help"};
  return k;
}

const std::vector<std::string>& BackgroundSuffixes() {
  static const std::vector<std::string> k = {"", "", "", "today", "open now", "reviews",
                                             "2016", "cheap"};
  return k;
}

enum class QueryKind { kIllSearch, kTopic, kSymptom, kGeneric };
enum class PhraseClass { kPositive, kSymptom, kGeneric };

const std::string& Pick(const std::vector<std::string>& v, Rng& rng) {
  return v[rng.Below(v.size())];
}

double SampleLogNormal(Rng& rng, double median, double sigma) {
  return median * std::exp(sigma * SampleNormal(rng));
}

std::string Misspell(std::string text, Rng& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> words;  // [begin, end)
  for (std::size_t i = 0; i < text.size();) {
    while (i < text.size() && text[i] == ' ') ++i;
    std::size_t b = i;
    while (i < text.size() && text[i] != ' ') ++i;
    if (i - b >= 4) words.emplace_back(b, i);
  }
  if (words.empty()) return text;
  auto [b, e] = words[rng.Below(words.size())];
  std::size_t pos = b + 1 + rng.Below(e - b - 2);
  if (rng.Bernoulli(0.5)) {
    std::swap(text[pos], text[pos + 1]);
  } else {
    text.erase(pos, 1);
  }
  return text;
}

std::string Compose(const std::string& core, PhraseClass cls, Rng& rng) {
  std::string text;
  const bool health = cls != PhraseClass::kGeneric;
  if (health) {
    const auto& p = Pick(HealthPrefixes(), rng);
    if (!p.empty()) text = p + " ";
  }
  text += core;
  const auto& s = Pick(health ? HealthSuffixes() : BackgroundSuffixes(), rng);
  if (!s.empty()) text += " " + s;
  if (rng.Bernoulli(0.5)) text += " " + Pick(Tails(), rng);
  if (health && rng.Bernoulli(0.12)) text = Misspell(std::move(text), rng);
  return text;
}

ResultPage ToResult(const Page& p) {
  ResultPage r;
  r.url = p.url;
  r.title = p.title;
  r.snippet = p.snippet;
  for (const char* t : p.tags) r.concept_tags.insert(t);
  return r;
}

std::vector<ResultPage> MakeResults(PhraseClass cls, int count, Rng& rng) {
  double p_food = cls == PhraseClass::kPositive ? 0.8 : cls == PhraseClass::kSymptom ? 0.3 : 0.0;
  std::vector<ResultPage> out;
  std::vector<const Page*> used;
  for (int i = 0; i < count; ++i) {
    for (int attempt = 0; attempt < 16; ++attempt) {
      const std::vector<Page>* pool = &GenericPages();
      if (cls != PhraseClass::kGeneric) {
        pool = rng.Bernoulli(p_food) ? &FoodbornePages() : &HealthPages();
      } else if (rng.Bernoulli(0.02)) {
        pool = &HealthPages();
      }
      const Page* page = &(*pool)[rng.Below(pool->size())];
      if (std::find(used.begin(), used.end(), page) != used.end()) continue;
      used.push_back(page);
      out.push_back(ToResult(*page));
      break;
    }
  }
  return out;
}

double RoundDwell(double s) { return std::max(0.1, std::round(s * 10.0) / 10.0); }

void ApplyClicks(QueryKind kind, std::vector<ResultPage>& results, Rng& rng) {
  if (results.empty()) return;
  auto foodborne = std::find_if(results.begin(), results.end(), [](const ResultPage& r) {
    return r.concept_tags.contains(std::string(wsm::kFoodborneTag));
  });
  ResultPage* target = nullptr;
  double dwell = 0.0;
  switch (kind) {
    case QueryKind::kIllSearch:
      if (foodborne != results.end() && rng.Bernoulli(0.85)) {
        target = &*foodborne;
        dwell = SampleLogNormal(rng, 75.0, 0.6);
      } else if (rng.Bernoulli(0.4)) {
        target = &results[rng.Below(results.size())];
        dwell = SampleLogNormal(rng, 20.0, 0.8);
      }
      break;
    case QueryKind::kTopic:
      if (foodborne != results.end() && rng.Bernoulli(0.7)) {
        target = &*foodborne;
        dwell = SampleLogNormal(rng, 45.0, 0.8);
      }
      break;
    case QueryKind::kSymptom:
      if (rng.Bernoulli(0.6)) {
        target = &results[rng.Below(results.size())];
        dwell = SampleLogNormal(rng, 25.0, 0.9);
      }
      break;
    case QueryKind::kGeneric:
      if (rng.Bernoulli(0.5)) {
        target = &results[rng.Below(results.size())];
        dwell = SampleLogNormal(rng, 30.0, 0.9);
      }
      break;
  }
  if (target != nullptr) {
    target->clicked = true;
    target->dwell_s = RoundDwell(dwell);
  }
}

struct PhrasePools {
  const std::vector<std::string>& positive;
  const std::vector<std::string>& symptom;
  const std::vector<std::string>& topic;
  const std::vector<std::string>& background;
};

PhrasePools Pools(const SimConfig& cfg) {
  return {cfg.positive_phrases.empty() ? DefaultPositive() : cfg.positive_phrases,
          cfg.symptom_phrases.empty() ? DefaultSymptom() : cfg.symptom_phrases,
          cfg.topic_phrases.empty() ? DefaultTopic() : cfg.topic_phrases,
          cfg.background_phrases.empty() ? DefaultBackground() : cfg.background_phrases};
}

struct PendingQuery {
  QueryEvent event;
  int truth = 0;
};

QueryEvent MakeQuery(const UserId& user, Timestamp ts, QueryKind kind,
                     const SimConfig& cfg, const PhrasePools& pools, Rng& rng) {
  QueryEvent q;
  q.user_id = user;
  q.ts = ts;
  PhraseClass cls = PhraseClass::kGeneric;
  const std::string* core = nullptr;
  switch (kind) {
    case QueryKind::kIllSearch:
      if (rng.Bernoulli(cfg.p_ill_ambiguous)) {
        cls = PhraseClass::kSymptom;
        core = &Pick(pools.symptom, rng);
      } else {
        cls = PhraseClass::kPositive;
        core = &Pick(pools.positive, rng);
      }
      break;
    case QueryKind::kTopic:
      cls = PhraseClass::kPositive;
      core = &Pick(pools.topic, rng);
      break;
    case QueryKind::kSymptom:
      cls = PhraseClass::kSymptom;
      core = &Pick(pools.symptom, rng);
      break;
    case QueryKind::kGeneric:
      core = &Pick(pools.background, rng);
      break;
  }
  q.text = Compose(*core, cls, rng);
  q.results = MakeResults(cls, cfg.results_per_query, rng);
  ApplyClicks(kind, q.results, rng);
  return q;
}

double IncubationHours(const SimConfig& cfg, Rng& rng) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    double h = SampleLogNormal(rng, cfg.incubation_median_h, cfg.incubation_sigma);
    if (h > 6.0 && h <= 72.0) return h;
  }
  return std::clamp(cfg.incubation_median_h, 6.0 + 1.0 / 3600.0, 72.0);
}

void CheckProbability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw UsageError(std::string("sim.") + name + " must be a probability in [0,1]");
  }
}

}  // namespace

std::int64_t SamplePoisson(Rng& rng, double mean) {
  if (mean <= 0) return 0;
  if (mean < 30.0) {
    const double limit = std::exp(-mean);
    std::int64_t k = 0;
    double prod = rng.Uniform();
    while (prod > limit) {
      ++k;
      prod *= rng.Uniform();
    }
    return k;
  }
  double x = std::round(mean + std::sqrt(mean) * SampleNormal(rng));
  return std::max<std::int64_t>(0, static_cast<std::int64_t>(x));
}

double SampleNormal(Rng& rng) {
  double u1 = rng.Uniform(), u2 = rng.Uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

void ValidateConfig(const SimConfig& cfg) {
  double mix = 0.0;
  for (double p : cfg.risk_mix) {
    CheckProbability(p, "risk_mix");
    mix += p;
  }
  if (std::fabs(mix - 1.0) > 1e-9) throw UsageError("sim.risk_mix must sum to 1");
  for (double p : cfg.unsafe_prob) CheckProbability(p, "unsafe_prob");
  CheckProbability(cfg.p_favorite, "p_favorite");
  CheckProbability(cfg.p_infect_unsafe, "p_infect_unsafe");
  CheckProbability(cfg.p_infect_safe, "p_infect_safe");
  CheckProbability(cfg.p_search_given_ill, "p_search_given_ill");
  CheckProbability(cfg.p_complaint_given_ill, "p_complaint_given_ill");
  CheckProbability(cfg.p_blame_last, "p_blame_last");
  CheckProbability(cfg.p_symptom_query, "p_symptom_query");
  CheckProbability(cfg.p_topic_query, "p_topic_query");
  CheckProbability(cfg.p_ill_ambiguous, "p_ill_ambiguous");
  CheckProbability(cfg.routine_inspection_rate, "routine_inspection_rate");
  CheckProbability(cfg.complaint_spurious_rate, "complaint_spurious_rate");
  CheckProbability(cfg.inspector_sensitivity, "inspector_sensitivity");
  CheckProbability(cfg.inspector_false_positive, "inspector_false_positive");
  CheckProbability(cfg.rater_flip_md, "rater_flip_md");
  CheckProbability(cfg.rater_flip_non_md, "rater_flip_non_md");
  if (cfg.p_symptom_query + cfg.p_topic_query > 1.0) {
    throw UsageError("sim.p_symptom_query + sim.p_topic_query must not exceed 1");
  }
  for (const auto& c : cfg.cities) {
    if (c.name.empty() || c.restaurants < 0) throw UsageError("sim.cities entries need name:count");
  }
  if (cfg.users < 0) throw UsageError("sim.users must be >= 0");
  if (cfg.favorites < 0) throw UsageError("sim.favorites must be >= 0");
  if (cfg.meals_per_day < 0 || cfg.background_queries_per_day < 0) {
    throw UsageError("sim rates must be non-negative");
  }
  if (!(cfg.incubation_median_h > 0) || cfg.incubation_sigma < 0) {
    throw UsageError("sim.incubation parameters must be positive");
  }
  if (cfg.results_per_query < 0 || cfg.results_per_query > static_cast<int>(kMaxResultsPerQuery)) {
    throw UsageError("sim.results_per_query must be in [0,10]");
  }
  if (cfg.critical_mean_safe < 0 || cfg.critical_mean_unsafe < 0 || cfg.major_mean_safe < 0 ||
      cfg.major_mean_unsafe < 0) {
    throw UsageError("sim violation means must be non-negative");
  }
  ParseDate(cfg.start_date);
}

const SimRestaurant& World::At(const std::string& restaurant_id) const {
  auto it = index.find(restaurant_id);
  if (it == index.end()) throw DataError("unknown restaurant '" + restaurant_id + "'");
  return restaurants[static_cast<std::size_t>(it->second)];
}

World GenerateWorld(const SimConfig& cfg, std::uint64_t seed) {
  ValidateConfig(cfg);
  World w;
  w.cfg = cfg;
  w.by_city.resize(cfg.cities.size());
  Rng rng(DeriveSeed(seed, "world.restaurants"));
  for (std::size_t c = 0; c < cfg.cities.size(); ++c) {
    for (int k = 0; k < cfg.cities[c].restaurants; ++k) {
      SimRestaurant r;
      char id[64];
      std::snprintf(id, sizeof(id), "%s-%04d", cfg.cities[c].name.c_str(), k + 1);
      r.record.restaurant_id = id;
      r.record.city = cfg.cities[c].name;
      double u = rng.Uniform();
      int risk = u < cfg.risk_mix[0] ? 0 : u < cfg.risk_mix[0] + cfg.risk_mix[1] ? 1 : 2;
      r.record.risk_level = static_cast<RiskLevel>(risk);
      r.state = rng.Bernoulli(cfg.unsafe_prob[static_cast<std::size_t>(risk)])
                    ? SafetyState::kUnsafe
                    : SafetyState::kSafe;
      w.index.emplace(r.record.restaurant_id, static_cast<int>(w.restaurants.size()));
      w.by_city[c].push_back(static_cast<int>(w.restaurants.size()));
      w.restaurants.push_back(std::move(r));
    }
  }

  const auto total = static_cast<double>(w.restaurants.size());
  for (int u = 0; u < cfg.users; ++u) {
    Rng ur(DeriveSeed(DeriveSeed(seed, "world.user"), static_cast<std::uint64_t>(u)));
    SimUser user;
    user.raw_id = UserId::FromWords(ur(), ur());
    if (total > 0) {
      double pick = ur.Uniform() * total, acc = 0.0;
      for (std::size_t c = 0; c < cfg.cities.size(); ++c) {
        acc += static_cast<double>(w.by_city[c].size());
        if (pick < acc || c + 1 == cfg.cities.size()) {
          user.home_city = static_cast<int>(c);
          if (!w.by_city[c].empty()) break;
        }
      }
      auto pool = w.by_city[static_cast<std::size_t>(user.home_city)];
      std::size_t k = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(cfg.favorites));
      for (std::size_t i = 0; i < k; ++i) {
        std::swap(pool[i], pool[i + ur.Below(pool.size() - i)]);
        user.favorites.push_back(pool[i]);
      }
    }
    w.users.push_back(std::move(user));
  }
  return w;
}

World WorldFromStates(const SimConfig& cfg, std::span<const RestaurantRecord> registry,
                      const std::vector<SafetyState>& states) {
  if (states.size() != registry.size()) throw DataError("latent state count mismatch");
  World w;
  w.cfg = cfg;
  for (std::size_t i = 0; i < registry.size(); ++i) {
    w.index.emplace(registry[i].restaurant_id, static_cast<int>(i));
    w.restaurants.push_back({registry[i], states[i]});
  }
  return w;
}

SimOutput Simulate(const World& world, int days, std::uint64_t seed) {
  if (days < 1) throw UsageError("days ≥ 1");
  const SimConfig& cfg = world.cfg;
  const auto pools = Pools(cfg);
  const std::int64_t start_day = ParseDate(cfg.start_date);
  const Timestamp start_ts = start_day * kSecondsPerDay;
  const Timestamp end_ts = start_ts + days * kSecondsPerDay;

  SimOutput out;
  std::vector<PendingQuery> queries;
  std::vector<std::vector<std::size_t>> user_visits(world.users.size());
  std::vector<Timestamp> immune_until(world.users.size(), std::numeric_limits<Timestamp>::min());

  static constexpr int kMealHours[] = {8, 12, 19};
  for (int d = 0; d < days; ++d) {
    const Timestamp day_ts = start_ts + d * kSecondsPerDay;
    for (std::size_t u = 0; u < world.users.size(); ++u) {
      const auto& user = world.users[u];
      Rng rng(DeriveSeed(seed, static_cast<std::uint64_t>(u), static_cast<std::uint64_t>(d)));

      // Meals: distinct slots, at most three a day.
      if (!world.by_city.empty() &&
          !world.by_city[static_cast<std::size_t>(user.home_city)].empty()) {
        const auto& city = world.by_city[static_cast<std::size_t>(user.home_city)];
        auto meals = std::min<std::int64_t>(3, SamplePoisson(rng, cfg.meals_per_day));
        std::array<int, 3> slots = {0, 1, 2};
        for (std::int64_t m = 0; m < meals; ++m) {
          std::swap(slots[static_cast<std::size_t>(m)],
                    slots[static_cast<std::size_t>(m) + rng.Below(3 - static_cast<std::uint64_t>(m))]);
        }
        std::sort(slots.begin(), slots.begin() + meals);
        for (std::int64_t m = 0; m < meals; ++m) {
          int r = (!user.favorites.empty() && rng.Bernoulli(cfg.p_favorite))
                      ? user.favorites[rng.Below(user.favorites.size())]
                      : city[rng.Below(city.size())];
          const auto& rest = world.restaurants[static_cast<std::size_t>(r)];
          VisitEvent v;
          v.user_id = user.raw_id;
          v.restaurant_id = rest.record.restaurant_id;
          v.entry_ts = day_ts + kMealHours[slots[static_cast<std::size_t>(m)]] * kSecondsPerHour +
                       static_cast<Timestamp>(rng.Below(3600));
          v.exit_ts = v.entry_ts + 1200 + static_cast<Timestamp>(rng.Below(4200));
          user_visits[u].push_back(out.dataset.visits.size());
          out.dataset.visits.push_back(v);

          double p = rest.state == SafetyState::kUnsafe ? cfg.p_infect_unsafe : cfg.p_infect_safe;
          if (v.exit_ts < immune_until[u] || !rng.Bernoulli(p)) continue;
          Infection inf;
          inf.user_id = user.raw_id;
          inf.restaurant_id = rest.record.restaurant_id;
          inf.meal_exit_ts = v.exit_ts;
          inf.onset_ts = v.exit_ts +
                         static_cast<Timestamp>(std::ceil(IncubationHours(cfg, rng) * kSecondsPerHour));
          immune_until[u] = inf.onset_ts + static_cast<Timestamp>(cfg.immune_days * kSecondsPerDay);
          if (rng.Bernoulli(cfg.p_search_given_ill)) {
            inf.searched = true;
            auto n = 1 + std::min<std::int64_t>(3, SamplePoisson(rng, 0.8));
            for (std::int64_t k = 0; k < n; ++k) {
              Timestamp ts = inf.onset_ts;
              if (k > 0) ts += 1800 + static_cast<Timestamp>(rng.Below(34 * 3600));
              queries.push_back({MakeQuery(user.raw_id, ts, QueryKind::kIllSearch, cfg, pools, rng), 1});
            }
          }
          inf.complained = rng.Bernoulli(cfg.p_complaint_given_ill);
          out.truth.infections.push_back(std::move(inf));
        }
      }

      auto n_bg = SamplePoisson(rng, cfg.background_queries_per_day);
      for (std::int64_t k = 0; k < n_bg; ++k) {
        Timestamp ts = day_ts + 7 * kSecondsPerHour + static_cast<Timestamp>(rng.Below(17 * 3600));
        double roll = rng.Uniform();
        QueryKind kind = roll < cfg.p_symptom_query ? QueryKind::kSymptom
                         : roll < cfg.p_symptom_query + cfg.p_topic_query ? QueryKind::kTopic
                                                                          : QueryKind::kGeneric;
        queries.push_back({MakeQuery(user.raw_id, ts, kind, cfg, pools, rng),
                           kind == QueryKind::kTopic ? 1 : 0});
      }
    }
  }

  // Queries past the simulated horizon are dropped.
  std::erase_if(queries, [&](const PendingQuery& q) { return q.event.ts >= end_ts; });
  std::stable_sort(queries.begin(), queries.end(),
                   [](const auto& a, const auto& b) { return a.event.ts < b.event.ts; });
  out.dataset.queries.reserve(queries.size());
  out.truth.query_truth.reserve(queries.size());
  for (auto& q : queries) {
    out.dataset.queries.push_back(std::move(q.event));
    out.truth.query_truth.push_back(q.truth);
  }

  for (const auto& r : world.restaurants) out.dataset.restaurants.push_back(r.record);

  // Complaints blame the last restaurant visited before onset with
  // probability p_blame_last, otherwise the true source.
  std::map<UserId, std::size_t> user_index;
  for (std::size_t u = 0; u < world.users.size(); ++u) user_index.emplace(world.users[u].raw_id, u);
  std::vector<std::pair<std::int64_t, std::string>> complaint_days;
  for (std::size_t i = 0; i < out.truth.infections.size(); ++i) {
    auto& inf = out.truth.infections[i];
    if (!inf.complained) continue;
    Rng rng(DeriveSeed(DeriveSeed(seed, "complaint"), i));
    const auto& vis = user_visits[user_index.at(inf.user_id)];
    std::string last = inf.restaurant_id;
    for (auto vi : vis) {
      const auto& v = out.dataset.visits[vi];
      if (v.exit_ts < inf.onset_ts) last = v.restaurant_id;
    }
    inf.blamed_restaurant = rng.Bernoulli(cfg.p_blame_last) ? last : inf.restaurant_id;
    Timestamp complaint_ts = inf.onset_ts + 6 * kSecondsPerHour +
                             static_cast<Timestamp>(rng.Below(42 * 3600));
    complaint_days.emplace_back(DayOf(complaint_ts) + 1 + static_cast<std::int64_t>(rng.Below(3)),
                                inf.blamed_restaurant);
  }
  for (int d = 0; d < days; ++d) {
    for (const auto& r : world.restaurants) {
      Rng rng(DeriveSeed(seed, Fnv1a64(r.record.restaurant_id) ^ 0x5bd1e995ULL,
                         static_cast<std::uint64_t>(d)));
      if (rng.Bernoulli(cfg.complaint_spurious_rate)) {
        complaint_days.emplace_back(start_day + d + 1 + static_cast<std::int64_t>(rng.Below(3)),
                                    r.record.restaurant_id);
      }
    }
  }
  std::stable_sort(complaint_days.begin(), complaint_days.end());

  const std::uint64_t inspect_seed = DeriveSeed(seed, "inspections");
  std::map<std::string, std::int64_t> last_complaint_inspection;
  for (const auto& [day, rid] : complaint_days) {
    if (day >= start_day + days) continue;
    auto it = last_complaint_inspection.find(rid);
    if (it != last_complaint_inspection.end() && day - it->second < 14) continue;
    last_complaint_inspection[rid] = day;
    out.dataset.inspections.push_back(
        SimulateInspection(world, rid, day, inspect_seed, Trigger::kComplaint));
  }
  for (int d = 0; d < days; ++d) {
    for (const auto& r : world.restaurants) {
      Rng rng(DeriveSeed(seed, Fnv1a64(r.record.restaurant_id), static_cast<std::uint64_t>(d)));
      if (rng.Bernoulli(cfg.routine_inspection_rate)) {
        out.dataset.inspections.push_back(SimulateInspection(
            world, r.record.restaurant_id, start_day + d, inspect_seed, Trigger::kRoutine));
      }
    }
  }
  SortStreams(out.dataset);
  return out;
}

InspectionRecord SimulateInspection(const World& world, const std::string& restaurant_id,
                                    std::int64_t date, std::uint64_t seed, Trigger trigger) {
  const auto& r = world.At(restaurant_id);
  const auto& cfg = world.cfg;
  Rng rng(DeriveSeed(seed, Fnv1a64(restaurant_id) + static_cast<std::uint64_t>(trigger),
                     static_cast<std::uint64_t>(date)));
  const bool unsafe = r.state == SafetyState::kUnsafe;
  InspectionRecord rec;
  rec.restaurant_id = restaurant_id;
  rec.date = date;
  rec.trigger = trigger;
  rec.outcome = rng.Bernoulli(unsafe ? cfg.inspector_sensitivity : cfg.inspector_false_positive)
                    ? Outcome::kUnsafe
                    : Outcome::kSafe;
  rec.critical_count = SamplePoisson(rng, unsafe ? cfg.critical_mean_unsafe : cfg.critical_mean_safe);
  rec.major_count = SamplePoisson(rng, unsafe ? cfg.major_mean_unsafe : cfg.major_mean_safe);
  return rec;
}

wsm::JudgmentMatrix SimulateRaters(std::span<const int> truth_labels, double flip_md,
                                   double flip_non_md, std::uint64_t seed) {
  wsm::JudgmentMatrix j;
  j.rows.reserve(truth_labels.size());
  for (std::size_t i = 0; i < truth_labels.size(); ++i) {
    Rng rng(DeriveSeed(seed, i));
    int t = truth_labels[i];
    wsm::JudgmentRow row;
    for (auto& v : row.md) v = rng.Bernoulli(flip_md) ? 1 - t : t;
    for (auto& v : row.non_md) v = rng.Bernoulli(flip_non_md) ? 1 - t : t;
    j.rows.push_back(row);
  }
  return j;
}

}  // namespace foodsurv::citysim
