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

#include "foodsurv/pipeline.h"

#include <sodium.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace foodsurv::pipeline {
namespace fs = std::filesystem;

namespace {

std::string Num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> Split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  if (Trim(s).empty()) return out;
  for (std::size_t pos = 0;;) {
    auto next = s.find(sep, pos);
    out.push_back(Trim(s.substr(pos, next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

[[noreturn]] void BadValue(std::string_view key, std::string_view value, std::string_view want) {
  throw UsageError("config key '" + std::string(key) + "': expected " + std::string(want) +
                   ", got '" + std::string(value) + "'");
}

template <class T>
T ParseNumber(std::string_view key, std::string_view value, std::string_view want) {
  value = Trim(value);
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) {
    BadValue(key, value, want);
  }
  return out;
}

bool ParseBool(std::string_view key, std::string_view value) {
  value = Trim(value);
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  BadValue(key, value, "true or false");
}

// Member accessors as plain function pointers so the key table stays flat.
#define FIELD(expr) +[](RunConfig & c) -> decltype(auto) { return (expr); }

template <class T>
using Ref = T& (*)(RunConfig&);

ConfigKey Real(std::string key, std::string doc, Ref<double> ref) {
  return {key, std::move(doc),
          [ref, key](RunConfig& c, std::string_view v) {
            double x = ParseNumber<double>(key, v, "a number");
            if (!std::isfinite(x)) BadValue(key, v, "a finite number");
            ref(c) = x;
          },
          [ref](const RunConfig& c) { return Num(ref(const_cast<RunConfig&>(c))); }};
}

template <class T>
ConfigKey Integer(std::string key, std::string doc, Ref<T> ref) {
  return {key, std::move(doc),
          [ref, key](RunConfig& c, std::string_view v) {
            ref(c) = ParseNumber<T>(key, v, "an integer");
          },
          [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
}

ConfigKey Boolean(std::string key, std::string doc, Ref<bool> ref) {
  return {key, std::move(doc),
          [ref, key](RunConfig& c, std::string_view v) { ref(c) = ParseBool(key, v); },
          [ref](const RunConfig& c) {
            return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false");
          }};
}

ConfigKey Text(std::string key, std::string doc, Ref<std::string> ref) {
  return {key, std::move(doc),
          [ref](RunConfig& c, std::string_view v) { ref(c) = std::string(Trim(v)); },
          [ref](const RunConfig& c) { return ref(const_cast<RunConfig&>(c)); }};
}

ConfigKey Triple(std::string key, std::string doc,
                 Ref<std::array<double, kNumRiskLevels>> ref) {
  return {key, std::move(doc),
          [ref, key](RunConfig& c, std::string_view v) {
            auto parts = Split(v, ',');
            if (parts.size() != kNumRiskLevels) BadValue(key, v, "three comma-separated numbers");
            for (std::size_t i = 0; i < parts.size(); ++i) {
              ref(c)[i] = ParseNumber<double>(key, parts[i], "a number");
            }
          },
          [ref](const RunConfig& c) {
            const auto& a = ref(const_cast<RunConfig&>(c));
            return Num(a[0]) + "," + Num(a[1]) + "," + Num(a[2]);
          }};
}

ConfigKey Phrases(std::string key, std::string doc, Ref<std::vector<std::string>> ref) {
  return {key, std::move(doc),
          [ref](RunConfig& c, std::string_view v) {
            ref(c).clear();
            for (auto p : Split(v, '|')) {
              if (!p.empty()) ref(c).emplace_back(p);
            }
          },
          [ref](const RunConfig& c) {
            std::string out;
            for (const auto& p : ref(const_cast<RunConfig&>(c))) {
              if (!out.empty()) out += '|';
              out += p;
            }
            return out;
          }};
}

ConfigKey Cities() {
  return {"sim.cities", "comma-separated name:restaurant_count pairs",
          [](RunConfig& c, std::string_view v) {
            c.sim.cities.clear();
            for (auto part : Split(v, ',')) {
              auto colon = part.find(':');
              if (colon == std::string_view::npos) BadValue("sim.cities", v, "name:count pairs");
              c.sim.cities.push_back(
                  {std::string(Trim(part.substr(0, colon))),
                   ParseNumber<int>("sim.cities", part.substr(colon + 1), "an integer count")});
            }
          },
          [](const RunConfig& c) {
            std::string out;
            for (const auto& city : c.sim.cities) {
              if (!out.empty()) out += ',';
              out += city.name + ":" + std::to_string(city.restaurants);
            }
            return out;
          }};
}

std::vector<ConfigKey> MakeKeys() {
  std::vector<ConfigKey> k;
  k.push_back(Integer<std::uint64_t>("seed", "global seed; every module derives its own", FIELD(c.seed)));
  k.push_back(Text("paths.out", "artifact directory", FIELD(c.out_dir)));
  k.push_back(Text("paths.input", "dataset directory to use instead of simulating (empty: simulate)",
                   FIELD(c.input_dir)));

  k.push_back(Cities());
  k.push_back(Triple("sim.risk_mix", "share of high,medium,low risk restaurants", FIELD(c.sim.risk_mix)));
  k.push_back(Triple("sim.unsafe_prob", "P(unsafe) for high,medium,low risk", FIELD(c.sim.unsafe_prob)));
  k.push_back(Integer<int>("sim.users", "number of diners", FIELD(c.sim.users)));
  k.push_back(Integer<int>("sim.days", "simulated days (>= 1)", FIELD(c.sim.days)));
  k.push_back(Text("sim.start_date", "first simulated day, YYYY-MM-DD", FIELD(c.sim.start_date)));
  k.push_back(Real("sim.meals_per_day", "mean restaurant meals per diner per day (at most 3)",
                   FIELD(c.sim.meals_per_day)));
  k.push_back(Integer<int>("sim.favorites", "favourite restaurants per diner", FIELD(c.sim.favorites)));
  k.push_back(Real("sim.p_favorite", "P(meal at a favourite)", FIELD(c.sim.p_favorite)));
  k.push_back(Real("sim.p_infect_unsafe", "P(infection) per meal at an unsafe restaurant",
                   FIELD(c.sim.p_infect_unsafe)));
  k.push_back(Real("sim.p_infect_safe", "P(infection) per meal at a safe restaurant",
                   FIELD(c.sim.p_infect_safe)));
  k.push_back(Real("sim.incubation_median_h", "lognormal incubation median, hours",
                   FIELD(c.sim.incubation_median_h)));
  k.push_back(Real("sim.incubation_sigma", "lognormal incubation sigma", FIELD(c.sim.incubation_sigma)));
  k.push_back(Real("sim.immune_days", "no reinfection within this many days", FIELD(c.sim.immune_days)));
  k.push_back(Real("sim.p_search_given_ill", "P(ill diner searches)", FIELD(c.sim.p_search_given_ill)));
  k.push_back(Real("sim.p_complaint_given_ill", "P(ill diner complains)",
                   FIELD(c.sim.p_complaint_given_ill)));
  k.push_back(Real("sim.p_blame_last", "P(complaint blames the last restaurant visited)",
                   FIELD(c.sim.p_blame_last)));
  k.push_back(Real("sim.background_queries_per_day", "mean unrelated queries per diner per day",
                   FIELD(c.sim.background_queries_per_day)));
  k.push_back(Real("sim.p_symptom_query", "share of background queries that are symptom searches",
                   FIELD(c.sim.p_symptom_query)));
  k.push_back(Real("sim.p_topic_query", "share of background queries about foodborne illness",
                   FIELD(c.sim.p_topic_query)));
  k.push_back(Real("sim.p_ill_ambiguous", "P(ill searcher uses an ambiguous symptom phrase)",
                   FIELD(c.sim.p_ill_ambiguous)));
  k.push_back(Integer<int>("sim.results_per_query", "result pages per query (<= 10)",
                           FIELD(c.sim.results_per_query)));
  k.push_back(Real("sim.routine_inspection_rate", "routine inspections per restaurant per day",
                   FIELD(c.sim.routine_inspection_rate)));
  k.push_back(Real("sim.complaint_spurious_rate", "non-foodborne complaints per restaurant per day",
                   FIELD(c.sim.complaint_spurious_rate)));
  k.push_back(Real("sim.inspector_sensitivity", "P(Unsafe verdict | unsafe)",
                   FIELD(c.sim.inspector_sensitivity)));
  k.push_back(Real("sim.inspector_false_positive", "P(Unsafe verdict | safe)",
                   FIELD(c.sim.inspector_false_positive)));
  k.push_back(Real("sim.critical_mean_safe", "mean critical violations, safe", FIELD(c.sim.critical_mean_safe)));
  k.push_back(Real("sim.critical_mean_unsafe", "mean critical violations, unsafe",
                   FIELD(c.sim.critical_mean_unsafe)));
  k.push_back(Real("sim.major_mean_safe", "mean major violations, safe", FIELD(c.sim.major_mean_safe)));
  k.push_back(Real("sim.major_mean_unsafe", "mean major violations, unsafe", FIELD(c.sim.major_mean_unsafe)));
  k.push_back(Real("sim.rater_flip_md", "vote flip probability, physician raters", FIELD(c.sim.rater_flip_md)));
  k.push_back(Real("sim.rater_flip_non_md", "vote flip probability, other raters",
                   FIELD(c.sim.rater_flip_non_md)));
  k.push_back(Phrases("sim.positive_phrases", "'|'-separated illness phrases (empty: built-in)",
                      FIELD(c.sim.positive_phrases)));
  k.push_back(Phrases("sim.symptom_phrases", "'|'-separated ambiguous symptom phrases (empty: built-in)",
                      FIELD(c.sim.symptom_phrases)));
  k.push_back(Phrases("sim.topic_phrases", "'|'-separated foodborne topic phrases (empty: built-in)",
                      FIELD(c.sim.topic_phrases)));
  k.push_back(Phrases("sim.background_phrases", "'|'-separated unrelated phrases (empty: built-in)",
                      FIELD(c.sim.background_phrases)));

  k.push_back(Real("wsm.dwell_threshold_s", "weak-label dwell threshold, seconds",
                   FIELD(c.weak.dwell_threshold_s)));
  k.push_back(Integer<int>("wsm.neg_ratio", "weak negatives per positive", FIELD(c.weak.neg_ratio)));
  k.push_back(Real("wsm.lambda", "L2 penalty", FIELD(c.hyper.lambda)));
  k.push_back(Integer<std::size_t>("wsm.batch", "mini-batch size", FIELD(c.hyper.batch)));
  k.push_back(Integer<int>("wsm.epochs", "training epochs", FIELD(c.hyper.epochs)));
  k.push_back(Real("wsm.step0", "initial step; step t is step0/sqrt(t)", FIELD(c.hyper.step0)));
  k.push_back(Real("wsm.eval_threshold", "decision threshold for F1/precision/recall",
                   FIELD(c.eval_threshold)));
  k.push_back(Integer<std::size_t>("wsm.eval_size", "rater-labeled evaluation sample size",
                                   FIELD(c.eval_size)));
  k.push_back(Real("wsm.train_fraction", "share of users whose queries are used for training",
                   FIELD(c.train_fraction)));

  k.push_back(Integer<Timestamp>("locmodel.window_s", "max seconds from visit exit to first positive query",
                                 FIELD(c.window_s)));
  k.push_back(Real("locmodel.p_star", "WSM score at or above which a query is positive", FIELD(c.p_star)));
  k.push_back(Real("locmodel.min_visitors", "minimum (released) visitors to be ranked",
                   FIELD(c.min_visitors)));
  k.push_back(Real("locmodel.cutoff", "minimum signal to be ranked", FIELD(c.cutoff)));
  k.push_back(Integer<int>("locmodel.lookback_days", "trailing days aggregated for each daily list",
                           FIELD(c.lookback_days)));
  k.push_back(Integer<int>("locmodel.warmup_days", "days before the first list is produced",
                           FIELD(c.warmup_days)));

  k.push_back(Boolean("privacy.enabled", "add Laplace noise and suppress small counts",
                      FIELD(c.privacy_enabled)));
  k.push_back(Real("privacy.epsilon", "privacy budget per released count", FIELD(c.epsilon)));
  k.push_back(Real("privacy.suppress_below", "suppress restaurants with fewer noised visitors",
                   FIELD(c.suppress_below)));
  k.push_back(Text("privacy.hash_key", "32 hex digits; empty derives a key from the seed (testing only)",
                   FIELD(c.hash_key_hex)));

  k.push_back(Integer<int>("finder.daily_capacity", "FINDER inspections per day", FIELD(c.daily_capacity)));
  return k;
}

#undef FIELD

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing artifact: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const fs::path& path, std::string_view content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
}

void RequireFile(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw DataError("missing artifact: " + path.string());
}

template <class Fn>
auto InStage(std::string_view stage, Fn&& fn) -> decltype(fn()) {
  auto prefix = [&](const std::exception& e) { return std::string(stage) + ": " + e.what(); };
  try {
    return fn();
  } catch (const UsageError& e) {
    throw UsageError(prefix(e));
  } catch (const NumericalError& e) {
    throw NumericalError(prefix(e));
  } catch (const DataError& e) {
    throw DataError(prefix(e));
  } catch (const std::filesystem::filesystem_error& e) {
    throw DataError(prefix(e));
  }
}

fs::path Root(const RunConfig& cfg) { return fs::path(cfg.out_dir); }
DatasetPaths DataPaths(const RunConfig& cfg) { return DatasetPaths::InDirectory(Root(cfg) / "data"); }

std::vector<std::string> ReadCsvRows(const fs::path& path, std::string_view header) {
  std::istringstream in(ReadFile(path));
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw DataError(path.string() + ":1: expected header '" + std::string(header) + "'");
  }
  std::vector<std::string> rows;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(line);
  }
  return rows;
}

constexpr std::string_view kDailyHeader =
    "date,restaurant_id,city,risk_level,visitors,affected,proportion,signal";

std::map<std::string, const RestaurantRecord*> IndexRegistry(std::span<const RestaurantRecord> registry) {
  std::map<std::string, const RestaurantRecord*> out;
  for (const auto& r : registry) out.emplace(r.restaurant_id, &r);
  return out;
}

std::string CityRisk(const std::map<std::string, const RestaurantRecord*>& index,
                     const std::string& id) {
  auto it = index.find(id);
  if (it == index.end()) throw DataError("restaurant '" + id + "' not in registry");
  return it->second->city + "," + std::string(RiskLevelName(it->second->risk_level));
}

std::int64_t SurveillanceStart(const RunConfig& cfg) { return ParseDate(cfg.sim.start_date); }

}  // namespace

// ---------------------------------------------------------------------------
// Config.

privacy::PrivacyPolicy RunConfig::Policy() const {
  privacy::PrivacyPolicy p;
  p.enabled = privacy_enabled;
  p.epsilon = epsilon;
  p.suppress_below = suppress_below;
  p.hash_key = hash_key_hex.empty() ? privacy::HashKey::FromSeed(DeriveSeed(seed, "privacy.key"))
                                    : privacy::HashKey::FromHex(hash_key_hex);
  return p;
}

const std::vector<ConfigKey>& ConfigKeys() {
  static const std::vector<ConfigKey> kKeys = MakeKeys();
  return kKeys;
}

void SetConfigValue(RunConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& k : ConfigKeys()) {
    if (k.key == key) {
      k.set(cfg, value);
      return;
    }
  }
  throw UsageError("unknown config key '" + std::string(key) + "'");
}

RunConfig ParseConfigText(std::string_view text, RunConfig base) {
  std::size_t line_no = 0;
  for (auto line : Split(text, '\n')) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = Trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      SetConfigValue(base, Trim(line.substr(0, eq)), Trim(line.substr(eq + 1)));
    } catch (const UsageError& e) {
      throw UsageError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig LoadConfigFile(const fs::path& path, RunConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ParseConfigText(ss.str(), std::move(base));
}

std::string SerializeConfig(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : ConfigKeys()) {
    if (k.key == "privacy.hash_key" && !cfg.hash_key_hex.empty()) {
      out += "# privacy.hash_key is set and deliberately not recorded\n";
      continue;
    }
    out += k.key + " = " + k.get(cfg) + "\n";
  }
  return out;
}

std::string ConfigReference() {
  RunConfig defaults;
  std::string out;
  for (const auto& k : ConfigKeys()) {
    out += k.key + " = " + k.get(defaults) + "  # " + k.doc + "\n";
  }
  return out;
}

void ValidateRunConfig(const RunConfig& cfg) {
  citysim::ValidateConfig(cfg.sim);
  if (cfg.out_dir.empty()) throw UsageError("paths.out must not be empty");
  if (cfg.weak.neg_ratio < 1) throw UsageError("wsm.neg_ratio must be >= 1");
  if (cfg.hyper.batch == 0) throw UsageError("wsm.batch must be >= 1");
  if (cfg.hyper.epochs < 1) throw UsageError("wsm.epochs must be >= 1");
  if (!(cfg.hyper.step0 > 0) || cfg.hyper.lambda < 0) {
    throw UsageError("wsm.step0 must be > 0 and wsm.lambda >= 0");
  }
  if (!(cfg.train_fraction > 0 && cfg.train_fraction < 1)) {
    throw UsageError("wsm.train_fraction must be in (0,1)");
  }
  if (cfg.eval_size < 2) throw UsageError("wsm.eval_size must be >= 2");
  if (cfg.window_s <= 0) throw UsageError("locmodel.window_s must be > 0");
  if (cfg.lookback_days < 1 || cfg.warmup_days < 0) {
    throw UsageError("locmodel.lookback_days must be >= 1 and warmup_days >= 0");
  }
  if (!(cfg.epsilon > 0)) throw UsageError("privacy.epsilon must be > 0");
  if (cfg.daily_capacity < 0) throw UsageError("finder.daily_capacity must be >= 0");
  cfg.Policy();  // validates the hash key
}

// ---------------------------------------------------------------------------
// In-memory stages.

SimArtifacts SimulateWorld(const RunConfig& cfg) {
  SimArtifacts a;
  a.world = citysim::GenerateWorld(cfg.sim, DeriveSeed(cfg.seed, "citysim.world"));
  auto sim = citysim::Simulate(a.world, cfg.sim.days, DeriveSeed(cfg.seed, "citysim"));
  const auto key = cfg.Policy().hash_key;
  a.data = privacy::AnonymizeIds(std::move(sim.dataset), key);
  a.truth = std::move(sim.truth);
  for (auto& inf : a.truth.infections) inf.user_id = privacy::Pseudonymize(inf.user_id, key);
  return a;
}

bool IsTrainUser(const UserId& id, double train_fraction) {
  std::string_view bytes(reinterpret_cast<const char*>(id.bytes.data()), id.bytes.size());
  return ToUnitOpen(SplitMix64(Fnv1a64(bytes))) < train_fraction;
}

TrainResult TrainOnDataset(const RunConfig& cfg, const Dataset& data) {
  std::vector<QueryEvent> stream;
  for (const auto& q : data.queries) {
    if (IsTrainUser(q.user_id, cfg.train_fraction)) stream.push_back(q);
  }
  TrainResult r;
  r.train_set = wsm::WeakLabel(stream, cfg.weak, DeriveSeed(cfg.seed, "wsm.weak_label"));
  r.model = wsm::TrainWsm(r.train_set, cfg.hyper, DeriveSeed(cfg.seed, "wsm.train"));
  return r;
}

EvalResult EvaluateModel(const RunConfig& cfg, const Dataset& data,
                         std::span<const int> query_truth, const wsm::WsmModel& model,
                         const std::unordered_set<std::string>& train_texts) {
  if (query_truth.size() != data.queries.size()) {
    throw DataError("query truth has " + std::to_string(query_truth.size()) + " labels for " +
                    std::to_string(data.queries.size()) + " queries");
  }
  auto event_key = [](const QueryEvent& q) {
    return q.user_id.ToHex() + "|" + std::to_string(q.ts) + "|" + q.text;
  };
  std::vector<QueryEvent> stream;
  std::unordered_map<std::string, int> truth_of;
  for (std::size_t i = 0; i < data.queries.size(); ++i) {
    const auto& q = data.queries[i];
    if (IsTrainUser(q.user_id, cfg.train_fraction)) continue;
    stream.push_back(q);
    truth_of.emplace(event_key(q), query_truth[i]);
  }
  auto sample =
      wsm::BuildEvalSample(stream, cfg.eval_size, DeriveSeed(cfg.seed, "wsm.eval_sample"), train_texts);
  std::vector<int> truth;
  for (const auto& q : sample) truth.push_back(truth_of.at(event_key(q)));

  auto judgments = citysim::SimulateRaters(truth, cfg.sim.rater_flip_md, cfg.sim.rater_flip_non_md,
                                           DeriveSeed(cfg.seed, "raters"));
  EvalResult r;
  std::vector<int> labels;
  std::vector<double> scores;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    labels.push_back(wsm::AggregateRaterVotes(judgments.rows[i]));
    scores.push_back(wsm::ScoreQuery(model, sample[i]));
  }
  r.metrics = wsm::EvaluateScores(scores, labels, cfg.eval_threshold);
  r.alpha = wsm::KrippendorffAlpha(judgments);
  r.n = sample.size();
  r.positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  return r;
}

std::vector<locmodel::ScoredQuery> ScoreQueries(const wsm::WsmModel& model,
                                                std::span<const QueryEvent> queries) {
  std::vector<locmodel::ScoredQuery> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back({q.user_id, q.ts, wsm::ScoreQuery(model, q)});
  return out;
}

RankResult RankDaily(const RunConfig& cfg, const Dataset& data,
                     std::span<const locmodel::ScoredQuery> scored) {
  const std::int64_t start_day = SurveillanceStart(cfg);
  const Timestamp start_ts = start_day * kSecondsPerDay;
  const Timestamp end_ts = (start_day + cfg.sim.days) * kSecondsPerDay;
  const locmodel::LinkParams link{cfg.window_s, cfg.p_star};
  const auto policy = cfg.Policy();

  auto queries_in = [&](Timestamp b, Timestamp e) {
    auto lo = std::lower_bound(scored.begin(), scored.end(), b,
                               [](const auto& q, Timestamp t) { return q.ts < t; });
    auto hi = std::lower_bound(lo, scored.end(), e,
                               [](const auto& q, Timestamp t) { return q.ts < t; });
    return std::span<const locmodel::ScoredQuery>(lo, hi);
  };
  auto visits_in = [&](Timestamp b, Timestamp e) {
    const auto& v = data.visits;
    auto lo = std::lower_bound(v.begin(), v.end(), b,
                               [](const VisitEvent& x, Timestamp t) { return x.exit_ts < t; });
    auto hi = std::lower_bound(lo, v.end(), e,
                               [](const VisitEvent& x, Timestamp t) { return x.exit_ts < t; });
    return std::span<const VisitEvent>(lo, hi);
  };
  if (!std::is_sorted(scored.begin(), scored.end(),
                      [](const auto& a, const auto& b) { return a.ts < b.ts; }) ||
      !std::is_sorted(data.visits.begin(), data.visits.end(),
                      [](const auto& a, const auto& b) { return a.exit_ts < b.exit_ts; })) {
    throw DataError("queries and visits must be sorted by time");
  }

  RankResult r;
  std::set<std::string> inspected;
  const std::uint64_t release_seed = DeriveSeed(cfg.seed, "privacy.release");
  for (int d = cfg.warmup_days; d < cfg.sim.days; ++d) {
    const std::int64_t date = start_day + d;
    const Timestamp morning = date * kSecondsPerDay;
    const Timestamp begin = std::max(start_ts, morning - cfg.lookback_days * kSecondsPerDay);
    auto links = privacy::CapContributions(locmodel::LinkExposures(
        visits_in(begin - cfg.window_s, morning), queries_in(begin, morning), link));
    auto aggs = locmodel::AggregateRestaurants(visits_in(begin, morning), links, {begin, morning});
    auto released = privacy::Release(aggs, policy, DeriveSeed(release_seed, static_cast<std::uint64_t>(date)));
    auto ranked = locmodel::RankRestaurants(privacy::ToCandidates(released), cfg.min_visitors, cfg.cutoff);
    int chosen = 0;
    for (auto& c : ranked) {
      // A zero signal is no evidence at all; such restaurants stay on the list
      // but are never sent an inspector.
      if (chosen < cfg.daily_capacity && c.signal > 0.0 && !inspected.contains(c.restaurant_id)) {
        inspected.insert(c.restaurant_id);
        r.selections.push_back({date, c.restaurant_id});
        ++chosen;
      }
      r.daily.push_back({date, std::move(c)});
    }
    for (auto& a : released) r.released.push_back({date, std::move(a)});
  }

  // Source attribution over the whole period on exact counts.
  auto links = privacy::CapContributions(locmodel::LinkExposures(
      visits_in(start_ts - cfg.window_s, end_ts), queries_in(start_ts, end_ts), link));
  auto aggs = locmodel::AggregateRestaurants(visits_in(start_ts - cfg.window_s, end_ts), links,
                                             {start_ts - cfg.window_s, end_ts});
  auto attribution = locmodel::AttributeSources(links, aggs);
  r.histogram = attribution.histogram;
  r.affected_users = attribution.sources.size();
  return r;
}

std::vector<InspectionRecord> InspectSelected(const RunConfig& cfg, const citysim::World& world,
                                              std::span<const InspectionRecord> existing,
                                              std::span<const Selection> selections) {
  std::vector<InspectionRecord> out(existing.begin(), existing.end());
  const std::uint64_t seed = DeriveSeed(cfg.seed, "finder.inspections");
  for (const auto& s : selections) {
    out.push_back(citysim::SimulateInspection(world, s.restaurant_id, s.date, seed, Trigger::kFinder));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.date < b.date; });
  return out;
}

Reports BuildReports(std::span<const InspectionRecord> inspections,
                     std::span<const RestaurantRecord> registry) {
  return {stats::BuildRiskTable(inspections, registry),
          stats::BuildPrecisionTable(inspections, registry),
          stats::BuildViolationTable(inspections, registry)};
}

// ---------------------------------------------------------------------------
// Artifact I/O.

void WriteDailyLists(std::span<const DailyRow> rows, std::span<const RestaurantRecord> registry,
                     const fs::path& path) {
  const auto index = IndexRegistry(registry);
  std::string out = std::string(kDailyHeader) + "\n";
  for (const auto& r : rows) {
    const auto& c = r.candidate;
    out += FormatDate(r.date) + "," + c.restaurant_id + "," + CityRisk(index, c.restaurant_id) + "," +
           Num(c.visitors) + "," + Num(c.affected) + "," + Num(c.proportion) + "," + Num(c.signal) +
           "\n";
  }
  WriteFile(path, out);
}

std::vector<DailyRow> ReadDailyLists(const fs::path& path) {
  std::vector<DailyRow> out;
  std::size_t line = 1;
  for (const auto& text : ReadCsvRows(path, kDailyHeader)) {
    ++line;
    const std::string where = path.string() + ":" + std::to_string(line);
    auto f = Split(text, ',');
    if (f.size() != 8) throw DataError(where + ": expected 8 fields");
    try {
      DailyRow r;
      r.date = ParseDate(f[0]);
      r.candidate.restaurant_id = std::string(f[1]);
      r.candidate.visitors = ParseNumber<double>(where, f[4], "visitors");
      r.candidate.affected = ParseNumber<double>(where, f[5], "affected");
      r.candidate.proportion = ParseNumber<double>(where, f[6], "proportion");
      r.candidate.signal = ParseNumber<double>(where, f[7], "signal");
      out.push_back(std::move(r));
    } catch (const UsageError& e) {
      throw DataError(e.what());
    }
  }
  return out;
}

void WriteReleased(std::span<const ReleasedRow> rows, std::span<const RestaurantRecord> registry,
                   const fs::path& path) {
  const auto index = IndexRegistry(registry);
  std::string out = std::string(kDailyHeader) + ",suppressed\n";
  for (const auto& r : rows) {
    const auto& a = r.aggregate;
    out += FormatDate(r.date) + "," + a.restaurant_id + "," + CityRisk(index, a.restaurant_id) + ",";
    out += a.suppressed ? std::string(",,,,true")
                        : Num(a.noised_visitors) + "," + Num(a.noised_affected) + "," +
                              Num(a.released_proportion) + "," + Num(a.signal) + ",false";
    out += "\n";
  }
  WriteFile(path, out);
}

void WriteSelections(std::span<const Selection> rows, const fs::path& path) {
  std::string out = "date,restaurant_id\n";
  for (const auto& r : rows) out += FormatDate(r.date) + "," + r.restaurant_id + "\n";
  WriteFile(path, out);
}

std::vector<Selection> ReadSelections(const fs::path& path) {
  std::vector<Selection> out;
  std::size_t line = 1;
  for (const auto& text : ReadCsvRows(path, "date,restaurant_id")) {
    ++line;
    auto f = Split(text, ',');
    if (f.size() != 2 || f[1].empty()) {
      throw DataError(path.string() + ":" + std::to_string(line) + ": expected date,restaurant_id");
    }
    out.push_back({ParseDate(f[0]), std::string(f[1])});
  }
  return out;
}

void WriteTruth(const citysim::World& world, const citysim::GroundTruth& truth, const fs::path& dir) {
  std::string states = "restaurant_id,state\n";
  for (const auto& r : world.restaurants) {
    states += r.record.restaurant_id + "," +
              (r.state == citysim::SafetyState::kUnsafe ? "unsafe" : "safe") + "\n";
  }
  WriteFile(dir / "restaurant_states.csv", states);

  std::string labels = "label\n";
  for (int t : truth.query_truth) labels += std::to_string(t) + "\n";
  WriteFile(dir / "query_labels.csv", labels);

  std::string inf =
      "user_id,restaurant_id,meal_exit_ts,onset_ts,searched,complained,blamed_restaurant\n";
  for (const auto& i : truth.infections) {
    inf += i.user_id.ToHex() + "," + i.restaurant_id + "," + std::to_string(i.meal_exit_ts) + "," +
           std::to_string(i.onset_ts) + "," + (i.searched ? "1" : "0") + "," +
           (i.complained ? "1" : "0") + "," + i.blamed_restaurant + "\n";
  }
  WriteFile(dir / "infections.csv", inf);
}

std::vector<citysim::SafetyState> ReadRestaurantStates(const fs::path& path,
                                                       std::span<const RestaurantRecord> registry) {
  std::map<std::string, citysim::SafetyState> by_id;
  std::size_t line = 1;
  for (const auto& text : ReadCsvRows(path, "restaurant_id,state")) {
    ++line;
    auto f = Split(text, ',');
    if (f.size() != 2 || (f[1] != "safe" && f[1] != "unsafe")) {
      throw DataError(path.string() + ":" + std::to_string(line) + ": expected restaurant_id,safe|unsafe");
    }
    by_id[std::string(f[0])] = f[1] == "unsafe" ? citysim::SafetyState::kUnsafe : citysim::SafetyState::kSafe;
  }
  std::vector<citysim::SafetyState> out;
  for (const auto& r : registry) {
    auto it = by_id.find(r.restaurant_id);
    if (it == by_id.end()) throw DataError(path.string() + ": no state for restaurant " + r.restaurant_id);
    out.push_back(it->second);
  }
  return out;
}

std::vector<int> ReadQueryTruth(const fs::path& path) {
  std::vector<int> out;
  std::size_t line = 1;
  for (const auto& text : ReadCsvRows(path, "label")) {
    ++line;
    if (text != "0" && text != "1") {
      throw DataError(path.string() + ":" + std::to_string(line) + ": label must be 0 or 1");
    }
    out.push_back(text == "1");
  }
  return out;
}

std::string Sha256HexOfFile(const fs::path& path) {
  if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
  const std::string bytes = ReadFile(path);
  unsigned char digest[crypto_hash_sha256_BYTES];
  crypto_hash_sha256(digest, reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned char b : digest) {
    hex += kHex[b >> 4];
    hex += kHex[b & 15];
  }
  return hex;
}

void WriteManifest(const fs::path& dir, const RunConfig& cfg) {
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto rel = fs::relative(e.path(), dir).generic_string();
    if (rel != "manifest.json") files.push_back(rel);
  }
  std::sort(files.begin(), files.end());

  const std::string config_text = SerializeConfig(cfg);
  std::string config_hash;
  {
    unsigned char digest[crypto_hash_sha256_BYTES];
    if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
    crypto_hash_sha256(digest, reinterpret_cast<const unsigned char*>(config_text.data()),
                       config_text.size());
    static constexpr char kHex[] = "0123456789abcdef";
    for (unsigned char b : digest) {
      config_hash += kHex[b >> 4];
      config_hash += kHex[b & 15];
    }
  }

  auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  auto day = std::chrono::floor<std::chrono::days>(now);
  auto secs = (now - day).count();
  char stamp[32];
  std::snprintf(stamp, sizeof(stamp), "T%02lld:%02lld:%02lldZ", static_cast<long long>(secs / 3600),
                static_cast<long long>(secs / 60 % 60), static_cast<long long>(secs % 60));

  nlohmann::ordered_json m;
  m["config_sha256"] = config_hash;
  m["seed"] = cfg.seed;
  m["created_at"] = FormatDate(day.time_since_epoch().count()) + stamp;
  auto& list = m["files"] = nlohmann::ordered_json::array();
  for (const auto& f : files) {
    list.push_back({{"path", f}, {"sha256", Sha256HexOfFile(dir / f)}});
  }
  WriteFile(dir / "manifest.json", m.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// File-backed stages.

namespace {

Dataset LoadRunData(const RunConfig& cfg) {
  auto d = LoadDataset(DataPaths(cfg));
  RequireValid(ValidateDataset(d));
  return d;
}

std::unordered_set<std::string> TrainTexts(const RunConfig& cfg, const Dataset& data) {
  std::vector<QueryEvent> stream;
  for (const auto& q : data.queries) {
    if (IsTrainUser(q.user_id, cfg.train_fraction)) stream.push_back(q);
  }
  return wsm::WeakLabel(stream, cfg.weak, DeriveSeed(cfg.seed, "wsm.weak_label")).Texts();
}

std::string HistogramText(const locmodel::AttributionHistogram& h) {
  static constexpr const char* kLabels[] = {"1", "2", "3", "4+"};
  std::string out = "Source restaurant by visit recency (share of affected users)\n";
  for (std::size_t i = 0; i < h.size(); ++i) {
    char line[128];
    std::snprintf(line, sizeof(line), "  %-3s %6.1f%%  %s\n", kLabels[i], 100.0 * h[i],
                  std::string(static_cast<std::size_t>(std::lround(h[i] * 50.0)), '#').c_str());
    out += line;
  }
  return out;
}

}  // namespace

void StageSimulate(const RunConfig& cfg) {
  InStage("simulate", [&] {
    ValidateRunConfig(cfg);
    auto a = SimulateWorld(cfg);
    RequireValid(ValidateDataset(a.data));
    WriteFile(Root(cfg) / "config.txt", SerializeConfig(cfg));
    SaveDataset(a.data, DataPaths(cfg));
    WriteTruth(a.world, a.truth, Root(cfg) / "truth");
    WriteManifest(Root(cfg), cfg);
  });
}

void StageTrainWsm(const RunConfig& cfg) {
  InStage("train-wsm", [&] {
    auto data = LoadRunData(cfg);
    auto r = TrainOnDataset(cfg, data);
    wsm::SaveModel(r.model, Root(cfg) / "model" / "wsm_model.json");
    WriteManifest(Root(cfg), cfg);
  });
}

void StageEvalWsm(const RunConfig& cfg) {
  InStage("eval-wsm", [&] {
    auto data = LoadRunData(cfg);
    auto model = wsm::LoadModel(Root(cfg) / "model" / "wsm_model.json");
    auto truth = ReadQueryTruth(Root(cfg) / "truth" / "query_labels.csv");
    auto r = EvaluateModel(cfg, data, truth, model, TrainTexts(cfg, data));
    auto rows = wsm::ToRows(r.metrics);
    rows.emplace_back("krippendorff_alpha", r.alpha);
    rows.emplace_back("eval_n", static_cast<double>(r.n));
    rows.emplace_back("eval_positives", static_cast<double>(r.positives));
    fs::create_directories(Root(cfg) / "wsm");
    wsm::WriteMetricsCsv(rows, Root(cfg) / "wsm" / "metrics.csv");
    WriteManifest(Root(cfg), cfg);
  });
}

void StageRank(const RunConfig& cfg) {
  InStage("rank", [&] {
    ValidateRunConfig(cfg);
    auto data = LoadRunData(cfg);
    auto model = wsm::LoadModel(Root(cfg) / "model" / "wsm_model.json");
    auto scored = ScoreQueries(model, data.queries);
    auto r = RankDaily(cfg, data, scored);
    WriteDailyLists(r.daily, data.restaurants, Root(cfg) / "lists" / "daily_lists.csv");
    WriteReleased(r.released, data.restaurants, Root(cfg) / "lists" / "released.csv");
    WriteSelections(r.selections, Root(cfg) / "lists" / "finder_selections.csv");
    locmodel::WriteHistogramCsv(r.histogram, Root(cfg) / "reports" / "fig1.csv");
    WriteManifest(Root(cfg), cfg);
  });
}

void StageInspect(const RunConfig& cfg) {
  InStage("inspect", [&] {
    auto data = LoadRunData(cfg);
    auto selections = ReadSelections(Root(cfg) / "lists" / "finder_selections.csv");
    auto states = ReadRestaurantStates(Root(cfg) / "truth" / "restaurant_states.csv", data.restaurants);
    auto world = citysim::WorldFromStates(cfg.sim, data.restaurants, states);
    auto all = InspectSelected(cfg, world, data.inspections, selections);
    std::ostringstream out;
    WriteInspectionLog(out, all);
    WriteFile(Root(cfg) / "inspections" / "inspections_all.csv", out.str());
    WriteManifest(Root(cfg), cfg);
  });
}

void StageEvaluate(const RunConfig& cfg) {
  InStage("evaluate", [&] {
    auto paths = DataPaths(cfg);
    auto inspections_path = Root(cfg) / "inspections" / "inspections_all.csv";
    RequireFile(inspections_path);
    std::vector<RestaurantRecord> registry;
    {
      std::ifstream in(paths.restaurants);
      if (!in) throw DataError("missing artifact: " + paths.restaurants.string());
      registry = ParseRegistry(in, paths.restaurants.string());
    }
    std::ifstream in(inspections_path);
    auto inspections = ParseInspectionLog(in, inspections_path.string());
    auto reports = BuildReports(inspections, registry);
    WriteFile(Root(cfg) / "reports" / "table1.csv", stats::RiskTableCsv(reports.risk));
    WriteFile(Root(cfg) / "reports" / "table2.csv", stats::PrecisionTableCsv(reports.precision));
    WriteFile(Root(cfg) / "reports" / "table3.csv", stats::ViolationTableCsv(reports.violations));
    WriteManifest(Root(cfg), cfg);
  });
}

std::string StageReport(const RunConfig& cfg) {
  return InStage("report", [&] {
    auto paths = DataPaths(cfg);
    auto inspections_path = Root(cfg) / "inspections" / "inspections_all.csv";
    auto metrics_path = Root(cfg) / "wsm" / "metrics.csv";
    auto fig_path = Root(cfg) / "reports" / "fig1.csv";
    for (const auto& p : {paths.restaurants, inspections_path, metrics_path, fig_path,
                          Root(cfg) / "reports" / "table1.csv", Root(cfg) / "reports" / "table2.csv",
                          Root(cfg) / "reports" / "table3.csv"}) {
      RequireFile(p);
    }
    std::ifstream reg_in(paths.restaurants);
    auto registry = ParseRegistry(reg_in, paths.restaurants.string());
    std::ifstream insp_in(inspections_path);
    auto inspections = ParseInspectionLog(insp_in, inspections_path.string());
    auto reports = BuildReports(inspections, registry);

    std::string out;
    out += stats::RenderRiskTable(reports.risk) + "\n";
    out += stats::RenderPrecisionTable(reports.precision) + "\n";
    out += stats::RenderViolationTable(reports.violations) + "\n";
    out += HistogramText(locmodel::ReadHistogramCsv(fig_path)) + "\n";
    out += "Search-query classifier\n";
    for (const auto& [name, value] : wsm::ReadMetricsCsv(metrics_path)) {
      char line[128];
      const bool count = name == "eval_n" || name == "eval_positives";
      std::snprintf(line, sizeof(line), count ? "  %-20s %.0f\n" : "  %-20s %.4f\n", name.c_str(),
                    value);
      out += line;
    }
    WriteFile(Root(cfg) / "reports" / "summary.txt", out);
    WriteManifest(Root(cfg), cfg);
    return out;
  });
}

void RunPipeline(const RunConfig& cfg) {
  InStage("run", [&] { ValidateRunConfig(cfg); });
  if (!cfg.input_dir.empty()) {
    // External data: no ground truth, so no classifier evaluation and no
    // simulated FINDER inspections.
    InStage("load", [&] {
      auto d = privacy::AnonymizeIds(LoadDataset(DatasetPaths::InDirectory(cfg.input_dir)),
                                     cfg.Policy().hash_key);
      RequireValid(ValidateDataset(d));
      WriteFile(Root(cfg) / "config.txt", SerializeConfig(cfg));
      SaveDataset(d, DataPaths(cfg));
      std::ostringstream out;
      WriteInspectionLog(out, d.inspections);
      WriteFile(Root(cfg) / "inspections" / "inspections_all.csv", out.str());
    });
    StageTrainWsm(cfg);
    StageRank(cfg);
    StageEvaluate(cfg);
    InStage("report", [&] {
      WriteFile(Root(cfg) / "wsm" / "metrics.csv", "metric,value\n");
    });
    StageReport(cfg);
    return;
  }
  StageSimulate(cfg);
  StageTrainWsm(cfg);
  StageEvalWsm(cfg);
  StageRank(cfg);
  StageInspect(cfg);
  StageEvaluate(cfg);
  StageReport(cfg);
}

}  // namespace foodsurv::pipeline
