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

// Run configuration and the end-to-end pipeline:
//
//   simulate -> weak label -> train -> score -> link -> aggregate
//            -> release -> rank (per day) -> inspect -> evaluate -> report
//
// Each stage exists twice: an in-memory function (used by tests and the
// acceptance suite) and a file-backed Stage* wrapper that reads and writes the
// artifact directory. Artifact layout under paths.out:
//
//   config.txt                  effective configuration
//   data/                       pseudonymized dataset (logdata formats)
//   truth/                      simulator ground truth (pseudonymized)
//   model/wsm_model.json
//   wsm/metrics.csv
//   lists/daily_lists.csv       per-day ranked lists (released counts)
//   lists/released.csv          per-day released aggregates incl. suppressed
//   lists/finder_selections.csv restaurants FINDER inspects, per day
//   inspections/inspections_all.csv
//   reports/table1.csv table2.csv table3.csv fig1.csv summary.txt
//   manifest.json               config hash, seed, per-file sha256

#ifndef FOODSURV_PIPELINE_H_
#define FOODSURV_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "foodsurv/citysim.h"
#include "foodsurv/locmodel.h"
#include "foodsurv/logdata.h"
#include "foodsurv/privacy.h"
#include "foodsurv/stats.h"
#include "foodsurv/wsm.h"

namespace foodsurv::pipeline {

struct RunConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "run";
  std::string input_dir;  // existing dataset instead of simulating

  citysim::SimConfig sim;

  wsm::WeakLabelParams weak;
  wsm::Hyper hyper;
  double eval_threshold = 0.5;
  std::size_t eval_size = 1000;
  double train_fraction = 0.5;  // share of users whose queries train the WSM

  Timestamp window_s = locmodel::kIncubationWindowS;
  double p_star = 0.7;
  double min_visitors = 20.0;
  double cutoff = 0.0;
  int lookback_days = 28;
  int warmup_days = 7;

  bool privacy_enabled = true;
  double epsilon = 1.0;
  double suppress_below = 30.0;
  std::string hash_key_hex;  // empty: derived from the seed (test mode)

  int daily_capacity = 2;

  privacy::PrivacyPolicy Policy() const;
};

struct ConfigKey {
  std::string key;
  std::string doc;
  std::function<void(RunConfig&, std::string_view)> set;  // UsageError on bad values
  std::function<std::string(const RunConfig&)> get;
};

// Every recognised key, in documentation order.
const std::vector<ConfigKey>& ConfigKeys();

// Throws UsageError for unknown keys or malformed values.
void SetConfigValue(RunConfig& cfg, std::string_view key, std::string_view value);

// "key = value" lines; '#' starts a comment. Later lines win.
RunConfig ParseConfigText(std::string_view text, RunConfig base = {});
RunConfig LoadConfigFile(const std::filesystem::path& path, RunConfig base = {});

// Canonical serialization (all keys, documentation order). An explicit hash
// key is never written out.
std::string SerializeConfig(const RunConfig& cfg);

// "key = default  # doc" for every key.
std::string ConfigReference();

// Checks cross-field constraints; throws UsageError.
void ValidateRunConfig(const RunConfig& cfg);

// ---------------------------------------------------------------------------
// In-memory stages.

struct SimArtifacts {
  citysim::World world;
  Dataset data;  // pseudonymized
  citysim::GroundTruth truth;  // infections pseudonymized
};

SimArtifacts SimulateWorld(const RunConfig& cfg);

// Deterministic user partition on the pseudonymous id.
bool IsTrainUser(const UserId& id, double train_fraction);

struct TrainResult {
  wsm::LabeledSet train_set;
  wsm::WsmModel model;
};

TrainResult TrainOnDataset(const RunConfig& cfg, const Dataset& data);

struct EvalResult {
  wsm::WsmMetrics metrics;
  double alpha = 0.0;
  std::size_t n = 0;
  std::size_t positives = 0;
};

// Eval sample from held-out users, labeled by simulated raters.
EvalResult EvaluateModel(const RunConfig& cfg, const Dataset& data,
                         std::span<const int> query_truth, const wsm::WsmModel& model,
                         const std::unordered_set<std::string>& train_texts);

struct DailyRow {
  std::int64_t date = 0;
  locmodel::RankCandidate candidate;  // rows are in rank order within a date
};

struct Selection {
  std::int64_t date = 0;
  std::string restaurant_id;
  friend bool operator==(const Selection&, const Selection&) = default;
};

struct ReleasedRow {
  std::int64_t date = 0;
  privacy::ReleasedAggregate aggregate;
};

struct RankResult {
  std::vector<DailyRow> daily;
  std::vector<ReleasedRow> released;
  std::vector<Selection> selections;
  locmodel::AttributionHistogram histogram{};
  std::size_t affected_users = 0;
};

std::vector<locmodel::ScoredQuery> ScoreQueries(const wsm::WsmModel& model,
                                                std::span<const QueryEvent> queries);

// Trailing-window ranking every morning after the warm-up; FINDER selects up
// to daily_capacity restaurants with positive signal not inspected by FINDER
// before.
RankResult RankDaily(const RunConfig& cfg, const Dataset& data,
                     std::span<const locmodel::ScoredQuery> scored);

// Simulator inspections plus a FINDER inspection for every selection.
std::vector<InspectionRecord> InspectSelected(const RunConfig& cfg,
                                              const citysim::World& world,
                                              std::span<const InspectionRecord> existing,
                                              std::span<const Selection> selections);

struct Reports {
  stats::RiskTable risk;
  stats::PrecisionTable precision;
  stats::ViolationTable violations;
};

Reports BuildReports(std::span<const InspectionRecord> inspections,
                     std::span<const RestaurantRecord> registry);

// ---------------------------------------------------------------------------
// File-backed stages. All take the artifact directory from cfg.out_dir and
// finish by rewriting the manifest. Errors are rethrown with the stage name.

void StageSimulate(const RunConfig& cfg);
void StageTrainWsm(const RunConfig& cfg);
void StageEvalWsm(const RunConfig& cfg);
void StageRank(const RunConfig& cfg);
void StageInspect(const RunConfig& cfg);
void StageEvaluate(const RunConfig& cfg);
// Renders the summary, writes reports/summary.txt and returns it.
std::string StageReport(const RunConfig& cfg);
void RunPipeline(const RunConfig& cfg);

// Manifest over every file under `dir` except manifest.json itself.
void WriteManifest(const std::filesystem::path& dir, const RunConfig& cfg);
std::string Sha256HexOfFile(const std::filesystem::path& path);

// Artifact file I/O shared with tests.
// date,restaurant_id,city,risk_level,visitors,affected,proportion,signal
void WriteDailyLists(std::span<const DailyRow> rows, std::span<const RestaurantRecord> registry,
                     const std::filesystem::path& path);
std::vector<DailyRow> ReadDailyLists(const std::filesystem::path& path);
// The daily-list columns plus `suppressed`; suppressed rows carry no counts.
void WriteReleased(std::span<const ReleasedRow> rows, std::span<const RestaurantRecord> registry,
                   const std::filesystem::path& path);
void WriteSelections(std::span<const Selection> rows, const std::filesystem::path& path);
std::vector<Selection> ReadSelections(const std::filesystem::path& path);
void WriteTruth(const citysim::World& world, const citysim::GroundTruth& truth,
                const std::filesystem::path& dir);
std::vector<citysim::SafetyState> ReadRestaurantStates(
    const std::filesystem::path& path, std::span<const RestaurantRecord> registry);
std::vector<int> ReadQueryTruth(const std::filesystem::path& path);

}  // namespace foodsurv::pipeline

#endif  // FOODSURV_PIPELINE_H_
