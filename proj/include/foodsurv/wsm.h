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

// Web search model: weak labeling from dwell on topical pages, namespaced
// feature hashing, a binary maximum-entropy (logistic) classifier, and the
// rater-based validation protocol (vote aggregation, Krippendorff's alpha,
// stratified evaluation sampling, AUC/F1).

#ifndef FOODSURV_WSM_H_
#define FOODSURV_WSM_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "foodsurv/logdata.h"

namespace foodsurv::wsm {

inline constexpr std::uint32_t kDim = 50000;
inline constexpr std::string_view kFoodborneTag = "foodborne_illness";

// Binary presence vector: strictly increasing indices, all < kDim.
struct SparseVector {
  std::vector<std::uint32_t> indices;

  friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

// Lowercased maximal runs of [a-z0-9]. Non-ASCII bytes act as separators.
std::vector<std::string> Tokenize(std::string_view text);

// Namespaced feature strings before hashing, deduplicated and sorted:
//   q:/qb: query uni/bigrams, u: URL unigrams (scheme stripped),
//   t:/tb: title, s:/sb: snippet, k: concept tags.
std::vector<std::string> FeatureStrings(const QueryEvent& e);

inline std::uint32_t HashFeature(std::string_view feature) {
  return static_cast<std::uint32_t>(Fnv1a64(feature) % kDim);
}

SparseVector Featurize(const QueryEvent& e);

// ---------------------------------------------------------------------------
// Weak supervision.

// A clicked result tagged foodborne_illness with dwell >= threshold.
bool IsWeakPositive(const QueryEvent& e, double dwell_threshold_s);

// Any clicked result tagged foodborne_illness (high-recall filter).
bool InHighRecallStratum(const QueryEvent& e);

enum class Provenance { kWeakAuto, kRater };

struct LabeledExample {
  QueryEvent event;
  int label = 0;
};

struct LabeledSet {
  std::vector<LabeledExample> examples;
  Provenance provenance = Provenance::kWeakAuto;

  std::unordered_set<std::string> Texts() const;
};

struct WeakLabelParams {
  double dwell_threshold_s = 30.0;
  int neg_ratio = 10;
};

// Positives: every event satisfying IsWeakPositive. Negatives: a seeded
// uniform sample, without replacement, of neg_ratio * |positives| events
// from the rest (fewer if the stream runs out). Output deduplicated by query
// text, first occurrence wins. Throws DataError("no weak positives").
LabeledSet WeakLabel(std::span<const QueryEvent> queries,
                     const WeakLabelParams& params, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Model.

struct Hyper {
  double lambda = 1e-4;
  std::size_t batch = 256;
  int epochs = 5;
  double step0 = 0.1;  // step at mini-batch t (1-based) is step0 / sqrt(t)
};

struct WsmModel {
  std::vector<double> weights = std::vector<double>(kDim, 0.0);
  double intercept = 0.0;
  Hyper hyper;
  std::uint64_t train_seed = 0;
  // Full-data objective before training (entry 0) and after each epoch.
  std::vector<double> epoch_loss;

  double final_loss() const { return epoch_loss.empty() ? 0.0 : epoch_loss.back(); }
};

double Sigmoid(double z);

double ScoreFeatures(const WsmModel& m, const SparseVector& x);
double ScoreQuery(const WsmModel& m, const QueryEvent& e);

// Mean logistic loss plus lambda * ||w||^2 / 2 (intercept unpenalized).
double Objective(const WsmModel& m, std::span<const SparseVector> xs,
                 std::span<const int> ys, double lambda);

// Gradient of Objective. `grad_w` is resized to kDim.
void ObjectiveGradient(const WsmModel& m, std::span<const SparseVector> xs,
                       std::span<const int> ys, double lambda,
                       std::vector<double>& grad_w, double& grad_b);

// Mini-batch gradient descent on Objective; examples are reshuffled each
// epoch with a seeded generator. Throws DataError on single-class input,
// NumericalError("diverged") on a non-finite loss.
WsmModel TrainWsm(const LabeledSet& labeled, const Hyper& hyper,
                  std::uint64_t seed);
WsmModel TrainWsm(std::span<const SparseVector> xs, std::span<const int> ys,
                  const Hyper& hyper, std::uint64_t seed);

// JSON: {"dim":50000,"weights":[...],"intercept":..,"hyper":{..},
// "train_seed":..,"epoch_loss":[..]}. Loading dim != 50000 is a DataError.
void SaveModel(const WsmModel& m, const std::filesystem::path& path);
WsmModel LoadModel(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Rater protocol.

inline constexpr int kMissingVote = -1;

// Three MD votes and three non-MD votes, each 0, 1 or kMissingVote.
struct JudgmentRow {
  std::array<int, 3> md{};
  std::array<int, 3> non_md{};
};

struct JudgmentMatrix {
  std::vector<JudgmentRow> rows;
};

// Majority of six; a 3-3 tie goes to the majority of the three MD votes.
// Throws DataError unless all six votes are 0/1.
int AggregateRaterVotes(const JudgmentRow& row);

// Krippendorff's alpha for nominal data. `units[u]` holds the value each
// rater assigned to unit u (kMissingVote when absent); values are small
// non-negative category codes. Units with fewer than two votes are ignored.
// Returns 1.0 when expected disagreement is zero. Throws DataError when
// fewer than two units or two raters are supplied.
double KrippendorffAlpha(const std::vector<std::vector<int>>& units);
double KrippendorffAlpha(const JudgmentMatrix& j);

// ---------------------------------------------------------------------------
// Evaluation.

// Half from the high-recall stratum, half from the full stream, each drawn
// traffic-weighted (events uniformly, so a text is picked in proportion to
// its frequency). Deduplicated by text and disjoint from `exclude_texts`.
// Throws DataError naming the available count when a stratum runs dry.
std::vector<QueryEvent> BuildEvalSample(
    std::span<const QueryEvent> stream, std::size_t n, std::uint64_t seed,
    const std::unordered_set<std::string>& exclude_texts = {});

struct WsmMetrics {
  double roc_auc = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double threshold = 0.5;
};

// Mann-Whitney formulation with tied scores counted 1/2. Throws DataError if
// either class is absent.
double RocAuc(std::span<const double> scores, std::span<const int> labels);

WsmMetrics EvaluateScores(std::span<const double> scores,
                          std::span<const int> labels, double threshold = 0.5);
WsmMetrics EvaluateWsm(const WsmModel& m, const LabeledSet& eval_set,
                       double threshold = 0.5);

using MetricRows = std::vector<std::pair<std::string, double>>;

// roc_auc, f1, precision, recall, threshold in that order.
MetricRows ToRows(const WsmMetrics& metrics);

// CSV with header "metric,value"; values printed with round-trip precision.
void WriteMetricsCsv(const MetricRows& rows, const std::filesystem::path& path);
MetricRows ReadMetricsCsv(const std::filesystem::path& path);

}  // namespace foodsurv::wsm

#endif  // FOODSURV_WSM_H_
