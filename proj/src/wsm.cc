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

#include "foodsurv/wsm.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"

namespace foodsurv::wsm {
namespace {

void AddUnigrams(std::string_view ns, const std::vector<std::string>& toks,
                 std::vector<std::string>& out) {
  for (const auto& t : toks) out.push_back(std::string(ns) + t);
}

void AddBigrams(std::string_view ns, const std::vector<std::string>& toks,
                std::vector<std::string>& out) {
  for (std::size_t i = 1; i < toks.size(); ++i) {
    out.push_back(std::string(ns) + toks[i - 1] + "_" + toks[i]);
  }
}

std::string_view StripScheme(std::string_view url) {
  auto pos = url.find("://");
  return pos == std::string_view::npos ? url : url.substr(pos + 3);
}

bool HasClickedFoodborne(const QueryEvent& e, double min_dwell) {
  for (const auto& r : e.results) {
    if (r.clicked && r.dwell_s >= min_dwell &&
        r.concept_tags.contains(std::string(kFoodborneTag))) {
      return true;
    }
  }
  return false;
}

// Softplus log(1 + exp(z)) without overflow.
double Softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double Margin(const WsmModel& m, const SparseVector& x) {
  double z = m.intercept;
  for (auto i : x.indices) z += m.weights[i];
  return z;
}

void CheckClasses(std::span<const int> ys) {
  bool pos = false, neg = false;
  for (int y : ys) {
    if (y == 1) pos = true;
    else if (y == 0) neg = true;
    else throw DataError("labels must be 0 or 1");
  }
  if (!pos || !neg) throw DataError("training data must contain both classes");
}

template <typename Rng>
void Shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(v[i - 1], v[pick(rng)]);
  }
}

}  // namespace

std::vector<std::string> Tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      cur.push_back(static_cast<char>(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> FeatureStrings(const QueryEvent& e) {
  std::vector<std::string> out;
  auto q = Tokenize(e.text);
  AddUnigrams("q:", q, out);
  AddBigrams("qb:", q, out);
  for (const auto& r : e.results) {
    AddUnigrams("u:", Tokenize(StripScheme(r.url)), out);
    auto t = Tokenize(r.title);
    AddUnigrams("t:", t, out);
    AddBigrams("tb:", t, out);
    auto s = Tokenize(r.snippet);
    AddUnigrams("s:", s, out);
    AddBigrams("sb:", s, out);
    for (const auto& tag : r.concept_tags) out.push_back("k:" + tag);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

SparseVector Featurize(const QueryEvent& e) {
  SparseVector v;
  for (const auto& f : FeatureStrings(e)) v.indices.push_back(HashFeature(f));
  std::sort(v.indices.begin(), v.indices.end());
  v.indices.erase(std::unique(v.indices.begin(), v.indices.end()), v.indices.end());
  return v;
}

bool IsWeakPositive(const QueryEvent& e, double dwell_threshold_s) {
  return HasClickedFoodborne(e, dwell_threshold_s);
}

bool InHighRecallStratum(const QueryEvent& e) {
  for (const auto& r : e.results) {
    if (r.clicked && r.concept_tags.contains(std::string(kFoodborneTag))) return true;
  }
  return false;
}

std::unordered_set<std::string> LabeledSet::Texts() const {
  std::unordered_set<std::string> out;
  for (const auto& ex : examples) out.insert(ex.event.text);
  return out;
}

LabeledSet WeakLabel(std::span<const QueryEvent> queries,
                     const WeakLabelParams& params, std::uint64_t seed) {
  if (params.neg_ratio < 1) throw UsageError("neg_ratio must be >= 1");
  std::vector<std::size_t> pos, rest;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    (IsWeakPositive(queries[i], params.dwell_threshold_s) ? pos : rest).push_back(i);
  }
  if (pos.empty()) throw DataError("no weak positives");

  // Partial Fisher-Yates: the first k entries of `rest` become the sample.
  std::size_t k = std::min(rest.size(), pos.size() * static_cast<std::size_t>(params.neg_ratio));
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, rest.size() - 1);
    std::swap(rest[i], rest[pick(rng)]);
  }

  LabeledSet out;
  out.provenance = Provenance::kWeakAuto;
  std::unordered_set<std::string> seen;
  for (auto i : pos) {
    if (seen.insert(queries[i].text).second) out.examples.push_back({queries[i], 1});
  }
  for (std::size_t j = 0; j < k; ++j) {
    const auto& q = queries[rest[j]];
    if (seen.insert(q.text).second) out.examples.push_back({q, 0});
  }
  return out;
}

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

double ScoreFeatures(const WsmModel& m, const SparseVector& x) {
  return Sigmoid(Margin(m, x));
}

double ScoreQuery(const WsmModel& m, const QueryEvent& e) {
  return ScoreFeatures(m, Featurize(e));
}

double Objective(const WsmModel& m, std::span<const SparseVector> xs,
                 std::span<const int> ys, double lambda) {
  double loss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double z = Margin(m, xs[i]);
    loss += ys[i] == 1 ? Softplus(-z) : Softplus(z);
  }
  loss /= static_cast<double>(xs.size());
  double sq = 0.0;
  for (double w : m.weights) sq += w * w;
  return loss + 0.5 * lambda * sq;
}

void ObjectiveGradient(const WsmModel& m, std::span<const SparseVector> xs,
                       std::span<const int> ys, double lambda,
                       std::vector<double>& grad_w, double& grad_b) {
  grad_w.assign(kDim, 0.0);
  grad_b = 0.0;
  const double inv_n = 1.0 / static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double g = (Sigmoid(Margin(m, xs[i])) - ys[i]) * inv_n;
    grad_b += g;
    for (auto j : xs[i].indices) grad_w[j] += g;
  }
  for (std::size_t j = 0; j < kDim; ++j) grad_w[j] += lambda * m.weights[j];
}

WsmModel TrainWsm(std::span<const SparseVector> xs, std::span<const int> ys,
                  const Hyper& hyper, std::uint64_t seed) {
  if (xs.size() != ys.size()) throw UsageError("features/labels size mismatch");
  CheckClasses(ys);
  if (hyper.batch == 0) throw UsageError("batch must be positive");
  if (hyper.epochs < 0) throw UsageError("epochs must be non-negative");

  WsmModel m;
  m.hyper = hyper;
  m.train_seed = seed;
  m.epoch_loss.push_back(Objective(m, xs, ys, hyper.lambda));

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(kDim, 0.0);
  std::vector<std::uint32_t> touched;
  std::uint64_t t = 0;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    Shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
      std::size_t end = std::min(order.size(), start + hyper.batch);
      const double inv_b = 1.0 / static_cast<double>(end - start);
      double grad_b = 0.0;
      touched.clear();
      for (std::size_t k = start; k < end; ++k) {
        const auto& x = xs[order[k]];
        double g = (ScoreFeatures(m, x) - ys[order[k]]) * inv_b;
        grad_b += g;
        for (auto j : x.indices) {
          if (grad[j] == 0.0) touched.push_back(j);
          grad[j] += g;
        }
      }
      ++t;
      const double step = hyper.step0 / std::sqrt(static_cast<double>(t));
      // L2 shrink on every coordinate, then the sparse data term.
      if (hyper.lambda != 0.0) {
        const double shrink = 1.0 - step * hyper.lambda;
        for (auto& w : m.weights) w *= shrink;
      }
      for (auto j : touched) {
        m.weights[j] -= step * grad[j];
        grad[j] = 0.0;
      }
      m.intercept -= step * grad_b;
    }
    double loss = Objective(m, xs, ys, hyper.lambda);
    if (!std::isfinite(loss)) throw NumericalError("diverged");
    m.epoch_loss.push_back(loss);
  }
  return m;
}

WsmModel TrainWsm(const LabeledSet& labeled, const Hyper& hyper,
                  std::uint64_t seed) {
  std::vector<SparseVector> xs;
  std::vector<int> ys;
  xs.reserve(labeled.examples.size());
  for (const auto& ex : labeled.examples) {
    xs.push_back(Featurize(ex.event));
    ys.push_back(ex.label);
  }
  return TrainWsm(xs, ys, hyper, seed);
}

void SaveModel(const WsmModel& m, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["dim"] = kDim;
  j["intercept"] = m.intercept;
  j["hyper"] = {{"lambda", m.hyper.lambda},
                {"batch", m.hyper.batch},
                {"epochs", m.hyper.epochs},
                {"step0", m.hyper.step0}};
  j["train_seed"] = m.train_seed;
  j["epoch_loss"] = m.epoch_loss;
  j["weights"] = m.weights;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump() << '\n';
}

WsmModel LoadModel(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  WsmModel m;
  try {
    auto j = nlohmann::json::parse(in);
    auto dim = j.at("dim").get<std::int64_t>();
    if (dim != kDim) {
      throw DataError("model dim " + std::to_string(dim) + " != " + std::to_string(kDim));
    }
    m.weights = j.at("weights").get<std::vector<double>>();
    if (m.weights.size() != kDim) throw DataError("model weights length mismatch");
    m.intercept = j.at("intercept").get<double>();
    const auto& h = j.at("hyper");
    m.hyper.lambda = h.at("lambda").get<double>();
    m.hyper.batch = h.at("batch").get<std::size_t>();
    m.hyper.epochs = h.at("epochs").get<int>();
    m.hyper.step0 = h.at("step0").get<double>();
    m.train_seed = j.at("train_seed").get<std::uint64_t>();
    if (j.contains("epoch_loss")) m.epoch_loss = j["epoch_loss"].get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  for (double w : m.weights) {
    if (!std::isfinite(w)) throw DataError("model has non-finite weights");
  }
  return m;
}

int AggregateRaterVotes(const JudgmentRow& row) {
  int ones = 0, md_ones = 0;
  for (int v : row.md) {
    if (v != 0 && v != 1) throw DataError("judgment row needs 3 MD votes in {0,1}");
    ones += v;
    md_ones += v;
  }
  for (int v : row.non_md) {
    if (v != 0 && v != 1) throw DataError("judgment row needs 3 non-MD votes in {0,1}");
    ones += v;
  }
  if (ones != 3) return ones > 3 ? 1 : 0;
  return md_ones >= 2 ? 1 : 0;
}

double KrippendorffAlpha(const std::vector<std::vector<int>>& units) {
  if (units.size() < 2) throw DataError("alpha needs at least 2 units");
  std::size_t raters = 0;
  for (const auto& u : units) raters = std::max(raters, u.size());
  if (raters < 2) throw DataError("alpha needs at least 2 raters");

  // Coincidence matrix over the categories that occur in pairable units.
  std::map<int, std::map<int, double>> o;
  for (const auto& u : units) {
    std::vector<int> vals;
    for (int v : u) {
      if (v == kMissingVote) continue;
      if (v < 0) throw DataError("negative category code");
      vals.push_back(v);
    }
    if (vals.size() < 2) continue;
    const double w = 1.0 / static_cast<double>(vals.size() - 1);
    for (std::size_t a = 0; a < vals.size(); ++a) {
      for (std::size_t b = 0; b < vals.size(); ++b) {
        if (a != b) o[vals[a]][vals[b]] += w;
      }
    }
  }
  std::map<int, double> marg;
  double n = 0.0, off_diag = 0.0;
  for (const auto& [c, row] : o) {
    for (const auto& [k, x] : row) {
      marg[c] += x;
      n += x;
      if (c != k) off_diag += x;
    }
  }
  double expected = 0.0;
  for (const auto& [c, nc] : marg) {
    for (const auto& [k, nk] : marg) {
      if (c != k) expected += nc * nk;
    }
  }
  if (expected == 0.0) return 1.0;
  return 1.0 - (n - 1.0) * off_diag / expected;
}

double KrippendorffAlpha(const JudgmentMatrix& j) {
  std::vector<std::vector<int>> units;
  units.reserve(j.rows.size());
  for (const auto& r : j.rows) {
    units.push_back({r.md[0], r.md[1], r.md[2], r.non_md[0], r.non_md[1], r.non_md[2]});
  }
  return KrippendorffAlpha(units);
}

std::vector<QueryEvent> BuildEvalSample(
    std::span<const QueryEvent> stream, std::size_t n, std::uint64_t seed,
    const std::unordered_set<std::string>& exclude_texts) {
  if (n == 0 || n % 2 != 0) throw UsageError("eval sample size must be even and positive");
  if (stream.size() < n) {
    throw DataError("stream has " + std::to_string(stream.size()) +
                    " events, fewer than the requested " + std::to_string(n));
  }
  const std::size_t half = n / 2;
  std::unordered_set<std::string> seen;
  std::vector<QueryEvent> out;
  out.reserve(n);

  auto draw = [&](std::vector<std::size_t> pool, std::uint64_t s,
                  std::string_view name) {
    std::mt19937_64 rng(s);
    Shuffle(pool, rng);
    std::size_t taken = 0;
    for (auto i : pool) {
      if (taken == half) break;
      const auto& q = stream[i];
      if (exclude_texts.contains(q.text) || seen.contains(q.text)) continue;
      seen.insert(q.text);
      out.push_back(q);
      ++taken;
    }
    if (taken < half) {
      throw DataError(std::string(name) + " stratum too small: " +
                      std::to_string(taken) + " eligible texts available, need " +
                      std::to_string(half));
    }
  };

  std::vector<std::size_t> stratum, all(stream.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (std::size_t i = 0; i < stream.size(); ++i) {
    if (InHighRecallStratum(stream[i])) stratum.push_back(i);
  }
  draw(std::move(stratum), DeriveSeed(seed, "high_recall"), "high-recall");
  draw(std::move(all), DeriveSeed(seed, "traffic"), "traffic");
  return out;
}

double RocAuc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw UsageError("scores/labels size mismatch");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  double n_pos = 0.0, n_neg = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    // Ranks i+1..j share their average.
    double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[idx[k]] == 1) {
        rank_sum_pos += avg_rank;
        n_pos += 1;
      } else {
        n_neg += 1;
      }
    }
    i = j;
  }
  if (n_pos == 0 || n_neg == 0) throw DataError("AUC needs both classes");
  return (rank_sum_pos - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg);
}

WsmMetrics EvaluateScores(std::span<const double> scores,
                          std::span<const int> labels, double threshold) {
  WsmMetrics m;
  m.threshold = threshold;
  m.roc_auc = RocAuc(scores, labels);
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    bool pred = scores[i] >= threshold;
    if (pred && labels[i] == 1) ++tp;
    else if (pred) ++fp;
    else if (labels[i] == 1) ++fn;
  }
  m.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0
             ? 2 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

WsmMetrics EvaluateWsm(const WsmModel& m, const LabeledSet& eval_set,
                       double threshold) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& ex : eval_set.examples) {
    scores.push_back(ScoreQuery(m, ex.event));
    labels.push_back(ex.label);
  }
  return EvaluateScores(scores, labels, threshold);
}

MetricRows ToRows(const WsmMetrics& metrics) {
  return {{"roc_auc", metrics.roc_auc},
          {"f1", metrics.f1},
          {"precision", metrics.precision},
          {"recall", metrics.recall},
          {"threshold", metrics.threshold}};
}

void WriteMetricsCsv(const MetricRows& rows, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "metric,value\n";
  char buf[64];
  for (const auto& [name, value] : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    out << name << ',' << buf << '\n';
  }
}

MetricRows ReadMetricsCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  MetricRows rows;
  std::string line;
  std::getline(in, line);
  if (line != "metric,value") throw DataError(path.string() + ": bad header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError(path.string() + ": bad row");
    rows.emplace_back(line.substr(0, comma), std::stod(line.substr(comma + 1)));
  }
  return rows;
}

}  // namespace foodsurv::wsm
