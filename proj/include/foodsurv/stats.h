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

// Inspection-outcome statistics: binomial logistic regression by IRLS with
// Wald inference, OLS with marginally standardized group means, Pearson
// chi-square independence test, and the risk / precision / violation tables
// built from them.

#ifndef FOODSURV_STATS_H_
#define FOODSURV_STATS_H_

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "foodsurv/logdata.h"

namespace foodsurv::stats {

// Columns: intercept, group indicator, then optional fixed-effect dummies.
struct DesignMatrix {
  Eigen::MatrixXd x;
  std::vector<std::string> columns;
  int group_column = 1;
};

struct DesignRow {
  int group = 0;  // 1 = group of interest (e.g. FINDER)
  std::string city;
  RiskLevel risk = RiskLevel::kHigh;
};

// City dummies for every city present except the lexicographically first;
// risk dummies for medium/low against high (against the first present level
// when high is absent). Levels absent from `rows` get no column.
DesignMatrix BuildDesign(std::span<const DesignRow> rows, bool city_effects,
                         bool risk_effects);

// Throws NumericalError naming the collinear columns if X is rank deficient.
void RequireFullRank(const DesignMatrix& d);

struct RegressionFit {
  std::vector<std::string> columns;
  std::vector<double> coefficients;
  std::vector<double> std_errors;
  double odds_ratio = 1.0;  // exp(beta_group)
  double ci_low = 1.0;      // exp(beta_group - 1.96 SE)
  double ci_high = 1.0;     // exp(beta_group + 1.96 SE)
  double p_value = 1.0;     // two-sided Wald
  bool converged = false;
  int iterations = 0;
  std::vector<double> log_likelihood;  // after each iteration, starting at beta = 0
};

inline constexpr int kIrlsMaxIterations = 25;
inline constexpr double kIrlsTolerance = 1e-8;
inline constexpr double kSeparationBound = 15.0;

// Newton/IRLS on the binomial log-likelihood. Throws DataError when either
// outcome class is missing, NumericalError for rank deficiency or when any
// |beta| exceeds 15 ("quasi-separation").
RegressionFit FitBinomialLogit(const DesignMatrix& d, std::span<const int> y);

struct AdjustedMeans {
  std::vector<double> coefficients;
  double mean_reference = 0.0;  // group indicator 0
  double mean_group = 0.0;      // group indicator 1
  double group_effect = 0.0;
  double group_se = 0.0;
  double p_value = 1.0;  // two-sided t test on the group coefficient
};

// OLS fit; adjusted mean for g = average prediction over all rows with the
// group column set to g.
AdjustedMeans AdjustedMeansLinear(const DesignMatrix& d, std::span<const double> y);

// Upper tail P(X >= x) of a chi-square variable with `dof` degrees of
// freedom, via the regularized incomplete gamma (series below a + 1,
// continued fraction above).
double ChiSquareUpperTail(double x, double dof);

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

// Pearson test without continuity correction. Throws DataError if any
// expected count is zero or the table is ragged.
ChiSquareResult ChiSquareIndependence(const std::vector<std::vector<double>>& table);

// ---------------------------------------------------------------------------
// Tables.

struct GroupCount {
  std::int64_t n = 0;
  std::int64_t unsafe = 0;
  double percent() const { return n > 0 ? 100.0 * static_cast<double>(unsafe) / static_cast<double>(n) : 0.0; }
};

struct PrecisionRow {
  std::string stratum;  // "overall", "high", "medium", "low"
  GroupCount finder;
  GroupCount comparison;
  std::optional<RegressionFit> fit;
  std::string fit_note;  // why the fit is absent
};

struct PrecisionBlock {
  std::string comparison;  // "BASELINE", "COMPLAINT", "ROUTINE"
  std::vector<PrecisionRow> rows;
};

struct PrecisionTable {
  std::vector<PrecisionBlock> blocks;
  std::int64_t total_inspections = 0;
};

// For each comparison group: overall and per-risk counts with an odds-ratio
// fit (city and risk fixed effects overall; city only within a stratum).
// Throws DataError if an inspection's restaurant is not in the registry.
PrecisionTable BuildPrecisionTable(std::span<const InspectionRecord> inspections,
                                   std::span<const RestaurantRecord> registry);

struct RiskTable {
  std::vector<std::string> cities;
  // [0] = FINDER, [1] = BASELINE.
  std::array<std::int64_t, 2> total{};
  std::vector<std::array<std::int64_t, 2>> per_city;
  std::int64_t complaint = 0;
  std::int64_t routine = 0;
  std::array<std::array<std::int64_t, 2>, kNumRiskLevels> risk{};
  std::optional<ChiSquareResult> chi_square;
  std::string chi_square_note;
};

RiskTable BuildRiskTable(std::span<const InspectionRecord> inspections,
                         std::span<const RestaurantRecord> registry);

struct ViolationTable {
  std::int64_t n_finder = 0;
  std::int64_t n_baseline = 0;
  std::optional<AdjustedMeans> critical;
  std::optional<AdjustedMeans> major;
  std::string note;
};

// Adjusted mean critical/major counts, FINDER vs BASELINE, adjusting for
// city and risk level.
ViolationTable BuildViolationTable(std::span<const InspectionRecord> inspections,
                                   std::span<const RestaurantRecord> registry);

// Aligned plain-text renderings.
std::string RenderRiskTable(const RiskTable& t);
std::string RenderPrecisionTable(const PrecisionTable& t);
std::string RenderViolationTable(const ViolationTable& t);

// CSV renderings (header first line). Numbers use round-trip precision.
std::string RiskTableCsv(const RiskTable& t);
std::string PrecisionTableCsv(const PrecisionTable& t);
std::string ViolationTableCsv(const ViolationTable& t);

}  // namespace foodsurv::stats

#endif  // FOODSURV_STATS_H_
