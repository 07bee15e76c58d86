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

#include "foodsurv/stats.h"

#include "foodsurv/citysim.h"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>

#include "doctest.h"
#include "planted.h"

namespace foodsurv::stats {
namespace {

// a/b: group unsafe/safe, c/d: comparison unsafe/safe.
struct TwoByTwo {
  std::vector<DesignRow> rows;
  std::vector<int> y;
};

TwoByTwo MakeTwoByTwo(int a, int b, int c, int d) {
  TwoByTwo t;
  auto add = [&](int n, int group, int outcome) {
    for (int i = 0; i < n; ++i) {
      t.rows.push_back({group, "A", RiskLevel::kHigh});
      t.y.push_back(outcome);
    }
  };
  add(a, 1, 1);
  add(b, 1, 0);
  add(c, 0, 1);
  add(d, 0, 0);
  return t;
}

struct CrossProduct {
  double odds_ratio, low, high;
};

CrossProduct ClosedForm(double a, double b, double c, double d) {
  double lor = std::log((a * d) / (b * c));
  double se = std::sqrt(1 / a + 1 / b + 1 / c + 1 / d);
  return {std::exp(lor), std::exp(lor - 1.96 * se), std::exp(lor + 1.96 * se)};
}

void CheckAgainstClosedForm(int a, int b, int c, int d) {
  auto t = MakeTwoByTwo(a, b, c, d);
  auto fit = FitBinomialLogit(BuildDesign(t.rows, false, false), t.y);
  auto want = ClosedForm(a, b, c, d);
  CHECK(fit.converged);
  CHECK(std::abs(fit.odds_ratio - want.odds_ratio) <= 1e-6 * want.odds_ratio);
  CHECK(std::abs(fit.ci_low - want.low) <= 1e-6 * want.low);
  CHECK(std::abs(fit.ci_high - want.high) <= 1e-6 * want.high);
}

InspectionRecord Insp(std::string id, Trigger t, bool unsafe, int critical = 0, int major = 0) {
  return {std::move(id), 17000, t, unsafe ? Outcome::kUnsafe : Outcome::kSafe, critical, major};
}

// ---------------------------------------------------------------------------
// Logistic regression.

TEST_CASE("reference 2x2 counts reproduce the cross-product odds ratio") {
  CheckAgainstClosedForm(69, 63, 2662, 8124);
  auto t = MakeTwoByTwo(69, 63, 2662, 8124);
  auto fit = FitBinomialLogit(BuildDesign(t.rows, false, false), t.y);
  CHECK(fit.odds_ratio == doctest::Approx(3.342).epsilon(5e-4));
  CHECK(fit.ci_low == doctest::Approx(2.37).epsilon(5e-3));
  CHECK(fit.ci_high == doctest::Approx(4.72).epsilon(5e-3));
  CHECK(fit.p_value < 1e-10);

  CheckAgainstClosedForm(37, 34, 508, 783);
  auto u = MakeTwoByTwo(37, 34, 508, 783);
  CHECK(FitBinomialLogit(BuildDesign(u.rows, false, false), u.y).odds_ratio ==
        doctest::Approx(1.677).epsilon(5e-4));
}

TEST_CASE("random 2x2 tables with cells of at least five match the closed form") {
  std::mt19937_64 gen(17);
  for (int i = 0; i < 40; ++i) {
    auto cell = [&] { return 5 + static_cast<int>(gen() % 300); };
    CheckAgainstClosedForm(cell(), cell(), cell(), cell());
  }
}

TEST_CASE("identical outcome distributions give an odds ratio of one") {
  auto t = MakeTwoByTwo(30, 70, 120, 280);
  auto fit = FitBinomialLogit(BuildDesign(t.rows, false, false), t.y);
  CHECK(std::abs(fit.odds_ratio - 1.0) <= 1e-9);
  CHECK(fit.p_value == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(fit.ci_low < 1.0);
  CHECK(fit.ci_high > 1.0);
}

TEST_CASE("log-likelihood never decreases across iterations") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto d = testing::PlantLogit(3.0, 800, seed);
    auto fit = FitBinomialLogit(d.design, d.y);
    CHECK(fit.converged);
    REQUIRE(fit.log_likelihood.size() >= 2);
    for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i) {
      CHECK(fit.log_likelihood[i] >= fit.log_likelihood[i - 1] - 1e-9);
    }
    CHECK(fit.ci_low <= fit.odds_ratio);
    CHECK(fit.odds_ratio <= fit.ci_high);
  }
}

TEST_CASE("single outcome class is a data error") {
  auto t = MakeTwoByTwo(0, 10, 0, 10);
  CHECK_THROWS_AS(FitBinomialLogit(BuildDesign(t.rows, false, false), t.y), DataError);
}

TEST_CASE("perfect separation is reported as quasi-separation") {
  auto t = MakeTwoByTwo(10, 0, 0, 10);
  try {
    FitBinomialLogit(BuildDesign(t.rows, false, false), t.y);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("quasi-separation") != std::string::npos);
  }
}

TEST_CASE("rank deficiency names the collinear columns") {
  DesignMatrix d;
  d.columns = {"intercept", "group", "city[B]"};
  d.x.resize(6, 3);
  for (int i = 0; i < 6; ++i) d.x.row(i) << 1.0, i % 2, i % 2;
  std::vector<int> y = {0, 1, 1, 0, 1, 0};
  try {
    FitBinomialLogit(d, y);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    std::string msg = e.what();
    CHECK(msg.find("city[B]") != std::string::npos);
  }
  CHECK_THROWS_AS(RequireFullRank(d), NumericalError);
  std::vector<double> yd = {0, 1, 1, 0, 1, 0};
  CHECK_THROWS_AS(AdjustedMeansLinear(d, yd), NumericalError);
}

TEST_CASE("design columns follow the reference-level rules") {
  std::vector<DesignRow> rows = {{1, "B", RiskLevel::kHigh},
                                 {0, "A", RiskLevel::kLow},
                                 {0, "C", RiskLevel::kMedium}};
  auto d = BuildDesign(rows, true, true);
  CHECK(d.columns ==
        std::vector<std::string>{"intercept", "group", "city[B]", "city[C]", "risk[medium]", "risk[low]"});
  CHECK(d.x(0, 2) == 1.0);
  CHECK(d.x(1, 5) == 1.0);
  CHECK(d.x(2, 4) == 1.0);
}

// ---------------------------------------------------------------------------
// Linear adjusted means.

TEST_CASE("OLS matches the normal-equation closed form on five rows") {
  DesignMatrix d;
  d.columns = {"intercept", "group", "x"};
  d.x.resize(5, 3);
  d.x << 1, 0, 0.5,  //
      1, 1, 1.5,     //
      1, 0, 2.0,     //
      1, 1, -1.0,    //
      1, 1, 3.0;
  std::vector<double> y = {1.0, 2.5, 0.7, 1.9, 4.2};

  // X'X b = X'y by Gaussian elimination with partial pivoting on plain arrays.
  double a[3][4] = {};
  for (int r = 0; r < 5; ++r) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) a[i][j] += d.x(r, i) * d.x(r, j);
      a[i][3] += d.x(r, i) * y[static_cast<std::size_t>(r)];
    }
  }
  for (int c = 0; c < 3; ++c) {
    int p = c;
    for (int r = c + 1; r < 3; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    }
    for (int k = 0; k < 4; ++k) std::swap(a[c][k], a[p][k]);
    for (int r = 0; r < 3; ++r) {
      if (r == c) continue;
      double f = a[r][c] / a[c][c];
      for (int k = 0; k < 4; ++k) a[r][k] -= f * a[c][k];
    }
  }
  auto m = AdjustedMeansLinear(d, y);
  REQUIRE(m.coefficients.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(m.coefficients[static_cast<std::size_t>(i)] - a[i][3] / a[i][i]) <= 1e-10);
  }
  // Marginal standardization: average prediction with group forced to 0 / 1.
  double xbar = (0.5 + 1.5 + 2.0 - 1.0 + 3.0) / 5;
  double b0 = a[0][3] / a[0][0], b1 = a[1][3] / a[1][1], b2 = a[2][3] / a[2][2];
  CHECK(m.mean_reference == doctest::Approx(b0 + b2 * xbar).epsilon(1e-12));
  CHECK(m.mean_group == doctest::Approx(b0 + b1 + b2 * xbar).epsilon(1e-12));
  CHECK(m.group_effect == doctest::Approx(b1).epsilon(1e-12));
}

TEST_CASE("constant covariates leave raw group means unchanged") {
  std::vector<DesignRow> rows;
  std::vector<double> y;
  std::mt19937_64 gen(3);
  double sum[2] = {}, n[2] = {};
  for (int i = 0; i < 300; ++i) {
    int g = static_cast<int>(gen() % 2);
    double v = static_cast<double>(gen() % 5);
    rows.push_back({g, "A", RiskLevel::kMedium});
    y.push_back(v);
    sum[g] += v;
    n[g] += 1;
  }
  auto m = AdjustedMeansLinear(BuildDesign(rows, true, true), y);
  CHECK(m.mean_reference == doctest::Approx(sum[0] / n[0]).epsilon(1e-12));
  CHECK(m.mean_group == doctest::Approx(sum[1] / n[1]).epsilon(1e-12));
}

TEST_CASE("adjustment recovers a planted gap under risk confounding") {
  double adjusted = 0, raw = 0;
  const int runs = 200;
  for (int run = 0; run < runs; ++run) {
    Rng rng(DeriveSeed(42, static_cast<std::uint64_t>(run)));
    std::vector<DesignRow> rows;
    std::vector<double> y;
    double sum[2] = {}, n[2] = {};
    const double risk_mean[3] = {0.6, 0.3, 0.1};
    const double p_group[3] = {0.4, 0.15, 0.05};
    for (int i = 0; i < 1500; ++i) {
      double u = rng.Uniform();
      int risk = u < 0.53 ? 0 : (u < 0.75 ? 1 : 2);
      int g = rng.Bernoulli(p_group[risk]) ? 1 : 0;
      double v = static_cast<double>(
          citysim::SamplePoisson(rng, risk_mean[risk] + 0.2 * g));
      rows.push_back({g, rng.Bernoulli(0.5) ? "A" : "B", static_cast<RiskLevel>(risk)});
      y.push_back(v);
      sum[g] += v;
      n[g] += 1;
    }
    auto m = AdjustedMeansLinear(BuildDesign(rows, true, true), y);
    adjusted += m.mean_group - m.mean_reference;
    raw += sum[1] / n[1] - sum[0] / n[0];
  }
  adjusted /= runs;
  raw /= runs;
  CHECK(std::abs(adjusted - 0.2) <= 0.05);
  CHECK(raw - 0.2 > 0.05);  // confounding inflates the unadjusted gap
}

// ---------------------------------------------------------------------------
// Chi-square.

TEST_CASE("identical row distributions give statistic zero and p one") {
  auto r = ChiSquareIndependence({{10, 20, 30}, {20, 40, 60}});
  CHECK(r.statistic == doctest::Approx(0.0));
  CHECK(r.dof == 2);
  CHECK(r.p_value == doctest::Approx(1.0));
}

TEST_CASE("risk distribution counts give p below 0.001") {
  auto r = ChiSquareIndependence({{84, 39, 9}, {5702, 2325, 2759}});
  CHECK(r.dof == 2);
  CHECK(r.p_value < 0.001);
  // Pearson statistic from the expected counts, by hand.
  const double t[2][3] = {{84, 39, 9}, {5702, 2325, 2759}};
  double total = 0, row[2] = {}, col[3] = {};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) total += t[i][j], row[i] += t[i][j], col[j] += t[i][j];
  }
  double stat = 0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) {
      double e = row[i] * col[j] / total;
      stat += (t[i][j] - e) * (t[i][j] - e) / e;
    }
  }
  CHECK(r.statistic == doctest::Approx(stat).epsilon(1e-12));
}

TEST_CASE("upper tail matches quadrature of the density") {
  boost::math::quadrature::exp_sinh<double> integrator;
  for (int k = 1; k <= 5; ++k) {
    const double half = k / 2.0;
    const double norm = std::pow(2.0, half) * boost::math::tgamma(half);
    auto density = [&](double t) { return std::pow(t, half - 1) * std::exp(-t / 2) / norm; };
    for (double x : {0.05, 0.3, 1.0, 2.5, 4.0, 7.5, 12.0, 20.0, 35.0, 60.0}) {
      double want = integrator.integrate([&](double s) { return density(x + s); }, 0.0,
                                         std::numeric_limits<double>::infinity());
      CHECK_MESSAGE(std::abs(ChiSquareUpperTail(x, k) - want) <= 1e-8, "dof " << k << " x " << x);
    }
  }
  CHECK(ChiSquareUpperTail(0.0, 3) == 1.0);
}

TEST_CASE("statistic is invariant under row and column permutations") {
  std::vector<std::vector<double>> t = {{12, 5, 9, 30}, {7, 14, 3, 8}, {20, 2, 11, 6}};
  auto base = ChiSquareIndependence(t);
  std::vector<int> rows = {0, 1, 2}, cols = {0, 1, 2, 3};
  do {
    do {
      std::vector<std::vector<double>> p(3, std::vector<double>(4));
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 4; ++j) {
          p[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
              t[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])]
               [static_cast<std::size_t>(cols[static_cast<std::size_t>(j)])];
        }
      }
      CHECK(ChiSquareIndependence(p).statistic == doctest::Approx(base.statistic).epsilon(1e-12));
    } while (std::next_permutation(cols.begin(), cols.end()));
  } while (std::next_permutation(rows.begin(), rows.end()));
}

TEST_CASE("zero expected count and ragged tables are rejected") {
  CHECK_THROWS_AS(ChiSquareIndependence({{0, 5}, {0, 7}}), DataError);
  CHECK_THROWS_AS(ChiSquareIndependence({{1, 5}, {2}}), DataError);
}

// ---------------------------------------------------------------------------
// Tables.

std::vector<RestaurantRecord> Registry() {
  return {{"h1", "A", RiskLevel::kHigh},
          {"m1", "A", RiskLevel::kMedium},
          {"l1", "B", RiskLevel::kLow},
          {"h2", "B", RiskLevel::kHigh}};
}

TEST_CASE("all-safe inspections report zero percent and no fit") {
  std::vector<InspectionRecord> ins;
  for (int i = 0; i < 20; ++i) {
    ins.push_back(Insp(i % 2 ? "h1" : "l1", i % 3 ? Trigger::kRoutine : Trigger::kFinder, false));
    ins.push_back(Insp("m1", Trigger::kComplaint, false));
  }
  auto t = BuildPrecisionTable(ins, Registry());
  REQUIRE(t.blocks.size() == 3);
  for (const auto& b : t.blocks) {
    for (const auto& r : b.rows) {
      CHECK(r.finder.percent() == 0.0);
      CHECK(r.comparison.percent() == 0.0);
      CHECK_FALSE(r.fit.has_value());
      CHECK_FALSE(r.fit_note.empty());
    }
  }
  CHECK_FALSE(RenderPrecisionTable(t).empty());
}

TEST_CASE("reference counts reproduce the overall unsafe fractions exactly") {
  std::vector<InspectionRecord> ins;
  for (int i = 0; i < 69; ++i) ins.push_back(Insp("h1", Trigger::kFinder, true));
  for (int i = 0; i < 63; ++i) ins.push_back(Insp("h1", Trigger::kFinder, false));
  for (int i = 0; i < 2662; ++i) ins.push_back(Insp("h1", Trigger::kRoutine, true));
  for (int i = 0; i < 8124; ++i) ins.push_back(Insp("h1", Trigger::kRoutine, false));
  std::vector<RestaurantRecord> reg = {{"h1", "A", RiskLevel::kHigh}};
  auto t = BuildPrecisionTable(ins, reg);
  const auto& overall = t.blocks[0].rows[0];
  CHECK(t.blocks[0].comparison == "BASELINE");
  CHECK(overall.finder.n == 132);
  CHECK(overall.finder.unsafe == 69);
  CHECK(overall.comparison.n == 10786);
  CHECK(overall.comparison.unsafe == 2662);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", overall.finder.percent());
  CHECK(std::string(buf) == "52.3");
  std::snprintf(buf, sizeof(buf), "%.1f", overall.comparison.percent());
  CHECK(std::string(buf) == "24.7");
  REQUIRE(overall.fit.has_value());
  CHECK(overall.fit->odds_ratio == doctest::Approx(ClosedForm(69, 63, 2662, 8124).odds_ratio).epsilon(1e-6));
}

TEST_CASE("stratum counts equal a brute-force group-by") {
  std::mt19937_64 gen(8);
  auto reg = Registry();
  std::vector<InspectionRecord> ins;
  const Trigger triggers[] = {Trigger::kFinder, Trigger::kRoutine, Trigger::kComplaint};
  for (int i = 0; i < 1000; ++i) {
    ins.push_back(Insp(reg[gen() % reg.size()].restaurant_id, triggers[gen() % 3], gen() % 3 == 0));
  }
  auto t = BuildPrecisionTable(ins, reg);
  CHECK(t.total_inspections == 1000);

  std::map<std::string, RiskLevel> risk;
  for (const auto& r : reg) risk[r.restaurant_id] = r.risk_level;
  // (comparison, stratum, is_finder) -> (n, unsafe)
  std::map<std::tuple<std::string, int, bool>, std::pair<int, int>> want;
  for (const auto& i : ins) {
    for (std::string cmp : {"BASELINE", "COMPLAINT", "ROUTINE"}) {
      bool finder = i.trigger == Trigger::kFinder;
      bool in_cmp = cmp == "BASELINE" || (cmp == "COMPLAINT" && i.trigger == Trigger::kComplaint) ||
                    (cmp == "ROUTINE" && i.trigger == Trigger::kRoutine);
      if (!finder && !in_cmp) continue;
      for (int s : {0, 1 + static_cast<int>(risk[i.restaurant_id])}) {
        auto& c = want[{cmp, s, finder}];
        c.first += 1;
        c.second += i.outcome == Outcome::kUnsafe;
      }
    }
  }
  for (const auto& b : t.blocks) {
    REQUIRE(b.rows.size() == 4);
    for (int s = 0; s < 4; ++s) {
      const auto& row = b.rows[static_cast<std::size_t>(s)];
      auto f = want[{b.comparison, s, true}];
      auto c = want[{b.comparison, s, false}];
      CHECK(row.finder.n == f.first);
      CHECK(row.finder.unsafe == f.second);
      CHECK(row.comparison.n == c.first);
      CHECK(row.comparison.unsafe == c.second);
    }
  }
  // BASELINE overall covers every inspection.
  CHECK(t.blocks[0].rows[0].finder.n + t.blocks[0].rows[0].comparison.n == 1000);

  auto risk_table = BuildRiskTable(ins, reg);
  CHECK(risk_table.total[0] + risk_table.total[1] == 1000);
  CHECK(risk_table.complaint + risk_table.routine == risk_table.total[1]);
  std::int64_t by_risk = 0;
  for (const auto& r : risk_table.risk) by_risk += r[0] + r[1];
  CHECK(by_risk == 1000);
  REQUIRE(risk_table.chi_square.has_value());
}

TEST_CASE("unknown restaurant in an inspection is a data error") {
  std::vector<InspectionRecord> ins = {Insp("zz", Trigger::kFinder, true)};
  CHECK_THROWS_AS(BuildPrecisionTable(ins, Registry()), DataError);
  CHECK_THROWS_AS(BuildRiskTable(ins, Registry()), DataError);
}

TEST_CASE("violation table equals raw means with a single covariate pattern") {
  std::vector<InspectionRecord> ins;
  double crit[2] = {}, major[2] = {}, n[2] = {};
  std::mt19937_64 gen(4);
  for (int i = 0; i < 400; ++i) {
    bool finder = gen() % 4 == 0;
    int c = static_cast<int>(gen() % 3), m = static_cast<int>(gen() % 4);
    ins.push_back(Insp("h1", finder ? Trigger::kFinder : Trigger::kRoutine, c > 0, c, m));
    crit[finder] += c;
    major[finder] += m;
    n[finder] += 1;
  }
  auto t = BuildViolationTable(ins, Registry());
  CHECK(t.n_finder == static_cast<std::int64_t>(n[1]));
  CHECK(t.n_baseline == static_cast<std::int64_t>(n[0]));
  REQUIRE(t.critical.has_value());
  REQUIRE(t.major.has_value());
  CHECK(t.critical->mean_group == doctest::Approx(crit[1] / n[1]).epsilon(1e-12));
  CHECK(t.critical->mean_reference == doctest::Approx(crit[0] / n[0]).epsilon(1e-12));
  CHECK(t.major->mean_group == doctest::Approx(major[1] / n[1]).epsilon(1e-12));
  CHECK_FALSE(RenderViolationTable(t).empty());
  CHECK(ViolationTableCsv(t).find('\n') != std::string::npos);
}

TEST_CASE("empty inspection log renders without fits") {
  std::vector<InspectionRecord> none;
  auto p = BuildPrecisionTable(none, Registry());
  for (const auto& b : p.blocks) {
    for (const auto& r : b.rows) CHECK(r.finder.n == 0);
  }
  auto r = BuildRiskTable(none, Registry());
  CHECK_FALSE(r.chi_square.has_value());
  auto v = BuildViolationTable(none, Registry());
  CHECK_FALSE(v.critical.has_value());
  CHECK_FALSE(RenderRiskTable(r).empty());
  CHECK_FALSE(RenderPrecisionTable(p).empty());
  CHECK_FALSE(RenderViolationTable(v).empty());
  CHECK_FALSE(RiskTableCsv(r).empty());
  CHECK_FALSE(PrecisionTableCsv(p).empty());
}

}  // namespace
}  // namespace foodsurv::stats
