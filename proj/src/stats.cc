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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <boost/math/distributions/students_t.hpp>

namespace foodsurv::stats {
namespace {

constexpr double kZ95 = 1.96;  // as conventionally reported

std::string Num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string PValueText(double p) {
  if (p < 0.001) return "<0.001";
  return Fixed(p, 3);
}

double LogLikelihood(const Eigen::VectorXd& eta, std::span<const int> y) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    double z = eta[i];
    // log sigma(z) = -softplus(-z); log(1 - sigma(z)) = -softplus(z).
    double sp_pos = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    ll += y[static_cast<std::size_t>(i)] == 1 ? -(sp_pos - z) : -sp_pos;
  }
  return ll;
}

// Series for the regularized lower incomplete gamma P(a, x).
double GammaPSeries(double a, double x) {
  double ap = a, sum = 1.0 / a, del = sum;
  for (int n = 0; n < 10000; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Modified Lentz continued fraction for the upper tail Q(a, x).
double GammaQContinuedFraction(double a, double x) {
  constexpr double kTiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

struct Indexed {
  std::unordered_map<std::string, const RestaurantRecord*> by_id;

  explicit Indexed(std::span<const RestaurantRecord> registry) {
    for (const auto& r : registry) by_id.emplace(r.restaurant_id, &r);
  }

  const RestaurantRecord& At(const std::string& id) const {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw DataError("inspection references unknown restaurant '" + id + "'");
    }
    return *it->second;
  }
};

bool InComparison(Trigger t, std::string_view comparison) {
  if (comparison == "BASELINE") return t != Trigger::kFinder;
  if (comparison == "COMPLAINT") return t == Trigger::kComplaint;
  return t == Trigger::kRoutine;
}

}  // namespace

DesignMatrix BuildDesign(std::span<const DesignRow> rows, bool city_effects,
                         bool risk_effects) {
  std::set<std::string> cities;
  std::set<int> risks;
  for (const auto& r : rows) {
    cities.insert(r.city);
    risks.insert(static_cast<int>(r.risk));
  }
  DesignMatrix d;
  d.columns = {"intercept", "group"};
  std::vector<std::string> city_levels;
  if (city_effects && cities.size() > 1) {
    city_levels.assign(std::next(cities.begin()), cities.end());
    for (const auto& c : city_levels) d.columns.push_back("city[" + c + "]");
  }
  std::vector<int> risk_levels;
  if (risk_effects && risks.size() > 1) {
    risk_levels.assign(std::next(risks.begin()), risks.end());
    for (int r : risk_levels) {
      d.columns.push_back("risk[" + std::string(RiskLevelName(static_cast<RiskLevel>(r))) + "]");
    }
  }
  d.x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                              static_cast<Eigen::Index>(d.columns.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto row = static_cast<Eigen::Index>(i);
    d.x(row, 0) = 1.0;
    d.x(row, 1) = rows[i].group;
    Eigen::Index col = 2;
    for (const auto& c : city_levels) d.x(row, col++) = rows[i].city == c ? 1.0 : 0.0;
    for (int r : risk_levels) {
      d.x(row, col++) = static_cast<int>(rows[i].risk) == r ? 1.0 : 0.0;
    }
  }
  return d;
}

void RequireFullRank(const DesignMatrix& d) {
  const auto cols = d.x.cols();
  if (d.x.rows() < cols) {
    throw NumericalError("design has fewer rows (" + std::to_string(d.x.rows()) +
                         ") than columns (" + std::to_string(cols) + ")");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.x);
  if (qr.rank() == cols) return;
  // Greedy scan: a column that does not raise the rank of its predecessors
  // is collinear with them.
  std::string offenders;
  Eigen::Index rank = 0;
  std::vector<Eigen::Index> kept;
  for (Eigen::Index c = 0; c < cols; ++c) {
    kept.push_back(c);
    Eigen::MatrixXd sub(d.x.rows(), static_cast<Eigen::Index>(kept.size()));
    for (std::size_t k = 0; k < kept.size(); ++k) {
      sub.col(static_cast<Eigen::Index>(k)) = d.x.col(kept[k]);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> sq(sub);
    if (sq.rank() > rank) {
      rank = sq.rank();
    } else {
      kept.pop_back();
      if (!offenders.empty()) offenders += ", ";
      offenders += d.columns[static_cast<std::size_t>(c)];
    }
  }
  throw NumericalError("design matrix is rank deficient; collinear column(s): " +
                       offenders);
}

RegressionFit FitBinomialLogit(const DesignMatrix& d, std::span<const int> y) {
  const auto n = d.x.rows();
  const auto p = d.x.cols();
  if (static_cast<std::size_t>(n) != y.size()) throw UsageError("X/y size mismatch");
  bool pos = false, neg = false;
  for (int v : y) {
    if (v == 1) pos = true;
    else if (v == 0) neg = true;
    else throw DataError("binary outcome must be 0 or 1");
  }
  if (!pos || !neg) throw DataError("both outcome classes are required");
  RequireFullRank(d);

  RegressionFit fit;
  fit.columns = d.columns;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = d.x * beta;
  fit.log_likelihood.push_back(LogLikelihood(eta, y));
  Eigen::VectorXd yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv[i] = y[static_cast<std::size_t>(i)];

  for (int iter = 1; iter <= kIrlsMaxIterations; ++iter) {
    Eigen::VectorXd mu = eta.unaryExpr([](double z) {
      return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    });
    Eigen::VectorXd w = mu.array() * (1.0 - mu.array());
    Eigen::MatrixXd info = d.x.transpose() * w.asDiagonal() * d.x;
    Eigen::VectorXd score = d.x.transpose() * (yv - mu);
    Eigen::VectorXd step = info.ldlt().solve(score);
    beta += step;
    eta = d.x * beta;
    fit.iterations = iter;
    fit.log_likelihood.push_back(LogLikelihood(eta, y));
    if (!beta.allFinite() || beta.cwiseAbs().maxCoeff() > kSeparationBound) {
      throw NumericalError("quasi-separation: |beta| exceeded " +
                           std::to_string(kSeparationBound));
    }
    if (step.cwiseAbs().maxCoeff() < kIrlsTolerance) {
      fit.converged = true;
      break;
    }
  }

  Eigen::VectorXd mu = eta.unaryExpr([](double z) {
    return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  });
  Eigen::VectorXd w = mu.array() * (1.0 - mu.array());
  Eigen::MatrixXd info = d.x.transpose() * w.asDiagonal() * d.x;
  Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));

  for (Eigen::Index j = 0; j < p; ++j) {
    fit.coefficients.push_back(beta[j]);
    fit.std_errors.push_back(std::sqrt(cov(j, j)));
  }
  const auto g = static_cast<std::size_t>(d.group_column);
  double b = fit.coefficients[g];
  double se = fit.std_errors[g];
  fit.odds_ratio = std::exp(b);
  fit.ci_low = std::exp(b - kZ95 * se);
  fit.ci_high = std::exp(b + kZ95 * se);
  fit.p_value = std::erfc(std::fabs(b / se) / std::sqrt(2.0));
  return fit;
}

AdjustedMeans AdjustedMeansLinear(const DesignMatrix& d, std::span<const double> y) {
  const auto n = d.x.rows();
  const auto p = d.x.cols();
  if (static_cast<std::size_t>(n) != y.size()) throw UsageError("X/y size mismatch");
  RequireFullRank(d);
  Eigen::VectorXd yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv[i] = y[static_cast<std::size_t>(i)];
  Eigen::VectorXd beta = d.x.colPivHouseholderQr().solve(yv);

  AdjustedMeans out;
  out.coefficients.assign(beta.data(), beta.data() + p);
  Eigen::MatrixXd x0 = d.x, x1 = d.x;
  x0.col(d.group_column).setZero();
  x1.col(d.group_column).setOnes();
  out.mean_reference = (x0 * beta).mean();
  out.mean_group = (x1 * beta).mean();
  out.group_effect = beta[d.group_column];

  if (n > p) {
    double rss = (yv - d.x * beta).squaredNorm();
    double sigma2 = rss / static_cast<double>(n - p);
    Eigen::MatrixXd xtx_inv =
        (d.x.transpose() * d.x).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    out.group_se = std::sqrt(sigma2 * xtx_inv(d.group_column, d.group_column));
    if (out.group_se > 0) {
      boost::math::students_t dist(static_cast<double>(n - p));
      double t = std::fabs(out.group_effect / out.group_se);
      out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
    } else {
      out.p_value = out.group_effect == 0.0 ? 1.0 : 0.0;
    }
  }
  return out;
}

double ChiSquareUpperTail(double x, double dof) {
  if (!(dof > 0)) throw UsageError("chi-square dof must be positive");
  if (x <= 0) return 1.0;
  double a = 0.5 * dof, h = 0.5 * x;
  if (h < a + 1.0) return 1.0 - GammaPSeries(a, h);
  return GammaQContinuedFraction(a, h);
}

ChiSquareResult ChiSquareIndependence(const std::vector<std::vector<double>>& table) {
  if (table.size() < 2 || table[0].size() < 2) {
    throw DataError("chi-square needs at least a 2x2 table");
  }
  const std::size_t r = table.size(), c = table[0].size();
  std::vector<double> row(r, 0.0), col(c, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    if (table[i].size() != c) throw DataError("chi-square table is ragged");
    for (std::size_t j = 0; j < c; ++j) {
      if (table[i][j] < 0) throw DataError("negative count in chi-square table");
      row[i] += table[i][j];
      col[j] += table[i][j];
      total += table[i][j];
    }
  }
  ChiSquareResult res;
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      double e = row[i] * col[j] / total;
      if (!(e > 0)) {
        throw DataError("chi-square expected count is zero at cell (" +
                        std::to_string(i) + "," + std::to_string(j) + ")");
      }
      double diff = table[i][j] - e;
      res.statistic += diff * diff / e;
    }
  }
  res.dof = static_cast<int>((r - 1) * (c - 1));
  res.p_value = ChiSquareUpperTail(res.statistic, res.dof);
  return res;
}

PrecisionTable BuildPrecisionTable(std::span<const InspectionRecord> inspections,
                                   std::span<const RestaurantRecord> registry) {
  Indexed reg(registry);
  PrecisionTable table;
  table.total_inspections = static_cast<std::int64_t>(inspections.size());
  for (const auto& i : inspections) reg.At(i.restaurant_id);

  static constexpr std::string_view kComparisons[] = {"BASELINE", "COMPLAINT", "ROUTINE"};
  static constexpr std::string_view kStrata[] = {"overall", "high", "medium", "low"};
  for (auto comparison : kComparisons) {
    PrecisionBlock block;
    block.comparison = std::string(comparison);
    for (std::size_t s = 0; s < 4; ++s) {
      PrecisionRow row;
      row.stratum = std::string(kStrata[s]);
      std::vector<DesignRow> design_rows;
      std::vector<int> y;
      for (const auto& insp : inspections) {
        const auto& rest = reg.At(insp.restaurant_id);
        if (s > 0 && static_cast<std::size_t>(rest.risk_level) != s - 1) continue;
        bool finder = insp.trigger == Trigger::kFinder;
        if (!finder && !InComparison(insp.trigger, comparison)) continue;
        int unsafe = insp.outcome == Outcome::kUnsafe ? 1 : 0;
        auto& gc = finder ? row.finder : row.comparison;
        gc.n += 1;
        gc.unsafe += unsafe;
        design_rows.push_back({finder ? 1 : 0, rest.city, rest.risk_level});
        y.push_back(unsafe);
      }
      if (row.finder.n == 0 || row.comparison.n == 0) {
        row.fit_note = "empty group";
      } else {
        try {
          row.fit = FitBinomialLogit(BuildDesign(design_rows, true, s == 0), y);
        } catch (const std::exception& e) {
          row.fit_note = e.what();
        }
      }
      block.rows.push_back(std::move(row));
    }
    table.blocks.push_back(std::move(block));
  }
  return table;
}

RiskTable BuildRiskTable(std::span<const InspectionRecord> inspections,
                         std::span<const RestaurantRecord> registry) {
  Indexed reg(registry);
  RiskTable t;
  std::map<std::string, std::array<std::int64_t, 2>> cities;
  for (const auto& r : registry) cities.try_emplace(r.city, std::array<std::int64_t, 2>{});
  for (const auto& insp : inspections) {
    const auto& rest = reg.At(insp.restaurant_id);
    std::size_t g = insp.trigger == Trigger::kFinder ? 0 : 1;
    t.total[g] += 1;
    cities[rest.city][g] += 1;
    t.risk[static_cast<std::size_t>(rest.risk_level)][g] += 1;
    if (insp.trigger == Trigger::kComplaint) t.complaint += 1;
    if (insp.trigger == Trigger::kRoutine) t.routine += 1;
  }
  for (const auto& [c, counts] : cities) {
    t.cities.push_back(c);
    t.per_city.push_back(counts);
  }
  std::vector<std::vector<double>> table(2, std::vector<double>(kNumRiskLevels));
  for (std::size_t r = 0; r < kNumRiskLevels; ++r) {
    table[0][r] = static_cast<double>(t.risk[r][0]);
    table[1][r] = static_cast<double>(t.risk[r][1]);
  }
  try {
    t.chi_square = ChiSquareIndependence(table);
  } catch (const std::exception& e) {
    t.chi_square_note = e.what();
  }
  return t;
}

ViolationTable BuildViolationTable(std::span<const InspectionRecord> inspections,
                                   std::span<const RestaurantRecord> registry) {
  Indexed reg(registry);
  ViolationTable t;
  std::vector<DesignRow> rows;
  std::vector<double> critical, major;
  for (const auto& insp : inspections) {
    const auto& rest = reg.At(insp.restaurant_id);
    bool finder = insp.trigger == Trigger::kFinder;
    (finder ? t.n_finder : t.n_baseline) += 1;
    rows.push_back({finder ? 1 : 0, rest.city, rest.risk_level});
    critical.push_back(static_cast<double>(insp.critical_count));
    major.push_back(static_cast<double>(insp.major_count));
  }
  if (t.n_finder == 0 || t.n_baseline == 0) {
    t.note = "empty group";
    return t;
  }
  try {
    auto d = BuildDesign(rows, true, true);
    t.critical = AdjustedMeansLinear(d, critical);
    t.major = AdjustedMeansLinear(d, major);
  } catch (const std::exception& e) {
    t.note = e.what();
  }
  return t;
}

std::string RenderRiskTable(const RiskTable& t) {
  std::ostringstream os;
  char buf[160];
  auto pct = [](std::int64_t k, std::int64_t n) {
    return n > 0 ? 100.0 * static_cast<double>(k) / static_cast<double>(n) : 0.0;
  };
  os << "Inspections by trigger and risk level\n";
  std::snprintf(buf, sizeof(buf), "%-22s %16s %16s\n", "", "FINDER", "BASELINE");
  os << buf;
  std::snprintf(buf, sizeof(buf), "%-22s %16lld %16lld\n", "Total",
                static_cast<long long>(t.total[0]), static_cast<long long>(t.total[1]));
  os << buf;
  for (std::size_t i = 0; i < t.cities.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%-22s %16lld %16lld\n", ("City " + t.cities[i]).c_str(),
                  static_cast<long long>(t.per_city[i][0]),
                  static_cast<long long>(t.per_city[i][1]));
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "%-22s %16s %16lld\n", "Complaint-driven", "N/A",
                static_cast<long long>(t.complaint));
  os << buf;
  std::snprintf(buf, sizeof(buf), "%-22s %16s %16lld\n", "Routine", "N/A",
                static_cast<long long>(t.routine));
  os << buf;
  static constexpr const char* kRisk[] = {"High (%)", "Medium (%)", "Low (%)"};
  for (std::size_t r = 0; r < kNumRiskLevels; ++r) {
    std::string f = std::to_string(t.risk[r][0]) + " (" + Fixed(pct(t.risk[r][0], t.total[0]), 1) + "%)";
    std::string b = std::to_string(t.risk[r][1]) + " (" + Fixed(pct(t.risk[r][1], t.total[1]), 1) + "%)";
    std::snprintf(buf, sizeof(buf), "%-22s %16s %16s\n", kRisk[r], f.c_str(), b.c_str());
    os << buf;
  }
  if (t.chi_square) {
    os << "Risk distribution chi-square = " << Fixed(t.chi_square->statistic, 2)
       << " (dof " << t.chi_square->dof << "), p " << PValueText(t.chi_square->p_value)
       << "\n";
  } else {
    os << "Risk distribution chi-square: not computed (" << t.chi_square_note << ")\n";
  }
  return os.str();
}

std::string RenderPrecisionTable(const PrecisionTable& t) {
  std::ostringstream os;
  char buf[200];
  auto cell = [](const GroupCount& g) {
    return std::to_string(g.unsafe) + "/" + std::to_string(g.n) + " (" + Fixed(g.percent(), 1) + "%)";
  };
  os << "Unsafe inspections: FINDER vs comparison groups\n";
  for (const auto& block : t.blocks) {
    std::snprintf(buf, sizeof(buf), "%-10s %20s %20s %26s %8s\n", block.comparison.c_str(),
                  "FINDER", block.comparison.c_str(), "Odds ratio [95% CI]", "p");
    os << buf;
    for (const auto& row : block.rows) {
      std::string or_text = "-", p_text = "-";
      if (row.fit) {
        or_text = Fixed(row.fit->odds_ratio, 2) + " [" + Fixed(row.fit->ci_low, 2) + "-" +
                  Fixed(row.fit->ci_high, 2) + "]";
        p_text = PValueText(row.fit->p_value);
      }
      std::snprintf(buf, sizeof(buf), "  %-8s %20s %20s %26s %8s\n", row.stratum.c_str(),
                    cell(row.finder).c_str(), cell(row.comparison).c_str(),
                    or_text.c_str(), p_text.c_str());
      os << buf;
    }
  }
  os << "Total inspections: " << t.total_inspections << "\n";
  return os.str();
}

std::string RenderViolationTable(const ViolationTable& t) {
  std::ostringstream os;
  char buf[160];
  os << "Adjusted mean violation counts (city and risk level)\n";
  std::snprintf(buf, sizeof(buf), "%-20s %12s %12s %8s\n", "",
                ("FINDER n=" + std::to_string(t.n_finder)).c_str(),
                ("BASE n=" + std::to_string(t.n_baseline)).c_str(), "p");
  os << buf;
  auto line = [&](const char* name, const std::optional<AdjustedMeans>& m) {
    if (!m) {
      std::snprintf(buf, sizeof(buf), "%-20s %12s %12s %8s\n", name, "-", "-", "-");
    } else {
      std::snprintf(buf, sizeof(buf), "%-20s %12.2f %12.2f %8s\n", name, m->mean_group,
                    m->mean_reference, PValueText(m->p_value).c_str());
    }
    os << buf;
  };
  line("Critical violations", t.critical);
  line("Major violations", t.major);
  if (!t.note.empty()) os << "note: " << t.note << "\n";
  return os.str();
}

std::string RiskTableCsv(const RiskTable& t) {
  std::ostringstream os;
  os << "row,finder,baseline\n";
  os << "total," << t.total[0] << ',' << t.total[1] << '\n';
  for (std::size_t i = 0; i < t.cities.size(); ++i) {
    os << "city:" << t.cities[i] << ',' << t.per_city[i][0] << ',' << t.per_city[i][1] << '\n';
  }
  os << "complaint_driven,," << t.complaint << '\n';
  os << "routine,," << t.routine << '\n';
  for (std::size_t r = 0; r < kNumRiskLevels; ++r) {
    os << "risk:" << RiskLevelName(static_cast<RiskLevel>(r)) << ',' << t.risk[r][0] << ','
       << t.risk[r][1] << '\n';
  }
  if (t.chi_square) {
    os << "chi2_statistic," << Num(t.chi_square->statistic) << ",\n";
    os << "chi2_dof," << t.chi_square->dof << ",\n";
    os << "chi2_p," << Num(t.chi_square->p_value) << ",\n";
  }
  return os.str();
}

std::string PrecisionTableCsv(const PrecisionTable& t) {
  std::ostringstream os;
  os << "comparison,stratum,finder_n,finder_unsafe,finder_pct,comparison_n,"
        "comparison_unsafe,comparison_pct,odds_ratio,ci_low,ci_high,p_value\n";
  for (const auto& block : t.blocks) {
    for (const auto& row : block.rows) {
      os << block.comparison << ',' << row.stratum << ',' << row.finder.n << ','
         << row.finder.unsafe << ',' << Num(row.finder.percent()) << ',' << row.comparison.n
         << ',' << row.comparison.unsafe << ',' << Num(row.comparison.percent()) << ',';
      if (row.fit) {
        os << Num(row.fit->odds_ratio) << ',' << Num(row.fit->ci_low) << ','
           << Num(row.fit->ci_high) << ',' << Num(row.fit->p_value);
      } else {
        os << ",,,";
      }
      os << '\n';
    }
  }
  return os.str();
}

std::string ViolationTableCsv(const ViolationTable& t) {
  std::ostringstream os;
  os << "violation,finder_adjusted_mean,baseline_adjusted_mean,p_value,n_finder,n_baseline\n";
  auto line = [&](const char* name, const std::optional<AdjustedMeans>& m) {
    os << name << ',';
    if (m) {
      os << Num(m->mean_group) << ',' << Num(m->mean_reference) << ',' << Num(m->p_value);
    } else {
      os << ",,";
    }
    os << ',' << t.n_finder << ',' << t.n_baseline << '\n';
  };
  line("critical", t.critical);
  line("major", t.major);
  return os.str();
}

}  // namespace foodsurv::stats
