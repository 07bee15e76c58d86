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

#include "foodsurv/locmodel.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "planted.h"
#include "test_util.h"

namespace foodsurv::locmodel {
namespace {

using testing::TempDir;
using testing::User;

constexpr Timestamp kT = 1'500'000'000;

VisitEvent Visit(std::uint64_t user, std::string r, Timestamp exit) {
  return {User(user), std::move(r), exit - 1800, exit};
}

ScoredQuery Query(std::uint64_t user, Timestamp ts, double score = 0.9) {
  return {User(user), ts, score};
}

// Smaller root of n (p - q)^2 = z^2 q (1 - q) in [0, p], by bisection.
double WilsonOracle(double k, double n, double z = kWilsonZ) {
  double p = k / n;
  auto f = [&](double q) { return n * (p - q) * (p - q) - z * z * q * (1 - q); };
  double lo = 0.0, hi = p;
  if (f(lo) <= 0) return 0.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (f(mid) > 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Linking.

TEST_CASE("window upper bound is inclusive at 72 h") {
  std::vector<VisitEvent> v = {Visit(1, "r1", kT)};
  std::vector<ScoredQuery> q = {Query(1, kT + kIncubationWindowS)};
  auto links = LinkExposures(v, q);
  REQUIRE(links.size() == 1);
  CHECK(links[0].restaurant_id == "r1");
  CHECK(links[0].first_positive_query_ts - links[0].visit_exit_ts == 259200);
}

TEST_CASE("query one second past 72 h is not linked") {
  std::vector<VisitEvent> v = {Visit(1, "r1", kT)};
  std::vector<ScoredQuery> q = {Query(1, kT + kIncubationWindowS + 1)};
  CHECK(LinkExposures(v, q).empty());
}

TEST_CASE("query at the exit instant is not linked") {
  std::vector<VisitEvent> v = {Visit(1, "r1", kT)};
  std::vector<ScoredQuery> q = {Query(1, kT)};
  CHECK(LinkExposures(v, q).empty());
}

TEST_CASE("A then B gives B rank one and A rank two") {
  std::vector<VisitEvent> v = {Visit(1, "A", kT), Visit(1, "B", kT + 3 * 3600)};
  std::vector<ScoredQuery> q = {Query(1, kT + 3 * 3600 + 2 * kSecondsPerDay)};
  auto links = LinkExposures(v, q);
  REQUIRE(links.size() == 2);
  CHECK(links[0].restaurant_id == "B");
  CHECK(links[0].recency_rank == 1);
  CHECK(links[1].restaurant_id == "A");
  CHECK(links[1].recency_rank == 2);
}

TEST_CASE("first positive query anchors; later positives add nothing") {
  std::vector<VisitEvent> v = {Visit(1, "A", kT), Visit(1, "B", kT + 5 * kSecondsPerDay)};
  std::vector<ScoredQuery> q = {Query(1, kT + 3600), Query(1, kT + 5 * kSecondsPerDay + 3600),
                                Query(1, kT + 100, 0.69)};
  auto links = LinkExposures(v, q);
  REQUIRE(links.size() == 1);
  CHECK(links[0].restaurant_id == "A");
  CHECK(links[0].first_positive_query_ts == kT + 3600);
}

TEST_CASE("threshold is inclusive at p*") {
  std::vector<VisitEvent> v = {Visit(1, "A", kT)};
  CHECK(LinkExposures(v, std::vector<ScoredQuery>{Query(1, kT + 10, 0.7)}).size() == 1);
  CHECK(LinkExposures(v, std::vector<ScoredQuery>{Query(1, kT + 10, 0.6999)}).empty());
}

TEST_CASE("repeated visits to one restaurant keep the earliest qualifying visit") {
  std::vector<VisitEvent> v = {Visit(1, "A", kT), Visit(1, "B", kT + 3600),
                               Visit(1, "A", kT + 7200)};
  auto links = LinkExposures(v, std::vector<ScoredQuery>{Query(1, kT + kSecondsPerDay)});
  REQUIRE(links.size() == 2);
  CHECK(links[0].restaurant_id == "A");
  CHECK(links[0].recency_rank == 1);
  CHECK(links[0].visit_exit_ts == kT);
  CHECK(links[1].restaurant_id == "B");
}

TEST_CASE("every link satisfies the window invariant on random streams") {
  std::mt19937_64 gen(11);
  std::vector<VisitEvent> v;
  std::vector<ScoredQuery> q;
  for (int i = 0; i < 5000; ++i) {
    v.push_back(Visit(gen() % 300, "r" + std::to_string(gen() % 40),
                      kT + static_cast<Timestamp>(gen() % (20 * kSecondsPerDay))));
  }
  for (int i = 0; i < 2000; ++i) {
    q.push_back(Query(gen() % 300, kT + static_cast<Timestamp>(gen() % (20 * kSecondsPerDay)),
                      static_cast<double>(gen() % 1000) / 1000.0));
  }
  auto links = LinkExposures(v, q);
  REQUIRE_FALSE(links.empty());
  std::set<std::pair<UserId, std::string>> pairs;
  for (const auto& l : links) {
    Timestamp gap = l.first_positive_query_ts - l.visit_exit_ts;
    CHECK((gap > 0 && gap <= kIncubationWindowS));
    CHECK(l.recency_rank >= 1);
    CHECK(pairs.insert({l.user_id, l.restaurant_id}).second);
  }
}

// ---------------------------------------------------------------------------
// Aggregation.

TEST_CASE("wilson bound: zero affected gives zero signal") {
  CHECK(WilsonLowerBound(0, 100) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(WilsonLowerBound(0, 0) == 0.0);
}

TEST_CASE("wilson bound matches an independent root-finding evaluation") {
  CHECK(WilsonLowerBound(5, 50) == doctest::Approx(WilsonOracle(5, 50)).epsilon(1e-12));
  std::mt19937_64 gen(2);
  for (int i = 0; i < 500; ++i) {
    double n = 1 + static_cast<double>(gen() % 2000);
    double k = static_cast<double>(gen() % static_cast<std::uint64_t>(n + 1));
    double lb = WilsonLowerBound(k, n);
    CHECK(lb == doctest::Approx(WilsonOracle(k, n)).epsilon(1e-9));
    CHECK(lb <= k / n + 1e-15);
    CHECK(lb >= 0.0);
  }
}

TEST_CASE("fifty visitors with five affected") {
  std::vector<VisitEvent> v;
  std::vector<ExposureLink> links;
  for (std::uint64_t u = 0; u < 50; ++u) {
    v.push_back(Visit(u, "r", kT));
    if (u < 5) links.push_back({User(u), "r", kT, kT + 10, 1});
  }
  auto agg = AggregateRestaurants(v, links, {kT - 10, kT + 10});
  REQUIRE(agg.count("r") == 1);
  CHECK(agg["r"].visitors == 50);
  CHECK(agg["r"].affected == 5);
  CHECK(agg["r"].proportion == doctest::Approx(0.1));
  CHECK(agg["r"].signal == doctest::Approx(WilsonOracle(5, 50)).epsilon(1e-12));
}

struct RandomStreams {
  std::vector<VisitEvent> visits;
  std::vector<ScoredQuery> queries;
};

RandomStreams RandomCity(std::uint64_t seed, int users, int restaurants) {
  std::mt19937_64 gen(seed);
  RandomStreams s;
  for (int u = 0; u < users; ++u) {
    int n = 1 + static_cast<int>(gen() % 6);
    for (int j = 0; j < n; ++j) {
      s.visits.push_back(Visit(static_cast<std::uint64_t>(u),
                               "r" + std::to_string(gen() % static_cast<std::uint64_t>(restaurants)),
                               kT + static_cast<Timestamp>(gen() % (14 * kSecondsPerDay))));
    }
    if (gen() % 4 == 0) {
      s.queries.push_back(Query(static_cast<std::uint64_t>(u),
                                kT + static_cast<Timestamp>(gen() % (14 * kSecondsPerDay))));
    }
  }
  std::stable_sort(s.visits.begin(), s.visits.end(),
                   [](const auto& a, const auto& b) { return a.entry_ts < b.entry_ts; });
  std::stable_sort(s.queries.begin(), s.queries.end(),
                   [](const auto& a, const auto& b) { return a.ts < b.ts; });
  return s;
}

TEST_CASE("counts equal set arithmetic over the raw streams for 1000 users") {
  auto s = RandomCity(4, 1000, 60);
  Period period{kT + 2 * kSecondsPerDay, kT + 10 * kSecondsPerDay};
  auto links = LinkExposures(s.visits, s.queries);
  auto agg = AggregateRestaurants(s.visits, links, period);

  // Oracle straight from the raw streams: first positive per user, then sets.
  std::map<UserId, Timestamp> first;
  for (const auto& q : s.queries) {
    if (q.score >= 0.7 && (!first.count(q.user_id) || q.ts < first[q.user_id])) {
      first[q.user_id] = q.ts;
    }
  }
  std::map<std::string, std::set<UserId>> visitors;
  std::map<std::string, std::set<UserId>> affected;
  std::map<std::pair<UserId, std::string>, Timestamp> earliest;
  for (const auto& v : s.visits) {
    if (period.Contains(v.exit_ts)) visitors[v.restaurant_id].insert(v.user_id);
    auto it = first.find(v.user_id);
    if (it == first.end()) continue;
    Timestamp gap = it->second - v.exit_ts;
    if (gap <= 0 || gap > kIncubationWindowS) continue;
    auto key = std::make_pair(v.user_id, v.restaurant_id);
    if (!earliest.count(key) || v.exit_ts < earliest[key]) earliest[key] = v.exit_ts;
  }
  for (const auto& [key, exit] : earliest) {
    if (period.Contains(exit) && visitors[key.second].count(key.first)) {
      affected[key.second].insert(key.first);
    }
  }

  std::size_t expected_restaurants = 0;
  for (const auto& [r, users] : visitors) expected_restaurants += !users.empty();
  CHECK(agg.size() == expected_restaurants);
  for (const auto& [r, a] : agg) {
    CHECK(a.visitors == static_cast<std::int64_t>(visitors[r].size()));
    CHECK(a.affected == static_cast<std::int64_t>(affected[r].size()));
    CHECK(a.affected <= a.visitors);
    CHECK(a.signal <= a.proportion);
    CHECK((a.proportion >= 0.0 && a.proportion <= 1.0));
  }
}

TEST_CASE("removing a user never increases any count") {
  auto s = RandomCity(8, 400, 30);
  Period period{kT, kT + 14 * kSecondsPerDay};
  auto full = AggregateRestaurants(s.visits, LinkExposures(s.visits, s.queries), period);
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 20; ++trial) {
    UserId drop = User(gen() % 400);
    RandomStreams t;
    for (const auto& v : s.visits) {
      if (!(v.user_id == drop)) t.visits.push_back(v);
    }
    for (const auto& q : s.queries) {
      if (!(q.user_id == drop)) t.queries.push_back(q);
    }
    auto less = AggregateRestaurants(t.visits, LinkExposures(t.visits, t.queries), period);
    for (const auto& [r, a] : less) {
      REQUIRE(full.count(r));
      CHECK(a.visitors <= full[r].visitors);
      CHECK(a.affected <= full[r].affected);
    }
  }
}

TEST_CASE("aggregation over user shards merges by set union") {
  auto s = RandomCity(12, 600, 25);
  Period period{kT, kT + 14 * kSecondsPerDay};
  auto whole = AggregateRestaurants(s.visits, LinkExposures(s.visits, s.queries), period);

  // Shard by user, collect distinct sets per shard, union them.
  std::map<std::string, std::set<UserId>> visitors, affected;
  for (int shard = 0; shard < 3; ++shard) {
    RandomStreams t;
    auto in_shard = [&](const UserId& u) { return u.bytes[15] % 3 == shard; };
    for (const auto& v : s.visits) {
      if (in_shard(v.user_id)) t.visits.push_back(v);
    }
    for (const auto& q : s.queries) {
      if (in_shard(q.user_id)) t.queries.push_back(q);
    }
    auto links = LinkExposures(t.visits, t.queries);
    auto part = AggregateRestaurants(t.visits, links, period);
    for (const auto& v : t.visits) {
      if (period.Contains(v.exit_ts)) visitors[v.restaurant_id].insert(v.user_id);
    }
    for (const auto& l : links) {
      if (period.Contains(l.visit_exit_ts)) affected[l.restaurant_id].insert(l.user_id);
    }
    for (const auto& [r, a] : part) {
      CHECK(a.visitors <= whole[r].visitors);
    }
  }
  for (const auto& [r, a] : whole) {
    CHECK(a.visitors == static_cast<std::int64_t>(visitors[r].size()));
    CHECK(a.affected == static_cast<std::int64_t>(affected[r].size()));
  }
}

// ---------------------------------------------------------------------------
// Ranking.

TEST_CASE("all signals below the cutoff give an empty list") {
  std::vector<RankCandidate> c = {{"a", 100, 1, 0.01, 0.001}, {"b", 50, 2, 0.04, 0.01}};
  CHECK(RankRestaurants(c, 20, 0.5).empty());
}

TEST_CASE("equal signals are ordered by visitors then id") {
  std::vector<RankCandidate> c = {
      {"c", 40, 4, 0.1, 0.05}, {"a", 40, 4, 0.1, 0.05}, {"b", 90, 9, 0.1, 0.05}};
  auto r = RankRestaurants(c, 20, 0.0);
  REQUIRE(r.size() == 3);
  CHECK(r[0].restaurant_id == "b");
  CHECK(r[1].restaurant_id == "a");
  CHECK(r[2].restaurant_id == "c");
}

TEST_CASE("ranking equals brute-force filter and sort on 500 aggregates") {
  std::mt19937_64 gen(21);
  std::vector<RankCandidate> c;
  for (int i = 0; i < 500; ++i) {
    double visitors = static_cast<double>(gen() % 60);
    double signal = static_cast<double>(gen() % 20) / 100.0;  // many ties
    c.push_back({"r" + std::to_string(i), visitors, 0, 0, signal});
  }
  auto got = RankRestaurants(c, 20, 0.05);

  std::vector<RankCandidate> want;
  for (const auto& x : c) {
    if (x.visitors >= 20 && x.signal >= 0.05) want.push_back(x);
  }
  // Selection sort by the composite key.
  auto before = [](const RankCandidate& a, const RankCandidate& b) {
    if (a.signal != b.signal) return a.signal > b.signal;
    if (a.visitors != b.visitors) return a.visitors > b.visitors;
    return a.restaurant_id < b.restaurant_id;
  };
  for (std::size_t i = 0; i < want.size(); ++i) {
    std::size_t best = i;
    for (std::size_t j = i + 1; j < want.size(); ++j) {
      if (before(want[j], want[best])) best = j;
    }
    std::swap(want[i], want[best]);
  }
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].restaurant_id == want[i].restaurant_id);
}

// ---------------------------------------------------------------------------
// Attribution.

AggregateMap Signals(std::map<std::string, double> s) {
  AggregateMap m;
  for (const auto& [id, sig] : s) m[id] = {id, 100, 10, 0.1, sig};
  return m;
}

TEST_CASE("single linked restaurant is the source") {
  std::vector<ExposureLink> links;
  for (std::uint64_t u = 0; u < 10; ++u) {
    links.push_back({User(u), "r" + std::to_string(u % 3), kT, kT + 5, 1});
  }
  auto a = AttributeSources(links, Signals({{"r0", 0.1}, {"r1", 0.2}, {"r2", 0.3}}));
  CHECK(a.sources.size() == 10);
  CHECK(a.histogram == AttributionHistogram{1.0, 0.0, 0.0, 0.0});
}

TEST_CASE("argmax signal wins over recency") {
  std::vector<ExposureLink> links = {{User(1), "B", kT + 10, kT + 100, 1},
                                     {User(1), "A", kT, kT + 100, 2}};
  auto a = AttributeSources(links, Signals({{"A", 0.30}, {"B", 0.05}}));
  REQUIRE(a.sources.size() == 1);
  CHECK(a.sources[0].restaurant_id == "A");
  CHECK(a.sources[0].recency_rank == 2);
  CHECK(a.histogram == AttributionHistogram{0.0, 1.0, 0.0, 0.0});
}

TEST_CASE("signal ties go to the most recent restaurant") {
  std::vector<ExposureLink> links = {{User(1), "A", kT, kT + 100, 3},
                                     {User(1), "B", kT, kT + 100, 2},
                                     {User(1), "C", kT, kT + 100, 1}};
  auto a = AttributeSources(links, Signals({{"A", 0.2}, {"B", 0.2}, {"C", 0.2}}));
  CHECK(a.sources[0].restaurant_id == "C");
}

TEST_CASE("missing aggregate for a linked restaurant is an error") {
  std::vector<ExposureLink> links = {{User(1), "zz", kT, kT + 100, 1}};
  CHECK_THROWS_AS(AttributeSources(links, Signals({{"A", 0.2}})), DataError);
}

TEST_CASE("attribution is invariant under monotone rescaling of signals") {
  std::mt19937_64 gen(31);
  std::vector<ExposureLink> links;
  std::map<std::string, double> sig;
  for (int r = 0; r < 40; ++r) sig["r" + std::to_string(r)] = static_cast<double>(gen() % 1000) / 1000.0;
  for (std::uint64_t u = 0; u < 300; ++u) {
    int n = 1 + static_cast<int>(gen() % 6);
    std::set<std::string> used;
    for (int k = 1; k <= n; ++k) {
      std::string r = "r" + std::to_string(gen() % 40);
      if (!used.insert(r).second) continue;
      links.push_back({User(u), r, kT, kT + 100, static_cast<int>(used.size())});
    }
  }
  auto base = AttributeSources(links, Signals(sig));
  for (auto f : {+[](double s) { return std::exp(5 * s); }, +[](double s) { return s * s * s - 7; },
                 +[](double s) { return std::log1p(s) * 0.01; }}) {
    std::map<std::string, double> scaled;
    for (const auto& [r, s] : sig) scaled[r] = f(s);
    auto other = AttributeSources(links, Signals(scaled));
    REQUIRE(other.sources.size() == base.sources.size());
    for (std::size_t i = 0; i < base.sources.size(); ++i) {
      CHECK(other.sources[i].restaurant_id == base.sources[i].restaurant_id);
    }
    CHECK(other.histogram == base.histogram);
  }
  double sum = 0;
  for (double x : base.histogram) sum += x;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("no affected users gives an all-zero histogram") {
  auto a = AttributeSources({}, {});
  CHECK(a.sources.empty());
  CHECK(a.histogram == AttributionHistogram{});
}

TEST_CASE("planted recency distribution is recovered") {
  auto p = testing::PlantAttribution({0.62, 0.194, 0.115, 0.072}, 10000, 5);
  CHECK(p.affected_users == 10000);
  const double want[4] = {0.62, 0.194, 0.115, 0.072};
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::abs(p.attribution.histogram[i] - want[i]) <= 0.03);
    CHECK(std::abs(p.attribution.histogram[i] - p.planted_fraction[i]) <= 0.01);
  }
}

TEST_CASE("histogram csv round trip") {
  TempDir dir("hist");
  AttributionHistogram h = {0.6011, 0.2770, 0.0876, 1.0 / 3.0};
  WriteHistogramCsv(h, dir.path() / "fig1.csv");
  CHECK(testing::Slurp(dir.path() / "fig1.csv").rfind("rank,fraction\n1,", 0) == 0);
  CHECK(testing::Slurp(dir.path() / "fig1.csv").find("\n4+,") != std::string::npos);
  CHECK(ReadHistogramCsv(dir.path() / "fig1.csv") == h);
}

}  // namespace
}  // namespace foodsurv::locmodel
