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
#include <cstdio>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

namespace foodsurv::locmodel {
namespace {

struct Qualifying {
  Timestamp earliest_exit = 0;
  Timestamp latest_exit = 0;
};

}  // namespace

std::vector<ExposureLink> LinkExposures(std::span<const VisitEvent> visits,
                                        std::span<const ScoredQuery> queries,
                                        const LinkParams& params) {
  std::unordered_map<UserId, Timestamp, UserIdHash> anchor;
  for (const auto& q : queries) {
    if (q.score < params.threshold) continue;
    auto [it, inserted] = anchor.try_emplace(q.user_id, q.ts);
    if (!inserted && q.ts < it->second) it->second = q.ts;
  }
  if (anchor.empty()) return {};

  std::unordered_map<UserId, std::map<std::string, Qualifying>, UserIdHash> per_user;
  for (const auto& v : visits) {
    auto it = anchor.find(v.user_id);
    if (it == anchor.end()) continue;
    Timestamp gap = it->second - v.exit_ts;
    if (gap <= 0 || gap > params.window_s) continue;
    auto [q, inserted] = per_user[v.user_id].try_emplace(
        v.restaurant_id, Qualifying{v.exit_ts, v.exit_ts});
    if (!inserted) {
      q->second.earliest_exit = std::min(q->second.earliest_exit, v.exit_ts);
      q->second.latest_exit = std::max(q->second.latest_exit, v.exit_ts);
    }
  }

  std::vector<UserId> users;
  users.reserve(per_user.size());
  for (const auto& [u, _] : per_user) users.push_back(u);
  std::sort(users.begin(), users.end());

  std::vector<ExposureLink> links;
  for (const auto& u : users) {
    const auto& rs = per_user.at(u);
    std::vector<const std::pair<const std::string, Qualifying>*> order;
    for (const auto& entry : rs) order.push_back(&entry);
    std::stable_sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
      return a->second.latest_exit > b->second.latest_exit;
    });
    int rank = 0;
    for (const auto* entry : order) {
      links.push_back({u, entry->first, entry->second.earliest_exit, anchor.at(u),
                       ++rank});
    }
  }
  return links;
}

double WilsonLowerBound(double successes, double n, double z) {
  if (n <= 0) return 0.0;
  double p = std::clamp(successes / n, 0.0, 1.0);
  double z2 = z * z;
  double center = p + z2 / (2 * n);
  double radius = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n));
  double lb = (center - radius) / (1 + z2 / n);
  return std::clamp(lb, 0.0, p);
}

AggregateMap AggregateRestaurants(std::span<const VisitEvent> visits,
                                  std::span<const ExposureLink> links,
                                  const Period& period) {
  std::map<std::string, std::unordered_set<UserId, UserIdHash>> visitors, affected;
  for (const auto& v : visits) {
    if (period.Contains(v.exit_ts)) visitors[v.restaurant_id].insert(v.user_id);
  }
  for (const auto& l : links) {
    if (!period.Contains(l.visit_exit_ts)) continue;
    auto it = visitors.find(l.restaurant_id);
    if (it == visitors.end() || !it->second.contains(l.user_id)) continue;
    affected[l.restaurant_id].insert(l.user_id);
  }
  AggregateMap out;
  for (const auto& [id, users] : visitors) {
    RestaurantAggregate a;
    a.restaurant_id = id;
    a.visitors = static_cast<std::int64_t>(users.size());
    auto it = affected.find(id);
    a.affected = it == affected.end() ? 0 : static_cast<std::int64_t>(it->second.size());
    a.proportion = static_cast<double>(a.affected) / static_cast<double>(a.visitors);
    a.signal = WilsonLowerBound(static_cast<double>(a.affected),
                                static_cast<double>(a.visitors));
    out.emplace(id, std::move(a));
  }
  return out;
}

std::vector<RankCandidate> ToCandidates(const AggregateMap& aggregates) {
  std::vector<RankCandidate> out;
  out.reserve(aggregates.size());
  for (const auto& [id, a] : aggregates) {
    out.push_back({id, static_cast<double>(a.visitors), static_cast<double>(a.affected),
                   a.proportion, a.signal});
  }
  return out;
}

std::vector<RankCandidate> RankRestaurants(std::vector<RankCandidate> candidates,
                                           double min_visitors, double cutoff) {
  std::erase_if(candidates, [&](const RankCandidate& c) {
    return c.visitors < min_visitors || c.signal < cutoff;
  });
  std::sort(candidates.begin(), candidates.end(),
            [](const RankCandidate& a, const RankCandidate& b) {
              if (a.signal != b.signal) return a.signal > b.signal;
              if (a.visitors != b.visitors) return a.visitors > b.visitors;
              return a.restaurant_id < b.restaurant_id;
            });
  return candidates;
}

Attribution AttributeSources(std::span<const ExposureLink> links,
                             const AggregateMap& aggregates) {
  std::map<UserId, const ExposureLink*> best;
  std::map<UserId, double> best_signal;
  for (const auto& l : links) {
    auto agg = aggregates.find(l.restaurant_id);
    if (agg == aggregates.end()) {
      throw DataError("no aggregate for linked restaurant '" + l.restaurant_id + "'");
    }
    double s = agg->second.signal;
    auto it = best.find(l.user_id);
    if (it == best.end()) {
      best.emplace(l.user_id, &l);
      best_signal[l.user_id] = s;
      continue;
    }
    double cur = best_signal[l.user_id];
    if (s > cur || (s == cur && l.recency_rank < it->second->recency_rank)) {
      it->second = &l;
      best_signal[l.user_id] = s;
    }
  }

  Attribution out;
  std::array<double, 4> counts{};
  for (const auto& [u, l] : best) {
    out.sources.push_back({u, l->restaurant_id, l->recency_rank});
    counts[static_cast<std::size_t>(std::clamp(l->recency_rank, 1, 4) - 1)] += 1;
  }
  if (!out.sources.empty()) {
    for (std::size_t i = 0; i < 4; ++i) {
      out.histogram[i] = counts[i] / static_cast<double>(out.sources.size());
    }
  }
  return out;
}

void WriteHistogramCsv(const AttributionHistogram& h,
                       const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  static constexpr const char* kLabels[] = {"1", "2", "3", "4+"};
  out << "rank,fraction\n";
  char buf[64];
  for (std::size_t i = 0; i < 4; ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", h[i]);
    out << kLabels[i] << ',' << buf << '\n';
  }
}

AttributionHistogram ReadHistogramCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "rank,fraction") throw DataError(path.string() + ": bad header");
  AttributionHistogram h{};
  for (std::size_t i = 0; i < 4; ++i) {
    if (!std::getline(in, line)) throw DataError(path.string() + ": truncated");
    auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError(path.string() + ": bad row");
    h[i] = std::stod(line.substr(comma + 1));
  }
  return h;
}

}  // namespace foodsurv::locmodel
