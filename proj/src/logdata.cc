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

#include "foodsurv/logdata.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "json.hpp"

namespace foodsurv {
namespace {

using Json = nlohmann::ordered_json;

std::string Lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string Where(std::string_view source, std::size_t line) {
  return std::string(source) + ":" + std::to_string(line) + ": ";
}

std::vector<std::string_view> SplitCsv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::int64_t ParseInt(std::string_view s, std::string_view field) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw DataError("field " + std::string(field) + " is not an integer: '" +
                    std::string(s) + "'");
  }
  return v;
}

// Reads a CSV with an exact header; calls `row` for each non-empty data line.
template <typename F>
void ReadCsv(std::istream& in, std::string_view source, std::string_view header,
             std::size_t columns, F&& row) {
  std::string line;
  std::size_t lineno = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != header) {
        throw DataError(Where(source, lineno) + "expected header '" +
                        std::string(header) + "'");
      }
      saw_header = true;
      continue;
    }
    auto fields = SplitCsv(line);
    if (fields.size() != columns) {
      throw DataError(Where(source, lineno) + "expected " +
                      std::to_string(columns) + " fields, got " +
                      std::to_string(fields.size()));
    }
    try {
      row(fields);
    } catch (const DataError& e) {
      throw DataError(Where(source, lineno) + e.what());
    }
  }
}

QueryEvent QueryFromJson(const Json& j) {
  QueryEvent q;
  q.user_id = UserId::FromHex(j.at("user_id").get<std::string>());
  q.ts = j.at("ts").get<Timestamp>();
  q.text = j.at("text").get<std::string>();
  for (const auto& r : j.at("results")) {
    ResultPage p;
    p.url = r.at("url").get<std::string>();
    p.title = r.at("title").get<std::string>();
    p.snippet = r.at("snippet").get<std::string>();
    for (const auto& tag : r.at("concept_tags")) {
      p.concept_tags.insert(tag.get<std::string>());
    }
    p.clicked = r.at("clicked").get<bool>();
    p.dwell_s = r.at("dwell_s").get<double>();
    q.results.push_back(std::move(p));
  }
  return q;
}

Json QueryToJson(const QueryEvent& q) {
  Json results = Json::array();
  for (const auto& p : q.results) {
    Json tags = Json::array();
    for (const auto& t : p.concept_tags) tags.push_back(t);
    results.push_back(Json{{"url", p.url},
                           {"title", p.title},
                           {"snippet", p.snippet},
                           {"concept_tags", std::move(tags)},
                           {"clicked", p.clicked},
                           {"dwell_s", p.dwell_s}});
  }
  return Json{{"user_id", q.user_id.ToHex()},
              {"ts", q.ts},
              {"text", q.text},
              {"results", std::move(results)}};
}

std::ifstream OpenInput(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open " + p.string());
  return in;
}

}  // namespace

std::string_view RiskLevelName(RiskLevel r) {
  switch (r) {
    case RiskLevel::kHigh: return "high";
    case RiskLevel::kMedium: return "medium";
    case RiskLevel::kLow: return "low";
  }
  return "?";
}

RiskLevel ParseRiskLevel(std::string_view s) {
  auto l = Lower(s);
  if (l == "high") return RiskLevel::kHigh;
  if (l == "medium") return RiskLevel::kMedium;
  if (l == "low") return RiskLevel::kLow;
  throw DataError("unknown risk_level '" + std::string(s) + "'");
}

std::string_view TriggerName(Trigger t) {
  switch (t) {
    case Trigger::kFinder: return "FINDER";
    case Trigger::kRoutine: return "ROUTINE";
    case Trigger::kComplaint: return "COMPLAINT";
  }
  return "?";
}

Trigger ParseTrigger(std::string_view s) {
  auto l = Lower(s);
  if (l == "finder") return Trigger::kFinder;
  if (l == "routine") return Trigger::kRoutine;
  if (l == "complaint") return Trigger::kComplaint;
  throw DataError("unknown trigger '" + std::string(s) + "'");
}

std::string_view OutcomeName(Outcome o) {
  return o == Outcome::kUnsafe ? "Unsafe" : "Safe";
}

Outcome ParseOutcome(std::string_view s) {
  auto l = Lower(s);
  if (l == "safe") return Outcome::kSafe;
  if (l == "unsafe") return Outcome::kUnsafe;
  throw DataError("unknown outcome '" + std::string(s) + "'");
}

DatasetPaths DatasetPaths::InDirectory(const std::filesystem::path& dir) {
  return {dir / "queries.jsonl", dir / "visits.csv", dir / "restaurants.csv",
          dir / "inspections.csv"};
}

std::vector<QueryEvent> ParseQueryLog(std::istream& in, std::string_view source) {
  std::vector<QueryEvent> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      out.push_back(QueryFromJson(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw DataError(Where(source, lineno) + e.what());
    } catch (const DataError& e) {
      throw DataError(Where(source, lineno) + e.what());
    }
  }
  return out;
}

std::vector<VisitEvent> ParseVisitLog(std::istream& in, std::string_view source) {
  std::vector<VisitEvent> out;
  ReadCsv(in, source, "user_id,restaurant_id,entry_ts,exit_ts", 4,
          [&](const std::vector<std::string_view>& f) {
            VisitEvent v;
            v.user_id = UserId::FromHex(f[0]);
            if (f[1].empty()) throw DataError("empty restaurant_id");
            v.restaurant_id = std::string(f[1]);
            v.entry_ts = ParseInt(f[2], "entry_ts");
            v.exit_ts = ParseInt(f[3], "exit_ts");
            out.push_back(std::move(v));
          });
  return out;
}

std::vector<RestaurantRecord> ParseRegistry(std::istream& in,
                                            std::string_view source) {
  std::vector<RestaurantRecord> out;
  std::unordered_set<std::string> seen;
  ReadCsv(in, source, "restaurant_id,city,risk_level", 3,
          [&](const std::vector<std::string_view>& f) {
            RestaurantRecord r;
            if (f[0].empty()) throw DataError("empty restaurant_id");
            r.restaurant_id = std::string(f[0]);
            if (!seen.insert(r.restaurant_id).second) {
              throw DataError("duplicate restaurant_id '" + r.restaurant_id + "'");
            }
            r.city = std::string(f[1]);
            r.risk_level = ParseRiskLevel(f[2]);
            out.push_back(std::move(r));
          });
  return out;
}

std::vector<InspectionRecord> ParseInspectionLog(std::istream& in,
                                                 std::string_view source) {
  std::vector<InspectionRecord> out;
  ReadCsv(in, source,
          "restaurant_id,date,trigger,outcome,critical_count,major_count", 6,
          [&](const std::vector<std::string_view>& f) {
            InspectionRecord r;
            r.restaurant_id = std::string(f[0]);
            r.date = ParseDate(f[1]);
            r.trigger = ParseTrigger(f[2]);
            r.outcome = ParseOutcome(f[3]);
            r.critical_count = ParseInt(f[4], "critical_count");
            r.major_count = ParseInt(f[5], "major_count");
            out.push_back(std::move(r));
          });
  return out;
}

void SortStreams(Dataset& d) {
  std::stable_sort(d.queries.begin(), d.queries.end(),
                   [](const auto& a, const auto& b) { return a.ts < b.ts; });
  std::stable_sort(d.visits.begin(), d.visits.end(),
                   [](const auto& a, const auto& b) { return a.exit_ts < b.exit_ts; });
  std::stable_sort(d.inspections.begin(), d.inspections.end(),
                   [](const auto& a, const auto& b) { return a.date < b.date; });
}

Dataset LoadDataset(const DatasetPaths& paths) {
  Dataset d;
  {
    auto in = OpenInput(paths.queries);
    d.queries = ParseQueryLog(in, paths.queries.filename().string());
  }
  {
    auto in = OpenInput(paths.visits);
    d.visits = ParseVisitLog(in, paths.visits.filename().string());
  }
  {
    auto in = OpenInput(paths.restaurants);
    d.restaurants = ParseRegistry(in, paths.restaurants.filename().string());
  }
  {
    auto in = OpenInput(paths.inspections);
    d.inspections = ParseInspectionLog(in, paths.inspections.filename().string());
  }
  SortStreams(d);

  std::unordered_set<std::string> known;
  for (const auto& r : d.restaurants) known.insert(r.restaurant_id);
  std::set<std::string> dangling;
  for (const auto& v : d.visits) {
    if (!known.contains(v.restaurant_id)) dangling.insert(v.restaurant_id);
  }
  for (const auto& i : d.inspections) {
    if (!known.contains(i.restaurant_id)) dangling.insert(i.restaurant_id);
  }
  if (!dangling.empty()) {
    std::string msg = "unknown restaurant_id(s) not in registry:";
    for (const auto& id : dangling) msg += " " + id;
    throw DataError(msg);
  }
  return d;
}

void WriteQueryLog(std::ostream& out, const std::vector<QueryEvent>& queries) {
  for (const auto& q : queries) out << QueryToJson(q).dump() << '\n';
}

void WriteVisitLog(std::ostream& out, const std::vector<VisitEvent>& visits) {
  out << "user_id,restaurant_id,entry_ts,exit_ts\n";
  for (const auto& v : visits) {
    out << v.user_id.ToHex() << ',' << v.restaurant_id << ',' << v.entry_ts << ','
        << v.exit_ts << '\n';
  }
}

void WriteRegistry(std::ostream& out,
                   const std::vector<RestaurantRecord>& restaurants) {
  out << "restaurant_id,city,risk_level\n";
  for (const auto& r : restaurants) {
    out << r.restaurant_id << ',' << r.city << ',' << RiskLevelName(r.risk_level)
        << '\n';
  }
}

void WriteInspectionLog(std::ostream& out,
                        const std::vector<InspectionRecord>& inspections) {
  out << "restaurant_id,date,trigger,outcome,critical_count,major_count\n";
  for (const auto& i : inspections) {
    out << i.restaurant_id << ',' << FormatDate(i.date) << ','
        << TriggerName(i.trigger) << ',' << OutcomeName(i.outcome) << ','
        << i.critical_count << ',' << i.major_count << '\n';
  }
}

void SaveDataset(const Dataset& d, const DatasetPaths& paths) {
  auto open = [](const std::filesystem::path& p) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + p.string());
    return out;
  };
  {
    auto out = open(paths.queries);
    WriteQueryLog(out, d.queries);
  }
  {
    auto out = open(paths.visits);
    WriteVisitLog(out, d.visits);
  }
  {
    auto out = open(paths.restaurants);
    WriteRegistry(out, d.restaurants);
  }
  {
    auto out = open(paths.inspections);
    WriteInspectionLog(out, d.inspections);
  }
}

ValidationReport ValidateDataset(const Dataset& d) {
  ValidationReport rep;
  auto add = [&](std::string stream, std::size_t i, std::string what) {
    rep.violations.push_back({std::move(stream), i, std::move(what)});
  };

  rep.queries.count = d.queries.size();
  for (std::size_t i = 0; i < d.queries.size(); ++i) {
    const auto& q = d.queries[i];
    if (i == 0 || q.ts < rep.queries.min_ts) rep.queries.min_ts = q.ts;
    if (i == 0 || q.ts > rep.queries.max_ts) rep.queries.max_ts = q.ts;
    if (q.ts < 0) add("queries", i, "negative ts");
    if (q.results.size() > kMaxResultsPerQuery) add("queries", i, "more than 10 results");
    for (std::size_t r = 0; r < q.results.size(); ++r) {
      const auto& p = q.results[r];
      if (p.dwell_s < 0) {
        add("queries", i, "result " + std::to_string(r) + ": negative dwell_s");
      } else if (!p.clicked && p.dwell_s != 0.0) {
        add("queries", i, "result " + std::to_string(r) + ": dwell on unclicked result");
      }
    }
  }

  rep.visits.count = d.visits.size();
  for (std::size_t i = 0; i < d.visits.size(); ++i) {
    const auto& v = d.visits[i];
    if (i == 0 || v.entry_ts < rep.visits.min_ts) rep.visits.min_ts = v.entry_ts;
    if (i == 0 || v.exit_ts > rep.visits.max_ts) rep.visits.max_ts = v.exit_ts;
    if (v.entry_ts > v.exit_ts) add("visits", i, "entry_ts > exit_ts");
    if (v.entry_ts < 0) add("visits", i, "negative entry_ts");
  }

  rep.restaurants.count = d.restaurants.size();
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < d.restaurants.size(); ++i) {
    if (!ids.insert(d.restaurants[i].restaurant_id).second) {
      add("restaurants", i, "duplicate restaurant_id");
    }
  }

  rep.inspections.count = d.inspections.size();
  for (std::size_t i = 0; i < d.inspections.size(); ++i) {
    const auto& r = d.inspections[i];
    if (i == 0 || r.date < rep.inspections.min_ts) rep.inspections.min_ts = r.date;
    if (i == 0 || r.date > rep.inspections.max_ts) rep.inspections.max_ts = r.date;
    if (r.critical_count < 0) add("inspections", i, "negative critical_count");
    if (r.major_count < 0) add("inspections", i, "negative major_count");
  }
  return rep;
}

void RequireValid(const ValidationReport& report) {
  if (report.ok()) return;
  std::string msg = std::to_string(report.violations.size()) +
                    " dataset invariant violation(s); first: ";
  const auto& v = report.violations.front();
  msg += v.stream + "[" + std::to_string(v.index) + "]: " + v.what;
  throw DataError(msg);
}

}  // namespace foodsurv
