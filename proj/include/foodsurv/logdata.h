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

// Data model and file ingestion for the four input streams: query log
// (JSONL), visit log, restaurant registry and inspection log (CSV).

#ifndef FOODSURV_LOGDATA_H_
#define FOODSURV_LOGDATA_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "foodsurv/common.h"

namespace foodsurv {

struct ResultPage {
  std::string url;
  std::string title;
  std::string snippet;
  std::set<std::string> concept_tags;
  bool clicked = false;
  double dwell_s = 0.0;  // must be 0 when !clicked

  friend bool operator==(const ResultPage&, const ResultPage&) = default;
};

inline constexpr std::size_t kMaxResultsPerQuery = 10;

struct QueryEvent {
  UserId user_id;
  Timestamp ts = 0;
  std::string text;
  std::vector<ResultPage> results;  // display order

  friend bool operator==(const QueryEvent&, const QueryEvent&) = default;
};

struct VisitEvent {
  UserId user_id;
  std::string restaurant_id;
  Timestamp entry_ts = 0;
  Timestamp exit_ts = 0;

  friend bool operator==(const VisitEvent&, const VisitEvent&) = default;
};

enum class RiskLevel { kHigh = 0, kMedium = 1, kLow = 2 };
inline constexpr int kNumRiskLevels = 3;

std::string_view RiskLevelName(RiskLevel r);  // "high", "medium", "low"
RiskLevel ParseRiskLevel(std::string_view s);  // case-insensitive

struct RestaurantRecord {
  std::string restaurant_id;
  std::string city;
  RiskLevel risk_level = RiskLevel::kHigh;

  friend bool operator==(const RestaurantRecord&, const RestaurantRecord&) =
      default;
};

enum class Trigger { kFinder = 0, kRoutine = 1, kComplaint = 2 };
enum class Outcome { kSafe = 0, kUnsafe = 1 };

std::string_view TriggerName(Trigger t);  // "FINDER", "ROUTINE", "COMPLAINT"
Trigger ParseTrigger(std::string_view s);
std::string_view OutcomeName(Outcome o);  // "Safe", "Unsafe"
Outcome ParseOutcome(std::string_view s);

struct InspectionRecord {
  std::string restaurant_id;
  std::int64_t date = 0;  // days since 1970-01-01; "YYYY-MM-DD" on disk
  Trigger trigger = Trigger::kRoutine;
  Outcome outcome = Outcome::kSafe;
  std::int64_t critical_count = 0;
  std::int64_t major_count = 0;

  friend bool operator==(const InspectionRecord&, const InspectionRecord&) =
      default;
};

// Queries sorted by ts, visits by exit_ts, inspections by date; all stable.
// Immutable once loaded.
struct Dataset {
  std::vector<QueryEvent> queries;
  std::vector<VisitEvent> visits;
  std::vector<RestaurantRecord> restaurants;
  std::vector<InspectionRecord> inspections;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct DatasetPaths {
  std::filesystem::path queries;
  std::filesystem::path visits;
  std::filesystem::path restaurants;
  std::filesystem::path inspections;

  // Standard file names inside one directory.
  static DatasetPaths InDirectory(const std::filesystem::path& dir);
};

// Parses all four streams, sorts them and checks that every visit and
// inspection references a registered restaurant. Throws DataError with the
// file name and 1-based line number on malformed input, or listing the
// dangling restaurant ids.
Dataset LoadDataset(const DatasetPaths& paths);

// Stream-level parsers; `source` is used in error messages.
std::vector<QueryEvent> ParseQueryLog(std::istream& in, std::string_view source);
std::vector<VisitEvent> ParseVisitLog(std::istream& in, std::string_view source);
std::vector<RestaurantRecord> ParseRegistry(std::istream& in,
                                            std::string_view source);
std::vector<InspectionRecord> ParseInspectionLog(std::istream& in,
                                                 std::string_view source);

void WriteQueryLog(std::ostream& out, const std::vector<QueryEvent>& queries);
void WriteVisitLog(std::ostream& out, const std::vector<VisitEvent>& visits);
void WriteRegistry(std::ostream& out,
                   const std::vector<RestaurantRecord>& restaurants);
void WriteInspectionLog(std::ostream& out,
                        const std::vector<InspectionRecord>& inspections);

// Writes the four files to `paths`, creating parent directories.
void SaveDataset(const Dataset& d, const DatasetPaths& paths);

// Stable in-place sort of every stream into load order.
void SortStreams(Dataset& d);

struct StreamSummary {
  std::size_t count = 0;
  Timestamp min_ts = 0;
  Timestamp max_ts = 0;
};

struct Violation {
  std::string stream;  // "queries", "visits", "restaurants", "inspections"
  std::size_t index = 0;
  std::string what;
};

struct ValidationReport {
  StreamSummary queries;
  StreamSummary visits;
  StreamSummary restaurants;  // timestamps unused
  StreamSummary inspections;  // min/max are day numbers
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
};

// Enumerates every invariant violation; never throws.
ValidationReport ValidateDataset(const Dataset& d);

// Throws DataError summarizing the report when it has violations.
void RequireValid(const ValidationReport& report);

}  // namespace foodsurv

#endif  // FOODSURV_LOGDATA_H_
