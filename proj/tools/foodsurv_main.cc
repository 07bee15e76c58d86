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

// foodsurv: command-line front end.
//
//   foodsurv run --seed 7 --paths.out runs/s7
//   foodsurv report runs/s7
//
// Every config key is also a flag (--sim.users 2000). Precedence, lowest
// first: built-in defaults, <paths.out>/config.txt (stage commands only),
// --config FILE, flags.
//
// Exit codes: 0 ok, 1 usage, 2 data/validation, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "foodsurv/pipeline.h"

namespace {

using foodsurv::pipeline::RunConfig;

struct Command {
  const char* name;
  const char* help;
  bool reads_run_config;  // stage commands pick up <paths.out>/config.txt
  std::function<void(const RunConfig&)> action;
};

}  // namespace

int main(int argc, char** argv) {
  namespace pl = foodsurv::pipeline;
  CLI::App app{"Foodborne-illness surveillance pipeline over search and location logs"};
  app.require_subcommand(1);

  const std::vector<Command> commands = {
      {"simulate", "generate a synthetic city and write the pseudonymized dataset", false,
       pl::StageSimulate},
      {"train-wsm", "weak-label the query log and train the query classifier", true,
       pl::StageTrainWsm},
      {"eval-wsm", "score a rater-labeled sample of held-out queries", true, pl::StageEvalWsm},
      {"rank", "link, aggregate, release and rank restaurants each day", true, pl::StageRank},
      {"inspect", "simulate inspections of the selected restaurants", true, pl::StageInspect},
      {"evaluate", "build the risk, precision and violation tables", true, pl::StageEvaluate},
      {"report", "print a human-readable summary of an artifact directory", true,
       [](const RunConfig& cfg) { std::cout << pl::StageReport(cfg); }},
      {"run", "all stages end to end", false, pl::RunPipeline},
  };

  std::string config_file;
  std::string report_dir;
  std::map<std::string, std::optional<std::string>> flags;
  for (const auto& k : pl::ConfigKeys()) flags[k.key];

  std::vector<CLI::App*> subs;
  for (const auto& cmd : commands) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--config", config_file, "flat key = value config file");
    for (const auto& k : pl::ConfigKeys()) sub->add_option("--" + k.key, flags[k.key], k.doc);
    if (std::string_view(cmd.name) == "report") {
      sub->add_option("dir", report_dir, "artifact directory (default: paths.out)");
    }
    subs.push_back(sub);
  }
  app.add_subcommand("config", "print every config key with its default")->callback([] {
    std::cout << pl::ConfigReference();
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  for (std::size_t i = 0; i < commands.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    const auto& cmd = commands[i];
    try {
      RunConfig cfg;
      // paths.out decides where a stage's saved config lives, so resolve it first.
      std::string out_dir = cfg.out_dir;
      if (!report_dir.empty()) out_dir = report_dir;
      if (flags["paths.out"]) out_dir = *flags["paths.out"];
      if (!config_file.empty()) {
        cfg = pl::LoadConfigFile(config_file);
        if (!flags["paths.out"] && report_dir.empty()) out_dir = cfg.out_dir;
      } else if (cmd.reads_run_config &&
                 std::filesystem::is_regular_file(std::filesystem::path(out_dir) / "config.txt")) {
        cfg = pl::LoadConfigFile(std::filesystem::path(out_dir) / "config.txt");
      }
      for (const auto& [key, value] : flags) {
        if (value) pl::SetConfigValue(cfg, key, *value);
      }
      cfg.out_dir = out_dir;
      cmd.action(cfg);
    } catch (const foodsurv::UsageError& e) {
      std::fprintf(stderr, "foodsurv %s: usage error: %s\n", cmd.name, e.what());
      return 1;
    } catch (const foodsurv::NumericalError& e) {
      std::fprintf(stderr, "foodsurv %s: numerical failure: %s\n", cmd.name, e.what());
      return 3;
    } catch (const foodsurv::DataError& e) {
      std::fprintf(stderr, "foodsurv %s: data error: %s\n", cmd.name, e.what());
      return 2;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "foodsurv %s: %s\n", cmd.name, e.what());
      return 2;
    }
  }
  return 0;
}
