// Copyright 2026 The FedHe Simulator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// fedhe run --config exp.cfg [--set key=value]... [--out DIR]
// fedhe compare RUN/manifest.json...
// fedhe gen-config TEMPLATE [-o FILE]

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedhe/cli.h"
#include "fedhe/config.h"

int main(int argc, char** argv) {
  CLI::App app{"Simulate federated learning with logit exchange"};
  app.require_subcommand(1);

  fedhe::RunArgs run_args;
  const char* env_out = std::getenv("FEDHE_OUT");
  std::string out_dir = env_out != nullptr ? env_out : "fedhe-out";
  CLI::App* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("--config", run_args.config, "Config file")->required();
  run->add_option("--set", run_args.overrides,
                  "Override a config key, e.g. --set client.2.speed=10")
      ->allow_extra_args(false);
  run->add_option("--out", out_dir, "Run directory (default: $FEDHE_OUT)");

  std::vector<std::string> manifests;
  CLI::App* compare =
      app.add_subcommand("compare", "Tabulate finished runs side by side");
  compare->add_option("manifests", manifests, "manifest.json of each run")
      ->required();

  std::string template_name;
  std::string template_dest;
  CLI::App* gen = app.add_subcommand("gen-config", "Print a config template");
  gen->add_option("template", template_name)
      ->required()
      ->description("One of: " + [] {
        std::string s;
        for (const auto& n : fedhe::template_names()) s += s.empty() ? n : ", " + n;
        return s;
      }());
  gen->add_option("-o,--output", template_dest, "Write to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? fedhe::kExitOk : fedhe::kExitConfigError;
  }

  if (*run) {
    run_args.out_dir = out_dir;
    return fedhe::cmd_run(run_args, std::cout, std::cerr);
  }
  if (*compare) {
    std::vector<std::filesystem::path> paths(manifests.begin(), manifests.end());
    return fedhe::cmd_compare(paths, std::cout, std::cerr);
  }
  return fedhe::cmd_gen_config(template_name, template_dest, std::cout,
                               std::cerr);
}
