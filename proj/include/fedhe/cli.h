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

// Subcommands behind the `fedhe` binary, kept out of main() so tests can call
// them with string streams.
//
// A run directory holds:
//   manifest.json  run identity, config snapshot, artifact names, comm costs
//   config.txt     canonical config actually used
//   metrics.csv    one row per evaluation
//   summary.json   final accuracies and communication totals

#pragma once

#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fedhe/orchestrator.h"

namespace fedhe {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 1,
  kExitRuntimeError = 2,
};

inline constexpr int kManifestSchemaVersion = 1;

// Looks for a relative data path in the working directory, then next to the
// config file, then in the bundled data directory. Absolute paths are checked
// as given. Throws ConfigError(field, ...) when nothing exists.
std::string resolve_data_path(const std::string& field, const std::string& path,
                              const std::filesystem::path& config_dir);

// Reads, overrides and resolves data paths; does not validate.
ExperimentConfig load_config_file(const std::filesystem::path& path,
                                  const std::vector<std::string>& overrides);

struct RunArgs {
  std::filesystem::path config;
  std::vector<std::string> overrides;
  std::filesystem::path out_dir;
};

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err);

int cmd_compare(std::span<const std::filesystem::path> manifests,
                std::ostream& out, std::ostream& err);

// Writes the template to `dest`, or to `out` when dest is empty.
int cmd_gen_config(const std::string& name, const std::filesystem::path& dest,
                   std::ostream& out, std::ostream& err);

}  // namespace fedhe
