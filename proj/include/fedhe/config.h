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

// Experiment config files.
//
// Flat `key = value` lines, `#` starts a comment. Per-client settings live in
// `[client N]` blocks, numbered from 0:
//
//   method = fedhe
//   clients = 2
//   rounds = 100
//   dataset = synthetic
//
//   [client 0]
//   hidden = 64, 32
//   dropout = 0.2
//
//   [client 1]
//   hidden = 32
//   speed = 4
//
// Inside a block, `hidden = 64` is stored as the flat key `client.0.hidden`,
// which is also the spelling overrides use (`--set client.1.speed=10`).

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "fedhe/orchestrator.h"

namespace fedhe {

using FlatConfig = std::map<std::string, std::string>;

// Syntax only; throws ConfigError with "line N" as the field on bad lines or
// duplicate keys.
FlatConfig parse_flat_config(std::string_view text);

// Each override is "key=value". Throws ConfigError when '=' is missing.
void apply_overrides(FlatConfig& flat, const std::vector<std::string>& overrides);

// Typed build. Unknown keys and unparsable values throw ConfigError. Does not
// call validate().
ExperimentConfig build_config(const FlatConfig& flat);

ExperimentConfig parse_config(std::string_view text,
                              const std::vector<std::string>& overrides = {});

// Canonical text form; parse_config(to_config_text(c)) == c.
std::string to_config_text(const ExperimentConfig& cfg);

// Names of the built-in templates accepted by config_template().
const std::vector<std::string>& template_names();

// Config text for a template; throws ConfigError listing the valid names.
std::string config_template(std::string_view name);

// Stable description of the data a run used, independent of seed and of the
// directory the files were found in. Runs are comparable only when equal.
std::string dataset_id(const DataSource& data);

}  // namespace fedhe
