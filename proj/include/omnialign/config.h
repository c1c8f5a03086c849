// Copyright 2026 The OmniAlign Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Run configuration files:
//
//   # comment
//   [train]
//   steps = 2000
//   lr = 0.0001
//
// Sections are model, train, loss, data and eval. Unknown sections or keys,
// repeated keys and malformed values are ConfigInvalid errors.

#ifndef OMNIALIGN_CONFIG_H_
#define OMNIALIGN_CONFIG_H_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "omnialign/evalkit.h"
#include "omnialign/optim.h"

namespace omnialign {

struct RunConfig {
  TrainConfig train;
  EvalConfig eval;
};

struct ConfigKeyInfo {
  std::string section;
  std::string key;
  std::string default_value;  // canonical text of the default
  std::string help;
};

// Every recognized key in canonical order.
const std::vector<ConfigKeyInfo>& ConfigKeys();

RunConfig ParseRunConfig(std::string_view text);
RunConfig LoadRunConfig(const std::filesystem::path& path);

// Canonical text: every key, in ConfigKeys() order, doubles printed with
// enough digits to round-trip.
std::string SerializeRunConfig(const RunConfig& cfg);

// Sets "section.key" from text, as if it appeared in a file.
void SetConfigValue(RunConfig& cfg, std::string_view dotted_key, std::string_view value);
std::string GetConfigValue(const RunConfig& cfg, std::string_view dotted_key);

// Throws ConfigInvalid on any field that the train or eval stages would
// reject.
void ValidateRunConfig(const RunConfig& cfg);

}  // namespace omnialign

#endif  // OMNIALIGN_CONFIG_H_
