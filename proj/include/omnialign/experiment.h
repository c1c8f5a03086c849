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

// Train-then-evaluate runs and one-parameter sweeps over them.

#ifndef OMNIALIGN_EXPERIMENT_H_
#define OMNIALIGN_EXPERIMENT_H_

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "omnialign/config.h"

namespace omnialign {

// Mean cosine between student and teacher pooled tokens over every scene and
// modality of `probe`, on unaugmented inputs.
double TeacherSimilarity(const EncoderStack& stack, const std::vector<SceneTriplet>& probe);

struct FrontierPoint {
  std::string param;
  double value = 0;
  double alignment = 0;         // matched-scene cross-modal mean cosine
  double discernibility = 0;    // 1 - mismatched-scene rgb cosine
  double teacher_similarity = 0;
  double r1 = 0;                // 6-pair average R@1
  double final_loss = 0;
};

// Sweepable parameters: "lambda_anchor" and "alpha_max".
void SetSweepParam(RunConfig& cfg, std::string_view param, double value);

// Trains on `train`, then evaluates retrieval and diagnostics on `probe`.
FrontierPoint RunFrontierPoint(const RunConfig& cfg, std::string_view param, double value,
                               const std::vector<SceneTriplet>& train,
                               const std::vector<SceneTriplet>& probe);

// One point per value, in order; `jobs` > 1 trains that many runs at once.
std::vector<FrontierPoint> RunSweep(const RunConfig& cfg, std::string_view param,
                                    const std::vector<double>& values, std::size_t jobs = 1);

nlohmann::ordered_json ToJson(const std::vector<FrontierPoint>& points);
std::string FrontierText(const std::vector<FrontierPoint>& points);

}  // namespace omnialign

#endif  // OMNIALIGN_EXPERIMENT_H_
