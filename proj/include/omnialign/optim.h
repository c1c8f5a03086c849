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

#ifndef OMNIALIGN_OPTIM_H_
#define OMNIALIGN_OPTIM_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "omnialign/imaging.h"
#include "omnialign/model.h"
#include "omnialign/objective.h"
#include "omnialign/synth.h"

namespace omnialign {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

void ValidateAdamWConfig(const AdamWConfig& cfg);

struct AdamWState {
  AdamWConfig hp;
  std::uint64_t t = 0;
  std::vector<double> m;
  std::vector<double> v;
  // Entries at index >= decay_count (the temperature slots) skip weight decay.
  std::size_t decay_count = 0;
};

AdamWState MakeAdamW(const AdamWConfig& hp, std::size_t n, std::size_t decay_count);

// theta <- theta - lr * wd * theta - lr * m_hat / (sqrt(v_hat) + eps)
void AdamWStep(AdamWState& state, std::span<double> params, std::span<const double> grads);

struct DataConfig {
  SceneConfig scene;
  std::size_t n_train = 256;
  std::size_t n_eval = 64;
  // Empty: scenes are generated in memory from `scene`.
  std::filesystem::path dir;
};

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 16;
  std::uint64_t seed = 42;
  double alpha_max = 0.5;
  ModelConfig model;
  LossConfig loss;
  AdamWConfig adamw;
  AugmentConfig augment;
  DataConfig data;
  // 0 disables periodic checkpoints.
  std::size_t checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;
};

void ValidateTrainConfig(const TrainConfig& cfg);

// Scenes [first, first + count) of the configured dataset, read from
// data.dir when set. Labels come from the generator in both cases.
std::vector<SceneTriplet> LoadScenes(const DataConfig& data, std::size_t first, std::size_t count);
std::vector<SceneTriplet> LoadTrainScenes(const DataConfig& data);
std::vector<SceneTriplet> LoadEvalScenes(const DataConfig& data);

// Model inputs in modality order rgb, depth, seg: augmented rgb, and the
// naturally colorized depth and seg maps mixed with it (one alpha each).
std::array<ImageRGB, 3> PrepareModalities(const SceneTriplet& scene, const AugmentConfig& augment,
                                          double alpha_max, Rng& rng);

// Trunk features of the unaugmented, unmixed inputs.
std::array<Tensor2, 3> EvalTrunk(const EncoderStack& stack, const SceneTriplet& scene);

struct StepRecord {
  std::size_t step = 0;
  LossBreakdown loss;
  double tau = 0;  // pooled temperature used in this step
};

std::string StepRecordJson(const StepRecord& rec);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepRecord> log;
};

using StepObserver = std::function<void(const StepRecord&)>;

TrainResult Train(const TrainConfig& cfg, const std::vector<SceneTriplet>& scenes,
                  const StepObserver& observer = {});
TrainResult Train(const TrainConfig& cfg, const StepObserver& observer = {});

// Untrained checkpoint: student equal to teacher, initial temperature.
Checkpoint InitialCheckpoint(const TrainConfig& cfg);

}  // namespace omnialign

#endif  // OMNIALIGN_OPTIM_H_
