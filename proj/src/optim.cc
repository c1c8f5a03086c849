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


#include "omnialign/optim.h"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "json.hpp"
#include "omnialign/error.h"

namespace omnialign {
namespace {

constexpr std::uint64_t kBatchStream = 3;
constexpr std::uint64_t kItemStream = 4;

}  // namespace

void ValidateAdamWConfig(const AdamWConfig& cfg) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::kConfigInvalid, why); };
  if (!(cfg.lr > 0.0)) fail("lr must be positive");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0)) fail("beta1 must be in [0, 1)");
  if (!(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) fail("beta2 must be in [0, 1)");
  if (!(cfg.eps > 0.0)) fail("eps must be positive");
  if (!(cfg.weight_decay >= 0.0)) fail("weight_decay must be >= 0");
}

AdamWState MakeAdamW(const AdamWConfig& hp, std::size_t n, std::size_t decay_count) {
  ValidateAdamWConfig(hp);
  if (decay_count > n) throw Error(ErrorCode::kLengthMismatch, "decay_count exceeds length");
  AdamWState s;
  s.hp = hp;
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  s.decay_count = decay_count;
  return s;
}

void AdamWStep(AdamWState& state, std::span<double> params, std::span<const double> grads) {
  if (params.size() != state.m.size() || grads.size() != state.m.size()) {
    throw Error(ErrorCode::kLengthMismatch, "AdamW: parameter, gradient and state lengths differ");
  }
  const AdamWConfig& hp = state.hp;
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(hp.beta1, t);
  const double bc2 = 1.0 - std::pow(hp.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g;
    state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    const double decay = i < state.decay_count ? hp.lr * hp.weight_decay * params[i] : 0.0;
    params[i] = params[i] - decay - hp.lr * m_hat / (std::sqrt(v_hat) + hp.eps);
  }
}

void ValidateTrainConfig(const TrainConfig& cfg) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::kConfigInvalid, why); };
  if (cfg.steps < 1) fail("steps must be >= 1");
  if (cfg.batch_size < 2) fail("batch_size must be >= 2");
  if (!(cfg.alpha_max >= 0.0 && cfg.alpha_max <= 1.0)) fail("alpha_max must be in [0, 1]");
  if (cfg.data.n_train < cfg.batch_size) fail("n_train must be >= batch_size");
  ValidateModelConfig(cfg.model);
  ValidateLossConfig(cfg.loss);
  ValidateAdamWConfig(cfg.adamw);
  ValidateSceneConfig(cfg.data.scene, cfg.model.patch);
  if (cfg.data.scene.height % cfg.model.patch != 0 || cfg.data.scene.width % cfg.model.patch != 0) {
    fail("scene size must be divisible by the patch size");
  }
  const std::size_t tokens =
      (cfg.data.scene.height / cfg.model.patch) * (cfg.data.scene.width / cfg.model.patch);
  if (cfg.loss.n_dense > tokens) {
    fail("n_dense " + std::to_string(cfg.loss.n_dense) + " exceeds " + std::to_string(tokens) +
         " tokens per image");
  }
}

std::vector<SceneTriplet> LoadScenes(const DataConfig& data, std::size_t first,
                                     std::size_t count) {
  std::vector<SceneTriplet> scenes(count);
  if (data.dir.empty()) {
    ParallelFor(count, ConfiguredThreads(),
                [&](std::size_t i) { scenes[i] = GenerateScene(data.scene, first + i); });
    return scenes;
  }
  for (std::size_t i = 0; i < count; ++i) {
    const auto dir = data.dir / SceneDirName(first + i);
    if (!std::filesystem::is_directory(dir)) {
      throw Error(ErrorCode::kDataMissing, "missing scene directory " + dir.string());
    }
    const int label = static_cast<int>(DrawLayout(data.scene, first + i).background_index);
    scenes[i] = ReadSceneDir(dir, label);
  }
  return scenes;
}

std::vector<SceneTriplet> LoadTrainScenes(const DataConfig& data) {
  return LoadScenes(data, 0, data.n_train);
}

std::vector<SceneTriplet> LoadEvalScenes(const DataConfig& data) {
  return LoadScenes(data, data.n_train, data.n_eval);
}

std::array<ImageRGB, 3> PrepareModalities(const SceneTriplet& scene, const AugmentConfig& augment,
                                          double alpha_max, Rng& rng) {
  const ImageRGB rgb = PhotometricAugment(scene.rgb, augment, rng);
  const double alpha_depth = SampleAlpha(rng, alpha_max);
  const double alpha_seg = SampleAlpha(rng, alpha_max);
  ImageRGB depth = ModalityMixup(NaturalColorize(scene.depth, rgb), rgb, alpha_depth);
  ImageRGB seg = ModalityMixup(NaturalColorize(scene.seg, rgb), rgb, alpha_seg);
  return {rgb, std::move(depth), std::move(seg)};
}

std::array<Tensor2, 3> EvalTrunk(const EncoderStack& stack, const SceneTriplet& scene) {
  Rng unused(0);
  const auto inputs = PrepareModalities(scene, AugmentConfig::Identity(), 0.0, unused);
  std::array<Tensor2, 3> out;
  for (std::size_t m = 0; m < 3; ++m) out[m] = FrozenForward(stack, NormalizeImagenet(inputs[m]));
  return out;
}

std::string StepRecordJson(const StepRecord& rec) {
  nlohmann::ordered_json j;
  j["step"] = rec.step;
  j["total"] = rec.loss.total;
  j["align"] = rec.loss.align;
  j["anchor"] = rec.loss.anchor;
  j["tau"] = rec.tau;
  return j.dump();
}

Checkpoint InitialCheckpoint(const TrainConfig& cfg) {
  Checkpoint ckpt;
  ckpt.stack = InitStack(cfg.model);
  ckpt.log_tau = InitialLogTau(cfg.loss);
  return ckpt;
}

TrainResult Train(const TrainConfig& cfg, const std::vector<SceneTriplet>& scenes,
                  const StepObserver& observer) {
  ValidateTrainConfig(cfg);
  if (scenes.size() < cfg.batch_size) {
    throw Error(ErrorCode::kDataMissing, "need at least batch_size training scenes");
  }
  TrainResult result;
  result.checkpoint = InitialCheckpoint(cfg);
  EncoderStack& stack = result.checkpoint.stack;
  std::vector<double>& log_tau = result.checkpoint.log_tau;

  const std::size_t n_params = TrainableCount(stack);
  AdamWState opt = MakeAdamW(cfg.adamw, n_params + log_tau.size(), n_params);
  std::vector<double> flat = TrainableParameters(stack);
  flat.insert(flat.end(), log_tau.begin(), log_tau.end());
  std::vector<double> grads(flat.size());
  const std::size_t tokens = (cfg.data.scene.height / cfg.model.patch) *
                             (cfg.data.scene.width / cfg.model.patch);

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    Rng batch_rng(DeriveSeed(cfg.seed, kBatchStream, step));
    const std::vector<std::size_t> picks =
        SampleDenseIndices(batch_rng, scenes.size(), cfg.batch_size);
    FeatureBatch batch(cfg.batch_size);
    ParallelFor(cfg.batch_size, ConfiguredThreads(), [&](std::size_t i) {
      Rng rng(DeriveSeed(DeriveSeed(cfg.seed, kItemStream, step), i));
      const auto inputs = PrepareModalities(scenes[picks[i]], cfg.augment, cfg.alpha_max, rng);
      for (std::size_t m = 0; m < 3; ++m) {
        batch[i].trunk[m] = FrozenForward(stack, NormalizeImagenet(inputs[m]));
      }
      batch[i].dense_indices = SampleDenseIndices(rng, tokens, cfg.loss.n_dense);
    });

    const BackwardResult br = Backward(stack, batch, log_tau, cfg.loss);
    StepRecord rec{step, br.loss, std::exp(log_tau[0])};
    bool finite = std::isfinite(br.loss.total);
    for (double g : br.grad.params) finite = finite && std::isfinite(g);
    for (double g : br.grad.log_tau) finite = finite && std::isfinite(g);
    if (!finite) {
      throw Error(ErrorCode::kNonFiniteLoss, "non-finite loss at step " + std::to_string(step));
    }

    std::copy(br.grad.params.begin(), br.grad.params.end(), grads.begin());
    std::copy(br.grad.log_tau.begin(), br.grad.log_tau.end(), grads.begin() + n_params);
    AdamWStep(opt, flat, grads);
    ClipLogTau(std::span<double>(flat).subspan(n_params), cfg.loss);
    SetTrainableParameters(stack, std::span<const double>(flat).first(n_params));
    std::copy(flat.begin() + n_params, flat.end(), log_tau.begin());

    result.log.push_back(rec);
    if (observer) observer(rec);
    if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 &&
        !cfg.checkpoint_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof(name), "step_%06zu.ckpt", step + 1);
      WriteCheckpoint(cfg.checkpoint_dir / name, result.checkpoint);
    }
  }
  return result;
}

TrainResult Train(const TrainConfig& cfg, const StepObserver& observer) {
  ValidateTrainConfig(cfg);
  return Train(cfg, LoadTrainScenes(cfg.data), observer);
}

}  // namespace omnialign
