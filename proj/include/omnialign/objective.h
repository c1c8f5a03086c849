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

// Cross-modal contrastive alignment plus teacher anchoring, with exact
// gradients for the student head and the (log-space) temperature.
//
//   align  = (1 - w) * pooled_align + w * dense_align
//   anchor = (1 - w) * pooled_anchor + w * dense_anchor
//   total  = align + lambda_anchor * anchor
//
// where each *_align term averages the symmetric InfoNCE over the modality
// pairs (rgb, seg), (seg, depth), (depth, rgb), and w = dense_weight.

#ifndef OMNIALIGN_OBJECTIVE_H_
#define OMNIALIGN_OBJECTIVE_H_

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "omnialign/model.h"
#include "omnialign/numerics.h"

namespace omnialign {

inline constexpr double kTauMin = 1e-3;
inline constexpr double kTauMax = 100.0;

struct LossConfig {
  double lambda_anchor = 10.0;
  double tau_init = 0.07;
  double tau_min = kTauMin;
  double tau_max = kTauMax;
  std::size_t n_dense = 64;
  // Weight of the dense-token terms; the pooled terms get 1 - dense_weight.
  double dense_weight = 0.5;
  // Excludes every other token of the anchor's own scene from the dense
  // negatives.
  bool mask_intra_image = true;
  // One temperature for pooled and dense losses; false learns two.
  bool shared_tau = true;
};

void ValidateLossConfig(const LossConfig& cfg);

// Temperatures are stored as log(tau); entry 0 serves pooled losses and,
// when not shared, entry 1 serves dense losses.
std::vector<double> InitialLogTau(const LossConfig& cfg);
void ClipLogTau(std::span<double> log_tau, const LossConfig& cfg);

struct LossBreakdown {
  double total = 0;
  double align = 0;
  double anchor = 0;
  double pooled_align = 0;
  double dense_align = 0;
  double pooled_anchor = 0;
  double dense_anchor = 0;
  // Symmetric InfoNCE per pair, ordered (rgb,seg), (seg,depth), (depth,rgb).
  std::array<double, 3> pooled_pairs{};
  std::array<double, 3> dense_pairs{};
  double lambda_anchor = 0;
};

struct GradientBuffer {
  std::vector<double> params;   // aligned with TrainableParameters()
  std::vector<double> log_tau;  // d total / d log(tau)

  std::size_t size() const { return params.size() + log_tau.size(); }
};

// One-directional InfoNCE with the positive of row i at row i of h2.
double InfoNce(const Tensor2& h1, const Tensor2& h2, double tau);
double SymmetricInfoNce(const Tensor2& h1, const Tensor2& h2, double tau);
double AlignLoss(const Tensor2& h_rgb, const Tensor2& h_seg, const Tensor2& h_depth,
                 double tau);
// Mean over rows of 1 - <h_i, h*_i>.
double AnchorLoss(const Tensor2& student, const Tensor2& teacher);

// n_dense distinct token indices drawn uniformly without replacement.
std::vector<std::size_t> SampleDenseIndices(Rng& rng, std::size_t tokens, std::size_t n_dense);

// tokens[m] stacks the sampled tokens of every scene for modality m,
// scene-major: row = scene * tokens_per_scene + k. Rows of one scene in the
// other modality are never used as negatives when `mask` is set.
double DenseAlignLoss(const std::array<Tensor2, 3>& tokens, std::size_t tokens_per_scene,
                      double tau, bool mask = true);

// Student and teacher embeddings of each scene, indexed [scene][modality]
// with modality order rgb, depth, seg.
using EmbeddingBatch = std::vector<std::array<EmbeddingSet, 3>>;

LossBreakdown TotalLoss(const EmbeddingBatch& batch,
                        const std::vector<std::vector<std::size_t>>& dense_indices,
                        std::span<const double> log_tau, const LossConfig& cfg);

// Trunk features of each scene and the dense indices sampled for it.
struct SceneFeatures {
  std::array<Tensor2, 3> trunk;  // rgb, depth, seg
  std::vector<std::size_t> dense_indices;
};
using FeatureBatch = std::vector<SceneFeatures>;

EmbeddingBatch EmbedBatch(const EncoderStack& stack, const FeatureBatch& batch);

struct BackwardResult {
  LossBreakdown loss;
  GradientBuffer grad;
};

BackwardResult Backward(const EncoderStack& stack, const FeatureBatch& batch,
                        std::span<const double> log_tau, const LossConfig& cfg);

// Loss only, via the same path as Backward.
LossBreakdown EvaluateLoss(const EncoderStack& stack, const FeatureBatch& batch,
                           std::span<const double> log_tau, const LossConfig& cfg);

struct GradCheckEntry {
  std::string name;  // "param[i]" or "log_tau[k]"
  double analytic = 0;
  double numeric = 0;
  double rel_error = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0;
  std::size_t worst = 0;
  std::vector<std::size_t> failures;  // indices into entries
  bool passed = true;
};

// |a - n| / max(|a|, |n|, floor); the floor keeps entries that are zero up
// to rounding from reporting spurious relative error.
inline constexpr double kGradCheckFloor = 1e-6;

// Central differences of EvaluateLoss against `analytic`.
GradCheckReport GradCheckAgainst(const EncoderStack& stack, const FeatureBatch& batch,
                                 std::span<const double> log_tau, const LossConfig& cfg,
                                 const GradientBuffer& analytic, double h, double tolerance);
GradCheckReport GradCheck(const EncoderStack& stack, const FeatureBatch& batch,
                          std::span<const double> log_tau, const LossConfig& cfg, double h,
                          double tolerance);

}  // namespace omnialign

#endif  // OMNIALIGN_OBJECTIVE_H_
