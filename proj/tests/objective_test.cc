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

#include "omnialign/objective.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "test_util.h"

namespace omnialign {
namespace {

using testing::CodeOf;
using testing::RandomTensor;
using testing::UnitRows;

double Sim(const Tensor2& a, std::size_t i, const Tensor2& b, std::size_t j) {
  double s = 0;
  for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
  return s;
}

// One direction: rows of `a` are anchors, rows of `b` candidates. With a
// group size g, candidates sharing the anchor's group are dropped except the
// positive.
double NaiveDirectional(const Tensor2& a, const Tensor2& b, double tau, std::size_t g, bool mask) {
  const std::size_t n = a.rows();
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> logits;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask && j != i && j / g == i / g) continue;
      logits.push_back(Sim(a, i, b, j) / tau);
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0;
    for (double l : logits) z += std::exp(l - mx);
    total += -(Sim(a, i, b, i) / tau) + mx + std::log(z);
  }
  return total / n;
}

double NaiveSymmetric(const Tensor2& a, const Tensor2& b, double tau, std::size_t g = 1,
                      bool mask = false) {
  return 0.5 * (NaiveDirectional(a, b, tau, g, mask) + NaiveDirectional(b, a, tau, g, mask));
}

double NaiveAlign(const Tensor2& r, const Tensor2& s, const Tensor2& d, double tau,
                  std::size_t g = 1, bool mask = false) {
  return (NaiveSymmetric(r, s, tau, g, mask) + NaiveSymmetric(s, d, tau, g, mask) +
          NaiveSymmetric(d, r, tau, g, mask)) / 3.0;
}

double NaiveAnchor(const Tensor2& s, const Tensor2& t) {
  double total = 0;
  for (std::size_t i = 0; i < s.rows(); ++i) total += 1.0 - Sim(s, i, t, i);
  return total / s.rows();
}

Tensor2 RandomOrthogonal(std::size_t d, std::uint64_t seed) {
  Tensor2 q = RandomTensor(d, d, seed);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double p = Sim(q, i, q, j);
      for (std::size_t k = 0; k < d; ++k) q(i, k) -= p * q(j, k);
    }
    const double n = std::sqrt(Sim(q, i, q, i));
    for (std::size_t k = 0; k < d; ++k) q(i, k) /= n;
  }
  return q;
}

Tensor2 Rotate(const Tensor2& x, const Tensor2& q) { return MatMulTransposed(x, q); }

Tensor2 Rows(std::size_t n, std::size_t d, std::vector<double> v) { return Tensor2(n, d, std::move(v)); }

TEST(InfoNceTest, IdenticalRowsGiveLogN) {
  const Tensor2 h = Rows(2, 2, {1, 0, 1, 0});
  EXPECT_NEAR(InfoNce(h, h, 1.0), std::log(2.0), 1e-15);
  const Tensor2 h5 = UnitRows(Tensor2(5, 3, 1.0));
  EXPECT_NEAR(InfoNce(h5, h5, 0.3), std::log(5.0), 1e-12);
}

TEST(InfoNceTest, IdentityRowsClosedForm) {
  const Tensor2 eye = Rows(2, 2, {1, 0, 0, 1});
  EXPECT_NEAR(InfoNce(eye, eye, 1.0), std::log1p(std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(InfoNce(eye, eye, 1.0), 0.313262, 1e-6);
}

TEST(InfoNceTest, MatchedPairsApproachZero) {
  const Tensor2 eye = Rows(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  double previous = INFINITY;
  for (double tau : {10.0, 1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 1e-3}) {
    const double v = InfoNce(eye, eye, tau);
    if (previous > 0) {
      EXPECT_LT(v, previous);
    } else {
      EXPECT_EQ(v, 0.0);
    }
    previous = v;
  }
  EXPECT_EQ(previous, 0.0);
}

TEST(InfoNceTest, MatchesBruteForceAcrossTemperatures) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const std::size_t n = 2 + seed % 9;
    const Tensor2 a = UnitRows(RandomTensor(n, 6, seed)), b = UnitRows(RandomTensor(n, 6, seed + 50));
    for (double tau : {100.0, 1.0, 0.07, 0.005, 0.002, 1e-3}) {
      const double tol = 1e-12 * std::max(1.0, 1.0 / tau);
      EXPECT_NEAR(InfoNce(a, b, tau), NaiveDirectional(a, b, tau, 1, false), tol) << tau;
      EXPECT_NEAR(SymmetricInfoNce(a, b, tau), NaiveSymmetric(a, b, tau), tol) << tau;
    }
  }
}

TEST(InfoNceTest, UpperBound) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const std::size_t n = 2 + seed % 7;
    const Tensor2 a = UnitRows(RandomTensor(n, 4, seed)), b = UnitRows(RandomTensor(n, 4, seed + 9));
    const double tau = 0.05 + 0.1 * (seed % 5);
    double smin = 1, smax = -1;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        smin = std::min(smin, Sim(a, i, b, j));
        smax = std::max(smax, Sim(a, i, b, j));
      }
    EXPECT_LE(InfoNce(a, b, tau), std::log(static_cast<double>(n)) + (smax - smin) / tau + 1e-12);
  }
}

TEST(InfoNceTest, Errors) {
  const Tensor2 one = UnitRows(RandomTensor(1, 3, 1));
  EXPECT_EQ(CodeOf([&] { InfoNce(one, one, 1.0); }), ErrorCode::kBatchTooSmall);
  const Tensor2 h = UnitRows(RandomTensor(3, 3, 1));
  EXPECT_EQ(CodeOf([&] { InfoNce(h, h, 0.0); }), ErrorCode::kTauOutOfRange);
  EXPECT_EQ(CodeOf([&] { InfoNce(h, h, 1e-4); }), ErrorCode::kTauOutOfRange);
  EXPECT_EQ(CodeOf([&] { InfoNce(h, h, 101.0); }), ErrorCode::kTauOutOfRange);
  EXPECT_EQ(CodeOf([&] { InfoNce(h, UnitRows(RandomTensor(4, 3, 2)), 1.0); }),
            ErrorCode::kDimensionMismatch);
}

TEST(SymmetricTest, SwapAndSelf) {
  const Tensor2 a = UnitRows(RandomTensor(5, 4, 3)), b = UnitRows(RandomTensor(5, 4, 4));
  EXPECT_EQ(SymmetricInfoNce(a, b, 0.2), SymmetricInfoNce(b, a, 0.2));
  EXPECT_NEAR(SymmetricInfoNce(a, a, 0.2), InfoNce(a, a, 0.2), 1e-14);
}

TEST(SymmetricTest, AsymmetricThreeByTwo) {
  const Tensor2 a = Rows(3, 2, {1, 0, 0, 1, std::sqrt(0.5), std::sqrt(0.5)});
  const Tensor2 b = Rows(3, 2, {0.6, 0.8, -1, 0, 0, -1});
  EXPECT_NEAR(SymmetricInfoNce(a, b, 0.5), NaiveSymmetric(a, b, 0.5), 1e-12);
  EXPECT_NE(InfoNce(a, b, 0.5), InfoNce(b, a, 0.5));
}

TEST(AlignTest, IdenticalRowsGiveLogN) {
  const Tensor2 h = UnitRows(Tensor2(4, 3, 1.0));
  EXPECT_NEAR(AlignLoss(h, h, h, 0.07), std::log(4.0), 1e-12);
}

TEST(AlignTest, PermutationInvariantAndMatchesOracle) {
  const Tensor2 r = UnitRows(RandomTensor(4, 3, 1)), s = UnitRows(RandomTensor(4, 3, 2)),
                d = UnitRows(RandomTensor(4, 3, 3));
  const double v = AlignLoss(r, s, d, 0.3);
  EXPECT_NEAR(v, NaiveAlign(r, s, d, 0.3), 1e-12);
  EXPECT_NEAR(AlignLoss(r, d, s, 0.3), v, 1e-14);
  EXPECT_NEAR(AlignLoss(s, r, d, 0.3), v, 1e-14);
  EXPECT_NEAR(AlignLoss(s, d, r, 0.3), v, 1e-14);
  EXPECT_NEAR(AlignLoss(d, r, s, 0.3), v, 1e-14);
  EXPECT_NEAR(AlignLoss(d, s, r, 0.3), v, 1e-14);
}

TEST(AlignTest, RotationInvariant) {
  const Tensor2 q = RandomOrthogonal(6, 11);
  const Tensor2 r = UnitRows(RandomTensor(7, 6, 1)), s = UnitRows(RandomTensor(7, 6, 2)),
                d = UnitRows(RandomTensor(7, 6, 3));
  EXPECT_NEAR(AlignLoss(Rotate(r, q), Rotate(s, q), Rotate(d, q), 0.1), AlignLoss(r, s, d, 0.1), 1e-10);
}

TEST(AnchorTest, Examples) {
  const Tensor2 a = Rows(2, 2, {1, 0, 0, 1});
  EXPECT_EQ(AnchorLoss(a, a), 0.0);
  EXPECT_NEAR(AnchorLoss(a, Rows(2, 2, {0, 1, -1, 0})), 1.0, 1e-15);
  EXPECT_NEAR(AnchorLoss(a, Rows(2, 2, {-1, 0, 0, -1})), 2.0, 1e-15);
  EXPECT_EQ(CodeOf([&] { AnchorLoss(a, Tensor2(3, 2, 0.5)); }), ErrorCode::kDimensionMismatch);
}

TEST(AnchorTest, RangeAndOracle) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Tensor2 s = UnitRows(RandomTensor(5, 4, seed)), t = UnitRows(RandomTensor(5, 4, seed + 99));
    const double v = AnchorLoss(s, t);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 2.0);
    EXPECT_NEAR(v, NaiveAnchor(s, t), 1e-12);
  }
}

TEST(DenseIndicesTest, PermutationAndDistinct) {
  Rng rng(5);
  std::vector<std::size_t> all = SampleDenseIndices(rng, 16, 16);
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(all[i], i);
  for (int t = 0; t < 100; ++t) {
    std::vector<std::size_t> some = SampleDenseIndices(rng, 64, 10);
    std::sort(some.begin(), some.end());
    EXPECT_EQ(std::adjacent_find(some.begin(), some.end()), some.end());
    EXPECT_LT(some.back(), 64u);
  }
  EXPECT_EQ(CodeOf([&] { SampleDenseIndices(rng, 4, 5); }), ErrorCode::kTooFewTokens);
}

TEST(DenseIndicesTest, InclusionIsUniform) {
  Rng rng(8);
  const std::size_t tokens = 20, k = 5, draws = 10000;
  std::vector<int> hits(tokens, 0);
  for (std::size_t t = 0; t < draws; ++t)
    for (std::size_t i : SampleDenseIndices(rng, tokens, k)) ++hits[i];
  const double p = static_cast<double>(k) / tokens;
  const double sigma = std::sqrt(draws * p * (1 - p));
  for (int h : hits) EXPECT_LT(std::abs(h - draws * p), 3 * sigma);
}

TEST(DenseAlignTest, SingleSceneIsExactlyZero) {
  std::array<Tensor2, 3> tok;
  for (int m = 0; m < 3; ++m) tok[m] = UnitRows(RandomTensor(4, 8, m + 1));
  EXPECT_EQ(DenseAlignLoss(tok, 4, 0.07), 0.0);
  EXPECT_GT(DenseAlignLoss(tok, 4, 0.07, false), 0.0);
}

TEST(DenseAlignTest, MaskMatters) {
  std::array<Tensor2, 3> tok;
  for (int m = 0; m < 3; ++m) tok[m] = UnitRows(RandomTensor(6, 5, 10 + m));
  EXPECT_NE(DenseAlignLoss(tok, 3, 0.1, true), DenseAlignLoss(tok, 3, 0.1, false));
}

TEST(DenseAlignTest, MatchesMaskedOracle) {
  std::array<Tensor2, 3> tok;
  for (int m = 0; m < 3; ++m) tok[m] = UnitRows(RandomTensor(12, 8, 20 + m));
  for (double tau : {1.0, 0.07, 0.002}) {
    for (bool mask : {true, false}) {
      EXPECT_NEAR(DenseAlignLoss(tok, 4, tau, mask), NaiveAlign(tok[0], tok[2], tok[1], tau, 4, mask),
                  1e-10 * std::max(1.0, 1.0 / tau));
    }
  }
  EXPECT_EQ(CodeOf([&] { DenseAlignLoss(tok, 5, 0.1); }), ErrorCode::kDimensionMismatch);
}

// A small batch of trunk features with shared dense indices per scene.
FeatureBatch MakeBatch(std::size_t scenes, std::size_t tokens, std::size_t dim, std::size_t n_dense,
                       std::uint64_t seed) {
  FeatureBatch batch(scenes);
  Rng rng(seed);
  for (std::size_t i = 0; i < scenes; ++i) {
    for (std::size_t m = 0; m < 3; ++m) batch[i].trunk[m] = RandomTensor(tokens, dim, seed * 100 + i * 3 + m);
    batch[i].dense_indices = SampleDenseIndices(rng, tokens, n_dense);
  }
  return batch;
}

ModelConfig TinyModel() {
  ModelConfig cfg;
  cfg.patch = 2;
  cfg.embed_dim = 8;
  cfg.frozen_layers = 1;
  cfg.adapter_layers = 2;
  cfg.seed = 3;
  return cfg;
}

EncoderStack Perturbed(const EncoderStack& s, double scale, std::uint64_t seed) {
  EncoderStack out = s;
  std::vector<double> flat = TrainableParameters(out);
  Rng rng(seed);
  for (double& v : flat) v += scale * rng.normal();
  SetTrainableParameters(out, flat);
  return out;
}

std::vector<std::vector<std::size_t>> IndicesOf(const FeatureBatch& b) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& s : b) out.push_back(s.dense_indices);
  return out;
}

// Total loss assembled from the naive pieces above.
LossBreakdown NaiveTotal(const EmbeddingBatch& e, const std::vector<std::vector<std::size_t>>& idx,
                         double tau, const LossConfig& cfg) {
  const std::size_t b = e.size(), d = e[0][0].pooled_student.size(), n = idx[0].size();
  std::array<Tensor2, 3> ps, pt, ds, dt;
  for (std::size_t m = 0; m < 3; ++m) {
    ps[m] = pt[m] = Tensor2(b, d);
    ds[m] = dt[m] = Tensor2(b * n, d);
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t k = 0; k < d; ++k) {
        ps[m](i, k) = e[i][m].pooled_student[k];
        pt[m](i, k) = e[i][m].pooled_teacher[k];
        for (std::size_t t = 0; t < n; ++t) {
          ds[m](i * n + t, k) = e[i][m].dense_student(idx[i][t], k);
          dt[m](i * n + t, k) = e[i][m].dense_teacher(idx[i][t], k);
        }
      }
    }
  }
  LossBreakdown out;
  const double w = cfg.dense_weight;
  out.pooled_align = NaiveAlign(ps[0], ps[2], ps[1], tau);
  out.dense_align = NaiveAlign(ds[0], ds[2], ds[1], tau, n, cfg.mask_intra_image);
  for (std::size_t m = 0; m < 3; ++m) {
    out.pooled_anchor += NaiveAnchor(ps[m], pt[m]) / 3;
    out.dense_anchor += NaiveAnchor(ds[m], dt[m]) / 3;
  }
  out.align = (1 - w) * out.pooled_align + w * out.dense_align;
  out.anchor = (1 - w) * out.pooled_anchor + w * out.dense_anchor;
  out.total = out.align + cfg.lambda_anchor * out.anchor;
  return out;
}

TEST(TotalLossTest, MatchesNaiveAssembly) {
  const EncoderStack s = Perturbed(InitStack(TinyModel()), 0.3, 1);
  const FeatureBatch batch = MakeBatch(3, 9, 8, 4, 2);
  LossConfig cfg;
  const std::vector<double> log_tau = {std::log(0.2)};
  const LossBreakdown got = TotalLoss(EmbedBatch(s, batch), IndicesOf(batch), log_tau, cfg);
  const LossBreakdown ref = NaiveTotal(EmbedBatch(s, batch), IndicesOf(batch), 0.2, cfg);
  EXPECT_NEAR(got.pooled_align, ref.pooled_align, 1e-12);
  EXPECT_NEAR(got.dense_align, ref.dense_align, 1e-12);
  EXPECT_NEAR(got.pooled_anchor, ref.pooled_anchor, 1e-12);
  EXPECT_NEAR(got.dense_anchor, ref.dense_anchor, 1e-12);
  EXPECT_NEAR(got.total, ref.total, 1e-11);
  EXPECT_NEAR(got.total, got.align + cfg.lambda_anchor * got.anchor, 1e-12);
  EXPECT_NEAR(got.align, 0.5 * (got.pooled_align + got.dense_align), 1e-12);

  const LossBreakdown fused = EvaluateLoss(s, batch, log_tau, cfg);
  EXPECT_NEAR(fused.total, got.total, 1e-12);
  EXPECT_NEAR(fused.anchor, got.anchor, 1e-12);
}

TEST(TotalLossTest, WeightedSumArithmetic) {
  LossBreakdown b;
  b.align = 0.5;
  b.anchor = 0.1;
  EXPECT_DOUBLE_EQ(b.align + 10.0 * b.anchor, 1.5);
  const EncoderStack s = Perturbed(InitStack(TinyModel()), 0.3, 1);
  const FeatureBatch batch = MakeBatch(2, 6, 8, 3, 4);
  LossConfig cfg;
  cfg.lambda_anchor = 0;
  const LossBreakdown l = EvaluateLoss(s, batch, InitialLogTau(cfg), cfg);
  EXPECT_EQ(l.total, l.align);
}

TEST(TotalLossTest, AnchorIsZeroAtInit) {
  const EncoderStack s = InitStack(TinyModel());
  const FeatureBatch batch = MakeBatch(3, 6, 8, 4, 5);
  LossConfig cfg;
  const LossBreakdown l = EvaluateLoss(s, batch, InitialLogTau(cfg), cfg);
  EXPECT_EQ(l.anchor, 0.0);
  EXPECT_EQ(l.total, l.align);
}

TEST(TotalLossTest, ConfigAndTemperatureErrors) {
  const EncoderStack s = InitStack(TinyModel());
  const FeatureBatch batch = MakeBatch(2, 6, 8, 4, 5);
  LossConfig cfg;
  EXPECT_EQ(CodeOf([&] { EvaluateLoss(s, batch, std::vector<double>{0.0, 0.0}, cfg); }),
            ErrorCode::kLengthMismatch);
  EXPECT_EQ(CodeOf([&] { EvaluateLoss(s, batch, std::vector<double>{std::log(1e-4)}, cfg); }),
            ErrorCode::kTauOutOfRange);
  cfg.lambda_anchor = -1;
  EXPECT_EQ(CodeOf([&] { ValidateLossConfig(cfg); }), ErrorCode::kConfigInvalid);
  cfg = LossConfig{};
  cfg.tau_min = 200;
  EXPECT_EQ(CodeOf([&] { ValidateLossConfig(cfg); }), ErrorCode::kConfigInvalid);
  EXPECT_EQ(CodeOf([&] { EvaluateLoss(s, MakeBatch(1, 6, 8, 4, 5), InitialLogTau(LossConfig{}), LossConfig{}); }),
            ErrorCode::kBatchTooSmall);
}

TEST(TemperatureTest, InitAndClip) {
  LossConfig cfg;
  EXPECT_EQ(InitialLogTau(cfg), std::vector<double>{std::log(0.07)});
  cfg.shared_tau = false;
  EXPECT_EQ(InitialLogTau(cfg).size(), 2u);
  std::vector<double> v = {-100.0, 100.0, 0.5};
  ClipLogTau(v, cfg);
  EXPECT_EQ(v[0], std::log(1e-3));
  EXPECT_EQ(v[1], std::log(100.0));
  EXPECT_EQ(v[2], 0.5);
}

TEST(BackwardTest, GradientCheckPasses) {
  for (bool shared : {true, false}) {
    for (bool on_top : {false, true}) {
      ModelConfig mc = TinyModel();
      mc.adapter_on_top = on_top;
      const EncoderStack s = Perturbed(InitStack(mc), 0.2, 7);
      const FeatureBatch batch = MakeBatch(2, 6, 8, 4, 9);
      LossConfig cfg;
      cfg.shared_tau = shared;
      std::vector<double> log_tau = InitialLogTau(cfg);
      log_tau.back() = std::log(0.3);
      const GradCheckReport r = GradCheck(s, batch, log_tau, cfg, 1e-5, 1e-4);
      EXPECT_TRUE(r.passed) << "worst " << r.entries[r.worst].name << " rel " << r.max_rel_error;
      EXPECT_EQ(r.entries.size(), TrainableCount(s) + log_tau.size());
    }
  }
}

TEST(BackwardTest, LossMatchesForward) {
  const EncoderStack s = Perturbed(InitStack(TinyModel()), 0.2, 7);
  const FeatureBatch batch = MakeBatch(3, 6, 8, 4, 9);
  LossConfig cfg;
  const auto log_tau = InitialLogTau(cfg);
  const BackwardResult r = Backward(s, batch, log_tau, cfg);
  EXPECT_EQ(r.loss.total, EvaluateLoss(s, batch, log_tau, cfg).total);
  EXPECT_EQ(r.grad.params.size(), TrainableCount(s));
  EXPECT_EQ(r.grad.size(), TrainableCount(s) + 1);
}

TEST(BackwardTest, SlowPathGradient) {
  // 1 / tau above the fixed-shift limit.
  const EncoderStack s = Perturbed(InitStack(TinyModel()), 0.2, 3);
  const FeatureBatch batch = MakeBatch(2, 6, 8, 3, 4);
  LossConfig cfg;
  const std::vector<double> log_tau = {std::log(0.002)};
  const GradCheckReport r = GradCheck(s, batch, log_tau, cfg, 1e-7, 1e-3);
  EXPECT_TRUE(r.passed) << "worst " << r.entries[r.worst].name << " rel " << r.max_rel_error;
}

TEST(BackwardTest, FaultInjectionIsFlagged) {
  const EncoderStack s = Perturbed(InitStack(TinyModel()), 0.2, 7);
  const FeatureBatch batch = MakeBatch(2, 6, 8, 4, 9);
  LossConfig cfg;
  const auto log_tau = InitialLogTau(cfg);
  GradientBuffer g = Backward(s, batch, log_tau, cfg).grad;
  std::size_t target = 0;
  for (std::size_t i = 0; i < g.params.size(); ++i)
    if (std::abs(g.params[i]) > std::abs(g.params[target])) target = i;
  g.params[target] *= 2;
  const GradCheckReport r = GradCheckAgainst(s, batch, log_tau, cfg, g, 1e-5, 1e-4);
  EXPECT_FALSE(r.passed);
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.failures[0], target);
  EXPECT_EQ(r.entries[target].name, "param[" + std::to_string(target) + "]");
}

TEST(BackwardTest, StepSizeSweepIsConvex) {
  const EncoderStack s = Perturbed(InitStack(TinyModel()), 0.2, 7);
  const FeatureBatch batch = MakeBatch(2, 6, 8, 4, 9);
  LossConfig cfg;
  const auto log_tau = InitialLogTau(cfg);
  const GradientBuffer g = Backward(s, batch, log_tau, cfg).grad;
  // Aggregate absolute error over all entries at each step size.
  auto error_at = [&](double h) {
    const GradCheckReport r = GradCheckAgainst(s, batch, log_tau, cfg, g, h, 1.0);
    double sum = 0;
    for (const auto& e : r.entries) sum += std::abs(e.analytic - e.numeric);
    return sum;
  };
  const double e4 = error_at(1e-4), e5 = error_at(1e-5), e6 = error_at(1e-6);
  EXPECT_LE(e5, 0.5 * (e4 + e6)) << e4 << " " << e5 << " " << e6;
}

TEST(BackwardTest, AnchorGradientVanishesAtInit) {
  const EncoderStack s = InitStack(TinyModel());
  const FeatureBatch batch = MakeBatch(2, 6, 8, 4, 9);
  LossConfig with, without;
  without.lambda_anchor = 0;
  const auto log_tau = InitialLogTau(with);
  EXPECT_EQ(Backward(s, batch, log_tau, with).grad.params, Backward(s, batch, log_tau, without).grad.params);
}

TEST(BackwardTest, AnchorGradientIsLinearInLambda) {
  const EncoderStack s = Perturbed(InitStack(TinyModel()), 0.2, 7);
  const FeatureBatch batch = MakeBatch(2, 6, 8, 4, 9);
  LossConfig c0, c1, c2;
  c0.lambda_anchor = 0;
  c1.lambda_anchor = 10;
  c2.lambda_anchor = 20;
  const auto log_tau = InitialLogTau(c0);
  const auto g0 = Backward(s, batch, log_tau, c0).grad.params;
  const auto g1 = Backward(s, batch, log_tau, c1).grad.params;
  const auto g2 = Backward(s, batch, log_tau, c2).grad.params;
  double scale = 0;
  for (double v : g1) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < g0.size(); ++i) EXPECT_NEAR(g2[i] - g0[i], 2 * (g1[i] - g0[i]), 1e-12 * scale);
}

TEST(BackwardTest, DeterministicAcrossThreadCounts) {
  const EncoderStack s = Perturbed(InitStack(TinyModel()), 0.2, 7);
  const FeatureBatch batch = MakeBatch(5, 6, 8, 4, 9);
  LossConfig cfg;
  const auto log_tau = InitialLogTau(cfg);
  ::setenv("OMNIALIGN_THREADS", "1", 1);
  const BackwardResult a = Backward(s, batch, log_tau, cfg);
  ::setenv("OMNIALIGN_THREADS", "3", 1);
  const BackwardResult b = Backward(s, batch, log_tau, cfg);
  ::unsetenv("OMNIALIGN_THREADS");
  EXPECT_EQ(a.loss.total, b.loss.total);
  EXPECT_EQ(a.grad.params, b.grad.params);
  EXPECT_EQ(a.grad.log_tau, b.grad.log_tau);
}

}  // namespace
}  // namespace omnialign
