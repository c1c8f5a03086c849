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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "omnialign/error.h"

namespace omnialign {
namespace {

// Pairs (rgb, seg), (seg, depth), (depth, rgb) in rgb=0, depth=1, seg=2 order.
constexpr std::array<std::array<std::size_t, 2>, 3> kPairs = {{{0, 2}, {2, 1}, {1, 0}}};

void CheckTau(double tau, double lo, double hi) {
  if (!(tau >= lo && tau <= hi)) {
    throw Error(ErrorCode::kTauOutOfRange, "tau " + std::to_string(tau) + " outside [" +
                                               std::to_string(lo) + ", " + std::to_string(hi) +
                                               "]");
  }
}

void CheckPairShapes(const Tensor2& a, const Tensor2& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "embedding batches differ in shape");
  }
  if (a.rows() < 2) throw Error(ErrorCode::kBatchTooSmall, "InfoNCE needs at least 2 rows");
}

// Logits l_ij = <a_i, b_j> / tau. The row direction treats a_i as the anchor
// with positive b_i, the column direction treats b_j as the anchor with
// positive a_j. Under the mask, entries of the same group other than the
// diagonal are excluded from both softmaxes.
struct PairTerms {
  double forward = 0;
  double backward = 0;
};

struct PairShape {
  std::size_t n;
  std::size_t group;
  bool mask;

  // Columns [lo, hi) of row i except i itself are excluded.
  std::pair<std::size_t, std::size_t> Excluded(std::size_t i) const {
    if (!mask || group <= 1) return {i, i};
    return {(i / group) * group, std::min(n, (i / group + 1) * group)};
  }
  template <typename Fn>
  void ForAllowed(std::size_t i, Fn&& fn) const {
    const auto [lo, hi] = Excluded(i);
    if (lo == hi) {
      fn(std::size_t{0}, n);
      return;
    }
    fn(std::size_t{0}, lo);
    fn(i, i + 1);
    fn(hi, n);
  }
  void ZeroExcluded(std::size_t i, double* row) const {
    const auto [lo, hi] = Excluded(i);
    for (std::size_t j = lo; j < hi; ++j) {
      if (j != i) row[j] = 0.0;
    }
  }
};

// Per-anchor softmax statistics: sum of exp(l - shift) and of exp(l - shift) * l.
struct SoftmaxStats {
  std::vector<double> row_sum, row_dot, col_sum, col_dot, diag;
  std::vector<double> row_shift, col_shift;
};

PairTerms TermsFromStats(const SoftmaxStats& st, const PairShape& sh) {
  PairTerms out;
  const std::size_t n = st.diag.size();
  for (std::size_t i = 0; i < n; ++i) {
    // An anchor whose only candidate is its positive contributes exactly 0.
    const auto [lo, hi] = sh.Excluded(i);
    if (n - (hi - lo) == 0) continue;
    out.forward += st.row_shift[i] + std::log(st.row_sum[i]) - st.diag[i];
    out.backward += st.col_shift[i] + std::log(st.col_sum[i]) - st.diag[i];
  }
  out.forward /= static_cast<double>(n);
  out.backward /= static_cast<double>(n);
  return out;
}

// d/dlog(tau) of one direction is -(sum_j p_j l_j - l_positive) per anchor.
double LogTauGradient(const SoftmaxStats& st, double w_fwd, double w_bwd) {
  const double dn = static_cast<double>(st.diag.size());
  double dlt = 0.0;
  for (std::size_t i = 0; i < st.diag.size(); ++i) {
    dlt -= w_fwd / dn * (st.row_dot[i] / st.row_sum[i] - st.diag[i]);
    dlt -= w_bwd / dn * (st.col_dot[i] / st.col_sum[i] - st.diag[i]);
  }
  return dlt;
}

// Rows per block in the cache-blocked path.
constexpr std::size_t kPairBlock = 64;

// Every logit lies in [-1/tau, 1/tau] for unit rows, so exp(l - 1/tau)
// cannot overflow and stays normal while 2/tau is below this bound.
constexpr double kMaxFixedShiftInvTau = 300.0;

// Fixed shift 1/tau: one exponential serves both directions, and the work
// proceeds in row blocks so the n x n weights stay cache resident.
PairTerms PairCoreBlocked(const Tensor2& a, const Tensor2& b, double tau, const PairShape& sh,
                          double w_fwd, double w_bwd, Tensor2* d_a, Tensor2* d_b,
                          double* d_log_tau) {
  const std::size_t n = sh.n, dim = a.cols();
  const double inv_tau = 1.0 / tau;
  const double shift = inv_tau;
  const Tensor2 bt = Transpose(b);
  SoftmaxStats st;
  st.row_sum.assign(n, 0.0);
  st.row_dot.assign(n, 0.0);
  st.col_sum.assign(n, 0.0);
  st.col_dot.assign(n, 0.0);
  st.diag.assign(n, 0.0);
  st.row_shift.assign(n, shift);
  st.col_shift.assign(n, shift);
  const bool want_grad = d_a != nullptr;
  // Exponentials of every block, kept for the gradient pass.
  std::vector<Tensor2> blocks;

  for (std::size_t r0 = 0; r0 < n; r0 += kPairBlock) {
    const std::size_t rows = std::min(kPairBlock, n - r0);
    Tensor2 a_blk(rows, dim);
    std::copy(a.row(r0).begin(), a.row(r0).begin() + rows * dim, a_blk.row(0).begin());
    Tensor2 e = MatMul(a_blk, bt);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t i = r0 + r;
      double* li = e.row(r).data();
      for (std::size_t j = 0; j < n; ++j) li[j] *= inv_tau;
      st.diag[i] = li[i];
      double rs = 0.0, rd = 0.0;
      sh.ForAllowed(i, [&](std::size_t j0, std::size_t j1) {
        for (std::size_t j = j0; j < j1; ++j) {
          const double lij = li[j];
          const double ex = std::exp(lij - shift);
          rs += ex;
          rd += ex * lij;
          st.col_sum[j] += ex;
          st.col_dot[j] += ex * lij;
          li[j] = ex;
        }
      });
      sh.ZeroExcluded(i, li);
      st.row_sum[i] = rs;
      st.row_dot[i] = rd;
    }
    if (want_grad) blocks.push_back(std::move(e));
  }

  const PairTerms out = TermsFromStats(st, sh);
  if (!want_grad) return out;
  if (d_log_tau != nullptr) *d_log_tau += LogTauGradient(st, w_fwd, w_bwd);

  const double dn = static_cast<double>(n);
  std::vector<double> cf(n);
  for (std::size_t j = 0; j < n; ++j) cf[j] = w_bwd / (dn * st.col_sum[j]) * inv_tau;
  const double diag_term = (w_fwd + w_bwd) / dn * inv_tau;
  Tensor2 gb(n, dim);
  for (std::size_t blk = 0; blk < blocks.size(); ++blk) {
    const std::size_t r0 = blk * kPairBlock;
    Tensor2& g = blocks[blk];
    const std::size_t rows = g.rows();
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t i = r0 + r;
      const double rf = w_fwd / (dn * st.row_sum[i]) * inv_tau;
      double* gi = g.row(r).data();
      for (std::size_t j = 0; j < n; ++j) gi[j] = gi[j] * rf + gi[j] * cf[j];
      gi[i] -= diag_term;
    }
    const Tensor2 ga = MatMul(g, b);
    for (std::size_t k = 0; k < ga.size(); ++k) d_a->data()[r0 * dim + k] += ga.data()[k];
    Tensor2 a_blk(rows, dim);
    std::copy(a.row(r0).begin(), a.row(r0).begin() + rows * dim, a_blk.row(0).begin());
    const Tensor2 gb_blk = MatMul(Transpose(g), a_blk);
    for (std::size_t k = 0; k < gb.size(); ++k) gb.data()[k] += gb_blk.data()[k];
  }
  for (std::size_t k = 0; k < gb.size(); ++k) d_b->data()[k] += gb.data()[k];
  return out;
}

// Per-row and per-column max shifts; valid at any temperature.
PairTerms PairCoreShifted(const Tensor2& a, const Tensor2& b, double tau, const PairShape& sh,
                          double w_fwd, double w_bwd, Tensor2* d_a, Tensor2* d_b,
                          double* d_log_tau) {
  const std::size_t n = sh.n;
  const double inv_tau = 1.0 / tau;
  Tensor2 l = MatMulTransposed(a, b);
  SoftmaxStats st;
  st.diag.assign(n, 0.0);
  st.row_shift.assign(n, -std::numeric_limits<double>::infinity());
  st.col_shift.assign(n, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    double* li = l.row(i).data();
    for (std::size_t j = 0; j < n; ++j) li[j] *= inv_tau;
    st.diag[i] = li[i];
    sh.ForAllowed(i, [&](std::size_t j0, std::size_t j1) {
      for (std::size_t j = j0; j < j1; ++j) {
        st.row_shift[i] = std::max(st.row_shift[i], li[j]);
        st.col_shift[j] = std::max(st.col_shift[j], li[j]);
      }
    });
  }
  st.row_sum.assign(n, 0.0);
  st.row_dot.assign(n, 0.0);
  st.col_sum.assign(n, 0.0);
  st.col_dot.assign(n, 0.0);
  Tensor2 row_e(n, n), col_e(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* li = l.row(i).data();
    double* re = row_e.row(i).data();
    double* ce = col_e.row(i).data();
    sh.ForAllowed(i, [&](std::size_t j0, std::size_t j1) {
      for (std::size_t j = j0; j < j1; ++j) {
        re[j] = std::exp(li[j] - st.row_shift[i]);
        ce[j] = std::exp(li[j] - st.col_shift[j]);
        st.row_sum[i] += re[j];
        st.row_dot[i] += re[j] * li[j];
        st.col_sum[j] += ce[j];
        st.col_dot[j] += ce[j] * li[j];
      }
    });
  }
  const PairTerms out = TermsFromStats(st, sh);
  if (d_a == nullptr) return out;
  if (d_log_tau != nullptr) *d_log_tau += LogTauGradient(st, w_fwd, w_bwd);

  const double dn = static_cast<double>(n);
  const double diag_term = (w_fwd + w_bwd) / dn * inv_tau;
  Tensor2& g = l;
  for (std::size_t i = 0; i < n; ++i) {
    const double rf = w_fwd / (dn * st.row_sum[i]) * inv_tau;
    const double* re = row_e.row(i).data();
    const double* ce = col_e.row(i).data();
    double* gi = g.row(i).data();
    for (std::size_t j = 0; j < n; ++j) {
      gi[j] = re[j] * rf + ce[j] * (w_bwd / (dn * st.col_sum[j]) * inv_tau);
    }
    gi[i] -= diag_term;
  }
  const Tensor2 ga = MatMul(g, b);
  const Tensor2 gb = MatMulTN(g, a);
  for (std::size_t k = 0; k < ga.size(); ++k) d_a->data()[k] += ga.data()[k];
  for (std::size_t k = 0; k < gb.size(); ++k) d_b->data()[k] += gb.data()[k];
  return out;
}

// Loss of both directions; when d_a is set, accumulates w_fwd * d(forward)
// + w_bwd * d(backward) into d_a, d_b and d_log_tau.
PairTerms PairCore(const Tensor2& a, const Tensor2& b, double tau, std::size_t group, bool mask,
                   double w_fwd, double w_bwd, Tensor2* d_a, Tensor2* d_b, double* d_log_tau) {
  const PairShape sh{a.rows(), group, mask};
  if (1.0 / tau <= kMaxFixedShiftInvTau) {
    return PairCoreBlocked(a, b, tau, sh, w_fwd, w_bwd, d_a, d_b, d_log_tau);
  }
  return PairCoreShifted(a, b, tau, sh, w_fwd, w_bwd, d_a, d_b, d_log_tau);
}

// Symmetric InfoNCE between a and b; gradients scaled by `weight`.
double SymmetricPair(const Tensor2& a, const Tensor2& b, double tau, std::size_t group,
                     bool mask, double weight, Tensor2* d_a, Tensor2* d_b, double* d_log_tau) {
  const PairTerms t =
      PairCore(a, b, tau, group, mask, 0.5 * weight, 0.5 * weight, d_a, d_b, d_log_tau);
  return 0.5 * (t.forward + t.backward);
}

// Mean symmetric InfoNCE over the three modality pairs.
double AlignCore(const std::array<const Tensor2*, 3>& h, double tau, std::size_t group,
                 bool mask, double weight, std::array<Tensor2, 3>* d_h, double* d_log_tau,
                 std::array<double, 3>* pair_values) {
  double sum = 0.0;
  for (std::size_t p = 0; p < kPairs.size(); ++p) {
    const auto [i, j] = kPairs[p];
    const double v = SymmetricPair(*h[i], *h[j], tau, group, mask, weight / 3.0,
                                   d_h ? &(*d_h)[i] : nullptr, d_h ? &(*d_h)[j] : nullptr,
                                   d_log_tau);
    if (pair_values != nullptr) (*pair_values)[p] = v;
    sum += v;
  }
  return sum / 3.0;
}

double AnchorCore(const Tensor2& student, const Tensor2& teacher, double weight,
                  Tensor2* d_student) {
  if (student.rows() != teacher.rows() || student.cols() != teacher.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "student and teacher shapes differ");
  }
  if (student.rows() == 0) throw Error(ErrorCode::kDimensionMismatch, "empty anchor batch");
  const double n = static_cast<double>(student.rows());
  double sum = 0.0;
  // For unit rows 1 - <s, t> = |s - t|^2 / 2, which is exactly 0 when s == t.
  for (std::size_t r = 0; r < student.rows(); ++r) {
    const auto s = student.row(r);
    const auto t = teacher.row(r);
    double sq = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) sq += (s[k] - t[k]) * (s[k] - t[k]);
    sum += 0.5 * sq;
    if (d_student != nullptr) {
      auto d = d_student->row(r);
      for (std::size_t k = 0; k < d.size(); ++k) d[k] += weight * (s[k] - t[k]) / n;
    }
  }
  return sum / n;
}

// Unit-row matrices the loss is defined on, per modality.
struct Assembled {
  std::array<Tensor2, 3> pooled_student, pooled_teacher;
  std::array<Tensor2, 3> dense_student, dense_teacher;
  std::size_t tokens_per_scene = 0;
};

struct AssembledGrad {
  std::array<Tensor2, 3> pooled;
  std::array<Tensor2, 3> dense;
  std::vector<double> log_tau;
};

LossBreakdown LossFromAssembled(const Assembled& a, std::span<const double> log_tau,
                                const LossConfig& cfg, AssembledGrad* grad) {
  ValidateLossConfig(cfg);
  const std::size_t n_tau = cfg.shared_tau ? 1 : 2;
  if (log_tau.size() != n_tau) {
    throw Error(ErrorCode::kLengthMismatch, "expected " + std::to_string(n_tau) + " temperatures");
  }
  const double tau_pooled = std::exp(log_tau[0]);
  const double tau_dense = std::exp(log_tau[n_tau - 1]);
  CheckTau(tau_pooled, cfg.tau_min, cfg.tau_max);
  CheckTau(tau_dense, cfg.tau_min, cfg.tau_max);
  for (std::size_t m = 0; m < 3; ++m) CheckPairShapes(a.pooled_student[m], a.pooled_teacher[m]);

  const double w = cfg.dense_weight;
  const double lambda = cfg.lambda_anchor;
  if (grad != nullptr) {
    grad->log_tau.assign(n_tau, 0.0);
    for (std::size_t m = 0; m < 3; ++m) {
      grad->pooled[m] = Tensor2(a.pooled_student[m].rows(), a.pooled_student[m].cols());
      grad->dense[m] = Tensor2(a.dense_student[m].rows(), a.dense_student[m].cols());
    }
  }
  LossBreakdown out;
  out.lambda_anchor = lambda;
  out.pooled_align = AlignCore(
      {&a.pooled_student[0], &a.pooled_student[1], &a.pooled_student[2]}, tau_pooled, 1, false,
      1.0 - w, grad ? &grad->pooled : nullptr, grad ? &grad->log_tau[0] : nullptr,
      &out.pooled_pairs);
  out.dense_align = AlignCore(
      {&a.dense_student[0], &a.dense_student[1], &a.dense_student[2]}, tau_dense,
      a.tokens_per_scene, cfg.mask_intra_image, w, grad ? &grad->dense : nullptr,
      grad ? &grad->log_tau[n_tau - 1] : nullptr, &out.dense_pairs);
  for (std::size_t m = 0; m < 3; ++m) {
    out.pooled_anchor += AnchorCore(a.pooled_student[m], a.pooled_teacher[m],
                                    lambda * (1.0 - w) / 3.0,
                                    grad ? &grad->pooled[m] : nullptr) / 3.0;
    out.dense_anchor += AnchorCore(a.dense_student[m], a.dense_teacher[m], lambda * w / 3.0,
                                   grad ? &grad->dense[m] : nullptr) / 3.0;
  }
  out.align = (1.0 - w) * out.pooled_align + w * out.dense_align;
  out.anchor = (1.0 - w) * out.pooled_anchor + w * out.dense_anchor;
  out.total = out.align + lambda * out.anchor;
  return out;
}

void CheckIndices(const std::vector<std::vector<std::size_t>>& idx, std::size_t scenes,
                  std::size_t tokens) {
  if (idx.size() != scenes) {
    throw Error(ErrorCode::kLengthMismatch, "one dense index list per scene is required");
  }
  for (const auto& list : idx) {
    if (list.size() != idx.front().size() || list.empty()) {
      throw Error(ErrorCode::kLengthMismatch, "dense index lists must share a nonzero length");
    }
    for (std::size_t t : list) {
      if (t >= tokens) throw Error(ErrorCode::kIndexOutOfRange, "dense index out of range");
    }
  }
}

Assembled AssembleFromEmbeddings(const EmbeddingBatch& batch,
                                 const std::vector<std::vector<std::size_t>>& idx) {
  if (batch.empty()) throw Error(ErrorCode::kBatchTooSmall, "empty batch");
  const std::size_t d = batch[0][0].pooled_student.size();
  const std::size_t tokens = batch[0][0].dense_student.rows();
  CheckIndices(idx, batch.size(), tokens);
  const std::size_t n = idx[0].size();
  Assembled a;
  a.tokens_per_scene = n;
  for (std::size_t m = 0; m < 3; ++m) {
    a.pooled_student[m] = Tensor2(batch.size(), d);
    a.pooled_teacher[m] = Tensor2(batch.size(), d);
    a.dense_student[m] = Tensor2(batch.size() * n, d);
    a.dense_teacher[m] = Tensor2(batch.size() * n, d);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const EmbeddingSet& e = batch[i][m];
      if (e.pooled_student.size() != d || e.dense_student.rows() != tokens) {
        throw Error(ErrorCode::kDimensionMismatch, "inconsistent embedding shapes in batch");
      }
      std::copy(e.pooled_student.begin(), e.pooled_student.end(), a.pooled_student[m].row(i).begin());
      std::copy(e.pooled_teacher.begin(), e.pooled_teacher.end(), a.pooled_teacher[m].row(i).begin());
      for (std::size_t k = 0; k < n; ++k) {
        const auto s = e.dense_student.row(idx[i][k]);
        const auto t = e.dense_teacher.row(idx[i][k]);
        std::copy(s.begin(), s.end(), a.dense_student[m].row(i * n + k).begin());
        std::copy(t.begin(), t.end(), a.dense_teacher[m].row(i * n + k).begin());
      }
    }
  }
  return a;
}

// Forward state of one image on the trainable path.
struct ImagePass {
  HeadTrace trace;
  Tensor2 teacher_out;
  std::vector<double> row_norms;   // |student output row|
  std::vector<double> pooled_raw;  // mean of student output rows
  double pooled_norm = 0;
};

BackwardResult RunBatch(const EncoderStack& stack, const FeatureBatch& batch,
                        std::span<const double> log_tau, const LossConfig& cfg,
                        bool want_grad) {
  if (batch.empty()) throw Error(ErrorCode::kBatchTooSmall, "empty batch");
  const std::size_t dim = stack.config.embed_dim;
  const std::size_t tokens = batch[0].trunk[0].rows();
  std::vector<std::vector<std::size_t>> idx;
  for (const auto& s : batch) idx.push_back(s.dense_indices);
  CheckIndices(idx, batch.size(), tokens);
  const std::size_t n = idx[0].size();

  std::vector<std::array<ImagePass, 3>> passes(batch.size());
  ParallelFor(batch.size(), ConfiguredThreads(), [&](std::size_t i) {
    for (std::size_t m = 0; m < 3; ++m) {
      const Tensor2& z = batch[i].trunk[m];
      if (z.rows() != tokens || z.cols() != dim) {
        throw Error(ErrorCode::kDimensionMismatch, "trunk features have inconsistent shapes");
      }
      ImagePass& p = passes[i][m];
      p.trace = StudentForwardTraced(stack, z);
      p.teacher_out = TeacherHeadForward(stack, z);
      const Tensor2& out = p.trace.output;
      p.row_norms.resize(tokens);
      p.pooled_raw.assign(dim, 0.0);
      for (std::size_t t = 0; t < tokens; ++t) {
        p.row_norms[t] = Norm2(out.row(t));
        for (std::size_t d = 0; d < dim; ++d) p.pooled_raw[d] += out(t, d);
      }
      for (double& v : p.pooled_raw) v /= static_cast<double>(tokens);
      p.pooled_norm = Norm2(p.pooled_raw);
      if (!(p.pooled_norm >= 1e-12)) throw Error(ErrorCode::kZeroVector, "pooled token is zero");
    }
  });

  Assembled a;
  a.tokens_per_scene = n;
  for (std::size_t m = 0; m < 3; ++m) {
    a.pooled_student[m] = Tensor2(batch.size(), dim);
    a.pooled_teacher[m] = Tensor2(batch.size(), dim);
    a.dense_student[m] = Tensor2(batch.size() * n, dim);
    a.dense_teacher[m] = Tensor2(batch.size() * n, dim);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const ImagePass& p = passes[i][m];
      auto ps = a.pooled_student[m].row(i);
      for (std::size_t d = 0; d < dim; ++d) ps[d] = p.pooled_raw[d] / p.pooled_norm;
      std::vector<double> teacher_mean(dim, 0.0);
      for (std::size_t t = 0; t < tokens; ++t)
        for (std::size_t d = 0; d < dim; ++d) teacher_mean[d] += p.teacher_out(t, d);
      for (double& v : teacher_mean) v /= static_cast<double>(tokens);
      const double tnorm = Norm2(teacher_mean);
      auto pt = a.pooled_teacher[m].row(i);
      for (std::size_t d = 0; d < dim; ++d) pt[d] = teacher_mean[d] / tnorm;
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t t = idx[i][k];
        auto ds = a.dense_student[m].row(i * n + k);
        auto dt = a.dense_teacher[m].row(i * n + k);
        const double sn = p.row_norms[t];
        if (!(sn >= 1e-12)) throw Error(ErrorCode::kZeroVector, "zero dense token");
        const double tn = Norm2(p.teacher_out.row(t));
        for (std::size_t d = 0; d < dim; ++d) {
          ds[d] = p.trace.output(t, d) / sn;
          dt[d] = p.teacher_out(t, d) / tn;
        }
      }
    }
  }

  BackwardResult result;
  AssembledGrad ag;
  result.loss = LossFromAssembled(a, log_tau, cfg, want_grad ? &ag : nullptr);
  if (!want_grad) return result;

  const std::size_t n_params = TrainableCount(stack);
  std::vector<std::vector<double>> per_scene(batch.size(), std::vector<double>(n_params, 0.0));
  ParallelFor(batch.size(), ConfiguredThreads(), [&](std::size_t i) {
    for (std::size_t m = 0; m < 3; ++m) {
      const ImagePass& p = passes[i][m];
      Tensor2 d_out(tokens, dim);
      // Pooled token: q = mean / |mean|, shared by every row.
      const auto q = a.pooled_student[m].row(i);
      const auto dq = ag.pooled[m].row(i);
      const double qdq = Dot(q, dq);
      std::vector<double> d_row(dim);
      const double pooled_scale = 1.0 / (p.pooled_norm * static_cast<double>(tokens));
      for (std::size_t d = 0; d < dim; ++d) d_row[d] = (dq[d] - q[d] * qdq) * pooled_scale;
      for (std::size_t t = 0; t < tokens; ++t)
        for (std::size_t d = 0; d < dim; ++d) d_out(t, d) = d_row[d];
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t t = idx[i][k];
        const auto u = a.dense_student[m].row(i * n + k);
        const auto du = ag.dense[m].row(i * n + k);
        const double udu = Dot(u, du);
        const double inv = 1.0 / p.row_norms[t];
        for (std::size_t d = 0; d < dim; ++d) d_out(t, d) += (du[d] - u[d] * udu) * inv;
      }
      StudentBackward(stack, p.trace, d_out, per_scene[i]);
    }
  });
  result.grad.params.assign(n_params, 0.0);
  for (const auto& g : per_scene)
    for (std::size_t k = 0; k < n_params; ++k) result.grad.params[k] += g[k];
  result.grad.log_tau = ag.log_tau;
  return result;
}

}  // namespace

void ValidateLossConfig(const LossConfig& cfg) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::kConfigInvalid, why); };
  if (!(cfg.lambda_anchor >= 0.0)) fail("lambda_anchor must be >= 0");
  if (!(cfg.tau_min > 0.0 && cfg.tau_min < cfg.tau_max)) fail("need 0 < tau_min < tau_max");
  if (!(cfg.tau_init >= cfg.tau_min && cfg.tau_init <= cfg.tau_max)) {
    fail("tau_init outside [tau_min, tau_max]");
  }
  if (cfg.n_dense < 1) fail("n_dense must be >= 1");
  if (!(cfg.dense_weight >= 0.0 && cfg.dense_weight <= 1.0)) fail("dense_weight must be in [0, 1]");
}

std::vector<double> InitialLogTau(const LossConfig& cfg) {
  ValidateLossConfig(cfg);
  return std::vector<double>(cfg.shared_tau ? 1 : 2, std::log(cfg.tau_init));
}

void ClipLogTau(std::span<double> log_tau, const LossConfig& cfg) {
  const double lo = std::log(cfg.tau_min), hi = std::log(cfg.tau_max);
  for (double& v : log_tau) v = std::clamp(v, lo, hi);
}

double InfoNce(const Tensor2& h1, const Tensor2& h2, double tau) {
  CheckPairShapes(h1, h2);
  CheckTau(tau, kTauMin, kTauMax);
  return PairCore(h1, h2, tau, 1, false, 1.0, 0.0, nullptr, nullptr, nullptr).forward;
}

double SymmetricInfoNce(const Tensor2& h1, const Tensor2& h2, double tau) {
  CheckPairShapes(h1, h2);
  CheckTau(tau, kTauMin, kTauMax);
  return SymmetricPair(h1, h2, tau, 1, false, 1.0, nullptr, nullptr, nullptr);
}

double AlignLoss(const Tensor2& h_rgb, const Tensor2& h_seg, const Tensor2& h_depth,
                 double tau) {
  CheckPairShapes(h_rgb, h_seg);
  CheckPairShapes(h_rgb, h_depth);
  CheckTau(tau, kTauMin, kTauMax);
  return AlignCore({&h_rgb, &h_depth, &h_seg}, tau, 1, false, 1.0, nullptr, nullptr, nullptr);
}

double AnchorLoss(const Tensor2& student, const Tensor2& teacher) {
  return AnchorCore(student, teacher, 0.0, nullptr);
}

std::vector<std::size_t> SampleDenseIndices(Rng& rng, std::size_t tokens, std::size_t n_dense) {
  if (n_dense > tokens) {
    throw Error(ErrorCode::kTooFewTokens, "cannot sample " + std::to_string(n_dense) +
                                              " of " + std::to_string(tokens) + " tokens");
  }
  std::vector<std::size_t> pool(tokens);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t k = 0; k < n_dense; ++k) {
    const std::size_t j = k + static_cast<std::size_t>(rng.next_below(tokens - k));
    std::swap(pool[k], pool[j]);
  }
  pool.resize(n_dense);
  return pool;
}

double DenseAlignLoss(const std::array<Tensor2, 3>& tokens, std::size_t tokens_per_scene,
                      double tau, bool mask) {
  CheckTau(tau, kTauMin, kTauMax);
  if (tokens_per_scene == 0 || tokens[0].rows() % tokens_per_scene != 0) {
    throw Error(ErrorCode::kDimensionMismatch, "token rows are not a multiple of tokens_per_scene");
  }
  for (const auto& t : tokens) {
    if (t.rows() != tokens[0].rows() || t.cols() != tokens[0].cols() || t.rows() == 0) {
      throw Error(ErrorCode::kDimensionMismatch, "modalities differ in token shape");
    }
  }
  return AlignCore({&tokens[0], &tokens[1], &tokens[2]}, tau, tokens_per_scene, mask, 1.0,
                   nullptr, nullptr, nullptr);
}

LossBreakdown TotalLoss(const EmbeddingBatch& batch,
                        const std::vector<std::vector<std::size_t>>& dense_indices,
                        std::span<const double> log_tau, const LossConfig& cfg) {
  return LossFromAssembled(AssembleFromEmbeddings(batch, dense_indices), log_tau, cfg, nullptr);
}

EmbeddingBatch EmbedBatch(const EncoderStack& stack, const FeatureBatch& batch) {
  EmbeddingBatch out(batch.size());
  ParallelFor(batch.size(), ConfiguredThreads(), [&](std::size_t i) {
    for (std::size_t m = 0; m < 3; ++m) out[i][m] = HeadsForward(stack, batch[i].trunk[m]);
  });
  return out;
}

BackwardResult Backward(const EncoderStack& stack, const FeatureBatch& batch,
                        std::span<const double> log_tau, const LossConfig& cfg) {
  return RunBatch(stack, batch, log_tau, cfg, true);
}

LossBreakdown EvaluateLoss(const EncoderStack& stack, const FeatureBatch& batch,
                           std::span<const double> log_tau, const LossConfig& cfg) {
  return RunBatch(stack, batch, log_tau, cfg, false).loss;
}

GradCheckReport GradCheckAgainst(const EncoderStack& stack, const FeatureBatch& batch,
                                 std::span<const double> log_tau, const LossConfig& cfg,
                                 const GradientBuffer& analytic, double h, double tolerance) {
  if (analytic.params.size() != TrainableCount(stack) || analytic.log_tau.size() != log_tau.size()) {
    throw Error(ErrorCode::kLengthMismatch, "analytic gradient does not match the parameters");
  }
  GradCheckReport report;
  EncoderStack probe = stack;
  std::vector<double> params = TrainableParameters(stack);
  std::vector<double> taus(log_tau.begin(), log_tau.end());

  auto record = [&](std::string name, double a, double numeric) {
    GradCheckEntry e{std::move(name), a, numeric, 0.0};
    e.rel_error = std::abs(a - numeric) /
                  std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
    if (e.rel_error > report.max_rel_error || report.entries.empty()) {
      report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
      report.worst = report.entries.size();
    }
    if (!(e.rel_error <= tolerance)) report.failures.push_back(report.entries.size());
    report.entries.push_back(std::move(e));
  };

  for (std::size_t k = 0; k < params.size(); ++k) {
    const double orig = params[k];
    params[k] = orig + h;
    SetTrainableParameters(probe, params);
    const double up = EvaluateLoss(probe, batch, taus, cfg).total;
    params[k] = orig - h;
    SetTrainableParameters(probe, params);
    const double down = EvaluateLoss(probe, batch, taus, cfg).total;
    params[k] = orig;
    record("param[" + std::to_string(k) + "]", analytic.params[k], (up - down) / (2.0 * h));
  }
  SetTrainableParameters(probe, params);
  for (std::size_t k = 0; k < taus.size(); ++k) {
    const double orig = taus[k];
    taus[k] = orig + h;
    const double up = EvaluateLoss(probe, batch, taus, cfg).total;
    taus[k] = orig - h;
    const double down = EvaluateLoss(probe, batch, taus, cfg).total;
    taus[k] = orig;
    record("log_tau[" + std::to_string(k) + "]", analytic.log_tau[k], (up - down) / (2.0 * h));
  }
  report.passed = report.failures.empty();
  return report;
}

GradCheckReport GradCheck(const EncoderStack& stack, const FeatureBatch& batch,
                          std::span<const double> log_tau, const LossConfig& cfg, double h,
                          double tolerance) {
  const BackwardResult analytic = Backward(stack, batch, log_tau, cfg);
  return GradCheckAgainst(stack, batch, log_tau, cfg, analytic.grad, h, tolerance);
}

}  // namespace omnialign
