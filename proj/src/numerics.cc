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

#include "omnialign/numerics.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <string>
#include <thread>

#include "omnialign/error.h"

namespace omnialign {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kRankDeficient: return "RankDeficient";
    case ErrorCode::kAlphaOutOfRange: return "AlphaOutOfRange";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kMalformedHeader: return "MalformedHeader";
    case ErrorCode::kTruncatedPayload: return "TruncatedPayload";
    case ErrorCode::kMagicMismatch: return "MagicMismatch";
    case ErrorCode::kVersionUnsupported: return "VersionUnsupported";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kBatchTooSmall: return "BatchTooSmall";
    case ErrorCode::kTauOutOfRange: return "TauOutOfRange";
    case ErrorCode::kTooFewTokens: return "TooFewTokens";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kDataMissing: return "DataMissing";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kTooFewScenes: return "TooFewScenes";
    case ErrorCode::kEmptyIndex: return "EmptyIndex";
  }
  return "Unknown";
}

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw Error(ErrorCode::kDimensionMismatch,
                "tensor data length " + std::to_string(data_.size()) +
                    " != " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

std::uint64_t Rng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

std::uint64_t Rng::next_below(std::uint64_t n) {
  // Rejection keeps the draw unbiased for any n.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  const double u1 = 1.0 - next_unit();  // (0, 1]
  const double u2 = next_unit();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng SeededRng(std::uint64_t seed) { return Rng(seed); }

std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  Rng mixer(seed ^ 0x6A09E667F3BCC909ULL);
  std::uint64_t s = mixer.next_u64();
  Rng ma(s ^ (a * 0x9E3779B97F4A7C15ULL + 0x3C6EF372FE94F82BULL));
  s = ma.next_u64();
  Rng mb(s ^ (b * 0xD1B54A32D192ED03ULL + 0xA54FF53A5F1D36F1ULL));
  return mb.next_u64();
}

std::uint64_t Fnv1a64(std::span<const unsigned char> bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t HashDoubles(std::span<const double> values) {
  return Fnv1a64({reinterpret_cast<const unsigned char*>(values.data()),
                  values.size() * sizeof(double)});
}

double Dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "dot product of unequal lengths");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double Norm2(std::span<const double> v) { return std::sqrt(Dot(v, v)); }

std::vector<double> L2Normalize(std::span<const double> v) {
  const double n = Norm2(v);
  if (!(n >= 1e-12)) throw Error(ErrorCode::kZeroVector, "cannot normalize");
  std::vector<double> out(v.begin(), v.end());
  // Vectors already unit-norm up to rounding are fixed points.
  if (std::abs(n - 1.0) <= 64.0 * std::numeric_limits<double>::epsilon()) {
    return out;
  }
  for (double& x : out) x /= n;
  return out;
}

Tensor2 L2NormalizeRows(const Tensor2& m) {
  Tensor2 out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto v = L2Normalize(m.row(r));
    std::copy(v.begin(), v.end(), out.row(r).begin());
  }
  return out;
}

namespace {

// Out(i, j) = sum_k A(i, k) * B(k, j) with B given row-major and each sum
// accumulated in index order of k. Sixteen outputs are kept in registers.
void MatMulKernel(const double* a, std::size_t lda, const double* b, std::size_t ldb,
                  double* out, std::size_t n, std::size_t d, std::size_t m) {
  constexpr std::size_t kTile = 16;
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a + i * lda;
    double* orow = out + i * m;
    std::size_t j0 = 0;
    for (; j0 + kTile <= m; j0 += kTile) {
      double acc[kTile] = {};
      for (std::size_t k = 0; k < d; ++k) {
        const double aik = arow[k];
        const double* bk = b + k * ldb + j0;
        for (std::size_t jj = 0; jj < kTile; ++jj) acc[jj] += aik * bk[jj];
      }
      for (std::size_t jj = 0; jj < kTile; ++jj) orow[j0 + jj] = acc[jj];
    }
    for (std::size_t j = j0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += arow[k] * b[k * ldb + j];
      orow[j] = acc;
    }
  }
}

}  // namespace

Tensor2 MatMulTransposed(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.cols()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "inner dimensions " + std::to_string(a.cols()) + " vs " +
                    std::to_string(b.cols()));
  }
  const Tensor2 bt = Transpose(b);
  Tensor2 out(a.rows(), b.rows());
  MatMulKernel(a.data().data(), a.cols(), bt.data().data(), bt.cols(), out.data().data(), a.rows(), a.cols(),
               b.rows());
  return out;
}

Tensor2 MatMul(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "matmul inner dimensions differ");
  }
  Tensor2 out(a.rows(), b.cols());
  MatMulKernel(a.data().data(), a.cols(), b.data().data(), b.cols(), out.data().data(), a.rows(), a.cols(),
               b.cols());
  return out;
}

Tensor2 MatMulTN(const Tensor2& a, const Tensor2& b) {
  if (a.rows() != b.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "matmul inner dimensions differ");
  }
  return MatMul(Transpose(a), b);
}

Tensor2 Transpose(const Tensor2& m) {
  constexpr std::size_t kBlock = 32;
  Tensor2 t(m.cols(), m.rows());
  for (std::size_t r0 = 0; r0 < m.rows(); r0 += kBlock) {
    const std::size_t r1 = std::min(m.rows(), r0 + kBlock);
    for (std::size_t c0 = 0; c0 < m.cols(); c0 += kBlock) {
      const std::size_t c1 = std::min(m.cols(), c0 + kBlock);
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) t(c, r) = m(r, c);
    }
  }
  return t;
}

Tensor2 CosineSimilarityMatrix(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "feature dimensions differ");
  }
  auto norms = [](const Tensor2& m) {
    std::vector<double> n(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
      n[r] = Norm2(m.row(r));
      if (!(n[r] >= 1e-12)) {
        throw Error(ErrorCode::kZeroVector, "zero row " + std::to_string(r));
      }
    }
    return n;
  };
  const auto na = norms(a);
  const auto nb = norms(b);
  Tensor2 out = MatMulTransposed(a, b);
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) /= na[i] * nb[j];
  return out;
}

namespace {

void FixSign(std::span<double> v) {
  double best = 0.0;
  for (double x : v) best = std::max(best, std::abs(x));
  for (double& x : v) {
    if (std::abs(x) >= best - 1e-12) {
      if (x < 0.0) {
        for (double& y : v) y = -y;
      }
      return;
    }
  }
}

}  // namespace

EigenDecomposition SymmetricEigen(const Tensor2& symmetric) {
  const std::size_t n = symmetric.rows();
  if (symmetric.cols() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "eigendecomposition needs a square matrix");
  }
  Tensor2 a = symmetric;
  Tensor2 v(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  double total = 0.0;
  for (double x : a.data()) total += x * x;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= 1e-30 * total || off == 0.0) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  EigenDecomposition out;
  out.values.resize(n);
  out.vectors = Tensor2(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(k, r) = v(r, order[k]);
    FixSign(out.vectors.row(k));
  }
  return out;
}

PcaResult PcaTopK(const Tensor2& x, std::size_t k) {
  const std::size_t n = x.rows(), d = x.cols();
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "PCA needs at least 2 rows");
  if (k == 0 || k > std::min(n, d)) {
    throw Error(ErrorCode::kInvalidArgument, "PCA k must be in [1, min(N, D)]");
  }
  PcaResult out;
  out.mean.assign(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out.mean[c] += x(r, c);
  for (double& m : out.mean) m /= static_cast<double>(n);

  Tensor2 centered(n, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) centered(r, c) = x(r, c) - out.mean[c];

  Tensor2 cov(d, d);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = centered.row(r);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) cov(i, j) += row[i] * row[j];
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      cov(i, j) /= static_cast<double>(n - 1);
      cov(j, i) = cov(i, j);
    }
  }

  const EigenDecomposition eig = SymmetricEigen(cov);
  out.components = Tensor2(k, d);
  out.variances.assign(eig.values.begin(), eig.values.begin() + k);
  for (std::size_t i = 0; i < k; ++i)
    std::copy(eig.vectors.row(i).begin(), eig.vectors.row(i).end(),
              out.components.row(i).begin());
  out.projections = MatMulTransposed(centered, out.components);
  return out;
}

std::size_t ConfiguredThreads() {
  const char* env = std::getenv("OMNIALIGN_THREADS");
  if (env == nullptr) return 1;
  const long v = std::strtol(env, nullptr, 10);
  return v < 1 ? 1 : static_cast<std::size_t>(v);
}

void ParallelFor(std::size_t n, std::size_t workers,
                 const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mu;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace omnialign
