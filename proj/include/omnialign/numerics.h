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

// Dense row-major matrices, deterministic randomness and the small amount of
// linear algebra (cosine similarity, symmetric eigendecomposition, PCA) the
// rest of the library builds on. Everything is 64-bit floating point.

#ifndef OMNIALIGN_NUMERICS_H_
#define OMNIALIGN_NUMERICS_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace omnialign {

class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  // Takes ownership of row-major `data`; throws DimensionMismatch when its
  // length is not rows * cols.
  Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const Tensor2&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// SplitMix64. Doubles use the top 53 bits, so a seed fixes the exact
// sequence on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  // Uniform in [0, 1).
  double next_unit();
  // Uniform in [lo, hi]; returns lo exactly when lo == hi.
  double uniform(double lo, double hi);
  // Unbiased integer in [0, n). n must be positive.
  std::uint64_t next_below(std::uint64_t n);
  // Standard normal via Box-Muller (one draw per call, two uniforms used).
  double normal();

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

Rng SeededRng(std::uint64_t seed);

// Mixes a base seed with stream identifiers into an independent seed.
std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

// FNV-1a over raw bytes; used for content hashes in manifests and tests.
std::uint64_t Fnv1a64(std::span<const unsigned char> bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t HashDoubles(std::span<const double> values);

double Dot(std::span<const double> a, std::span<const double> b);
double Norm2(std::span<const double> v);

// Returns v / ||v||. A vector whose computed norm is already 1 is returned
// unchanged, which makes the operation idempotent bit-for-bit.
// Throws ZeroVector when ||v|| < 1e-12.
std::vector<double> L2Normalize(std::span<const double> v);
Tensor2 L2NormalizeRows(const Tensor2& m);

// Out(i, j) = <A_i, B_j>. Each entry accumulates over the shared dimension
// in index order, so results equal a plain sequential dot product.
Tensor2 MatMulTransposed(const Tensor2& a, const Tensor2& b);
// Out = A * B.
Tensor2 MatMul(const Tensor2& a, const Tensor2& b);
// Out = A^T * B.
Tensor2 MatMulTN(const Tensor2& a, const Tensor2& b);
Tensor2 Transpose(const Tensor2& m);

// Pairwise cosine similarity between the rows of A (N x D) and B (M x D).
Tensor2 CosineSimilarityMatrix(const Tensor2& a, const Tensor2& b);

struct EigenDecomposition {
  std::vector<double> values;  // descending
  Tensor2 vectors;             // row k is the eigenvector of values[k]
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Eigenvectors are
// unit-norm with their largest-magnitude entry made nonnegative (lowest
// index wins ties).
EigenDecomposition SymmetricEigen(const Tensor2& symmetric);

struct PcaResult {
  Tensor2 components;            // k x D, orthonormal rows
  Tensor2 projections;           // N x k
  std::vector<double> mean;      // D
  std::vector<double> variances; // k eigenvalues of the sample covariance
};

// Principal components of the rows of X via the (N-1)-normalized sample
// covariance.
PcaResult PcaTopK(const Tensor2& x, std::size_t k);

// Worker count from OMNIALIGN_THREADS (default 1, minimum 1).
std::size_t ConfiguredThreads();

// Runs fn(i) for i in [0, n) on up to `workers` threads. Callers write to
// disjoint slots, so the results do not depend on scheduling.
void ParallelFor(std::size_t n, std::size_t workers,
                 const std::function<void(std::size_t)>& fn);

}  // namespace omnialign

#endif  // OMNIALIGN_NUMERICS_H_
