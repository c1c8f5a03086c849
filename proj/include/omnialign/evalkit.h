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


// Retrieval, similarity diagnostics, k-NN classification, PCK@0 and PCA
// feature images.

#ifndef OMNIALIGN_EVALKIT_H_
#define OMNIALIGN_EVALKIT_H_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "omnialign/imaging.h"
#include "omnialign/model.h"
#include "omnialign/numerics.h"
#include "omnialign/synth.h"

namespace omnialign {

struct EvalConfig {
  std::size_t batch = 2048;  // query rows per similarity block
  double tie_eps = 1e-6;
  double knn_tau = 0.07;
  std::vector<std::size_t> knn_ks = {5, 10, 20, 50, 100};
  std::uint64_t pairing_seed = 0;
};

void ValidateEvalConfig(const EvalConfig& cfg);

// Number of entries with sim >= sim[truth] - eps, the truth included.
std::size_t RankOfTruth(std::span<const double> sims, std::size_t truth, double eps);

// Mean of the two middle values for even counts.
double MedianRank(std::vector<std::size_t> ranks);

struct RetrievalMetrics {
  double r1 = 0;  // percent
  double r5 = 0;  // percent
  double map = 0;
  double medr = 0;
};

// Rank of gallery row i for query row i, rows normalized first.
std::vector<std::size_t> RetrievalRanks(const Tensor2& query, const Tensor2& gallery,
                                        const EvalConfig& cfg);
RetrievalMetrics MetricsFromRanks(const std::vector<std::size_t>& ranks);
RetrievalMetrics RetrievalEval(const Tensor2& query, const Tensor2& gallery,
                               const EvalConfig& cfg);

struct DirectedPairMetrics {
  Modality source;
  Modality target;
  RetrievalMetrics metrics;
};

struct RetrievalReport {
  std::vector<DirectedPairMetrics> pairs;  // the 6 ordered pairs
  RetrievalMetrics average;
};

// feats[m] holds one row per scene for modality m.
RetrievalReport DirectedPairAverage(const std::array<Tensor2, 3>& feats, const EvalConfig& cfg);

struct DiagnosticReport {
  double rgb_depth = 0;
  double rgb_seg = 0;
  double depth_seg = 0;
  double rgb_rgb_mismatched = 0;

  double CrossModalMean() const { return (rgb_depth + rgb_seg + depth_seg) / 3.0; }
};

// A uniformly drawn cyclic permutation (Sattolo), so no index maps to itself.
std::vector<std::size_t> Derangement(std::size_t n, Rng& rng);

DiagnosticReport Diagnostics(const std::array<Tensor2, 3>& feats, std::uint64_t pairing_seed);

// Labels of the queries under weighted k-NN voting: top-k cosine neighbours,
// weights softmax(sim / tau) over them, highest class total wins (lowest id
// on ties). Neighbour ties go to the lower index.
std::vector<int> KnnSoftPredict(const Tensor2& index, std::span<const int> labels,
                                const Tensor2& query, std::size_t k, double tau);

struct KnnResult {
  std::vector<std::pair<std::size_t, double>> accuracy_at_k;  // percent
  std::size_t best_k = 0;
  double best_accuracy = 0;
};

KnnResult KnnSoftVote(const Tensor2& index, std::span<const int> labels, const Tensor2& query,
                      std::span<const int> query_labels, const EvalConfig& cfg);

// Nearest-neighbour accuracy in percent. With exclude_self the query set is
// the index set and row i never matches itself.
double KnnHard(const Tensor2& index, std::span<const int> labels, const Tensor2& query,
               std::span<const int> query_labels, bool exclude_self);

struct PckResult {
  double a_to_b = 0;
  double b_to_a = 0;
  double mean = 0;
};

PckResult PckAtZero(const Tensor2& a, const Tensor2& b);

struct PcaImages {
  std::array<ImageRGB, 3> images;  // rgb, depth, seg
  std::size_t channels = 0;        // components with nonzero variance
};

// One PCA basis for the tokens of all three modalities; every component is
// min-max scaled with limits shared across modalities. Channels beyond the
// rank are zero; `strict` turns that case into RankDeficient.
PcaImages PcaVisualize(const std::array<Tensor2, 3>& dense, std::size_t grid_h,
                       std::size_t grid_w, std::size_t upscale = 1, bool strict = false);

// Embeddings of a scene list on the unaugmented, unmixed inputs.
struct SplitEmbeddings {
  std::array<Tensor2, 3> pooled_student;
  std::array<Tensor2, 3> pooled_teacher;
  std::vector<std::array<Tensor2, 3>> dense_student;
  std::vector<std::array<Tensor2, 3>> dense_teacher;
  std::vector<int> labels;
};

SplitEmbeddings EmbedSplit(const EncoderStack& stack, const std::vector<SceneTriplet>& scenes);

struct EvalSelection {
  bool retrieval = true;
  bool diagnostics = true;
  bool knn = true;
  bool pck = true;

  // "all" or one of retrieval, diagnostics, knn, pck.
  static EvalSelection Parse(const std::string& which);
};

struct ModelEvaluation {
  RetrievalReport retrieval;
  DiagnosticReport diagnostics;
  std::array<KnnResult, 3> knn;        // per modality
  std::array<double, 3> knn_hard{};    // per modality, self excluded
  std::array<PckResult, 3> pck;        // (rgb,depth), (rgb,seg), (depth,seg)
  double pck_mean = 0;
};

struct EvalReport {
  EvalSelection which;
  std::size_t n_index = 0;
  std::size_t n_query = 0;
  ModelEvaluation student;
  ModelEvaluation teacher;
};

// `index` provides the k-NN reference set; all other metrics use `query`.
EvalReport Evaluate(const EncoderStack& stack, const std::vector<SceneTriplet>& index,
                    const std::vector<SceneTriplet>& query, const EvalSelection& which,
                    const EvalConfig& cfg);

nlohmann::ordered_json ToJson(const RetrievalMetrics& m);
nlohmann::ordered_json ToJson(const RetrievalReport& r);
nlohmann::ordered_json ToJson(const DiagnosticReport& d);
nlohmann::ordered_json ToJson(const EvalReport& r);
std::string ToText(const EvalReport& r);

}  // namespace omnialign

#endif  // OMNIALIGN_EVALKIT_H_
