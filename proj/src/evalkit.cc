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


#include "omnialign/evalkit.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "omnialign/error.h"
#include "omnialign/optim.h"

namespace omnialign {
namespace {

void CheckSameShape(const Tensor2& a, const Tensor2& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::kShapeMismatch, std::string(what) + ": shapes differ (" +
                                               std::to_string(a.rows()) + "x" +
                                               std::to_string(a.cols()) + " vs " +
                                               std::to_string(b.rows()) + "x" +
                                               std::to_string(b.cols()) + ")");
  }
}

double MeanRowCosine(const Tensor2& a, const Tensor2& b, const std::vector<std::size_t>* perm) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto x = a.row(i);
    const auto y = b.row(perm ? (*perm)[i] : i);
    sum += Dot(x, y) / (Norm2(x) * Norm2(y));
  }
  return sum / static_cast<double>(a.rows());
}

// Index of the largest entry, lowest index on ties.
std::size_t ArgMax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < v.size(); ++j) {
    if (v[j] > v[best]) best = j;
  }
  return best;
}

void CheckLabels(const Tensor2& feats, std::span<const int> labels) {
  if (feats.rows() != labels.size()) {
    throw Error(ErrorCode::kShapeMismatch, "one label per feature row is required");
  }
  for (int l : labels) {
    if (l < 0) throw Error(ErrorCode::kInvalidArgument, "labels must be nonnegative");
  }
}

constexpr std::array<std::array<std::size_t, 2>, 3> kPckPairs = {{{0, 1}, {0, 2}, {1, 2}}};

}  // namespace

void ValidateEvalConfig(const EvalConfig& cfg) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::kConfigInvalid, why); };
  if (cfg.batch < 1) fail("eval batch must be >= 1");
  if (!(cfg.tie_eps > 0.0)) fail("tie_eps must be positive");
  if (!(cfg.knn_tau > 0.0)) fail("knn_tau must be positive");
  if (cfg.knn_ks.empty()) fail("knn_ks must not be empty");
  for (std::size_t k : cfg.knn_ks) {
    if (k < 1) fail("knn k must be >= 1");
  }
}

std::size_t RankOfTruth(std::span<const double> sims, std::size_t truth, double eps) {
  if (truth >= sims.size()) {
    throw Error(ErrorCode::kIndexOutOfRange, "truth index " + std::to_string(truth) +
                                                 " outside " + std::to_string(sims.size()));
  }
  const double threshold = sims[truth] - eps;
  std::size_t rank = 0;
  for (double s : sims) rank += s >= threshold ? 1 : 0;
  return rank;
}

double MedianRank(std::vector<std::size_t> ranks) {
  if (ranks.empty()) throw Error(ErrorCode::kInvalidArgument, "no ranks");
  std::sort(ranks.begin(), ranks.end());
  const std::size_t n = ranks.size();
  if (n % 2 == 1) return static_cast<double>(ranks[n / 2]);
  return 0.5 * (static_cast<double>(ranks[n / 2 - 1]) + static_cast<double>(ranks[n / 2]));
}

std::vector<std::size_t> RetrievalRanks(const Tensor2& query, const Tensor2& gallery,
                                        const EvalConfig& cfg) {
  ValidateEvalConfig(cfg);
  CheckSameShape(query, gallery, "retrieval");
  if (query.rows() == 0) throw Error(ErrorCode::kShapeMismatch, "retrieval: no queries");
  const Tensor2 q = L2NormalizeRows(query);
  const Tensor2 g = L2NormalizeRows(gallery);
  const std::size_t n = q.rows(), d = q.cols();
  std::vector<std::size_t> ranks(n);
  for (std::size_t r0 = 0; r0 < n; r0 += cfg.batch) {
    const std::size_t rows = std::min(cfg.batch, n - r0);
    Tensor2 block(rows, d);
    std::copy(q.row(r0).begin(), q.row(r0).begin() + rows * d, block.row(0).begin());
    const Tensor2 sims = MatMulTransposed(block, g);
    for (std::size_t r = 0; r < rows; ++r) ranks[r0 + r] = RankOfTruth(sims.row(r), r0 + r, cfg.tie_eps);
  }
  return ranks;
}

RetrievalMetrics MetricsFromRanks(const std::vector<std::size_t>& ranks) {
  RetrievalMetrics m;
  double hit1 = 0, hit5 = 0, rr = 0;
  for (std::size_t r : ranks) {
    hit1 += r <= 1 ? 1 : 0;
    hit5 += r <= 5 ? 1 : 0;
    rr += 1.0 / static_cast<double>(r);
  }
  const double n = static_cast<double>(ranks.size());
  m.r1 = 100.0 * hit1 / n;
  m.r5 = 100.0 * hit5 / n;
  m.map = rr / n;
  m.medr = MedianRank(ranks);
  return m;
}

RetrievalMetrics RetrievalEval(const Tensor2& query, const Tensor2& gallery,
                               const EvalConfig& cfg) {
  return MetricsFromRanks(RetrievalRanks(query, gallery, cfg));
}

RetrievalReport DirectedPairAverage(const std::array<Tensor2, 3>& feats, const EvalConfig& cfg) {
  RetrievalReport report;
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t t = 0; t < 3; ++t) {
      if (s == t) continue;
      DirectedPairMetrics p{kModalities[s], kModalities[t], RetrievalEval(feats[s], feats[t], cfg)};
      report.average.r1 += p.metrics.r1;
      report.average.r5 += p.metrics.r5;
      report.average.map += p.metrics.map;
      report.average.medr += p.metrics.medr;
      report.pairs.push_back(p);
    }
  }
  const double n = static_cast<double>(report.pairs.size());
  report.average.r1 /= n;
  report.average.r5 /= n;
  report.average.map /= n;
  report.average.medr /= n;
  return report;
}

std::vector<std::size_t> Derangement(std::size_t n, Rng& rng) {
  if (n < 2) throw Error(ErrorCode::kTooFewScenes, "a derangement needs at least 2 items");
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(p[i], p[j]);
  }
  return p;
}

DiagnosticReport Diagnostics(const std::array<Tensor2, 3>& feats, std::uint64_t pairing_seed) {
  CheckSameShape(feats[0], feats[1], "diagnostics");
  CheckSameShape(feats[0], feats[2], "diagnostics");
  if (feats[0].rows() < 2) {
    throw Error(ErrorCode::kTooFewScenes, "diagnostics need at least 2 scenes");
  }
  Rng rng(pairing_seed);
  const std::vector<std::size_t> perm = Derangement(feats[0].rows(), rng);
  DiagnosticReport d;
  d.rgb_depth = MeanRowCosine(feats[0], feats[1], nullptr);
  d.rgb_seg = MeanRowCosine(feats[0], feats[2], nullptr);
  d.depth_seg = MeanRowCosine(feats[1], feats[2], nullptr);
  d.rgb_rgb_mismatched = MeanRowCosine(feats[0], feats[0], &perm);
  return d;
}

std::vector<int> KnnSoftPredict(const Tensor2& index, std::span<const int> labels,
                                const Tensor2& query, std::size_t k, double tau) {
  CheckLabels(index, labels);
  if (index.rows() == 0) throw Error(ErrorCode::kEmptyIndex, "k-NN index is empty");
  if (k < 1 || k > index.rows()) {
    throw Error(ErrorCode::kInvalidArgument, "k=" + std::to_string(k) + " outside [1, " +
                                                 std::to_string(index.rows()) + "]");
  }
  if (index.cols() != query.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "k-NN feature dimensions differ");
  }
  const int n_classes = *std::max_element(labels.begin(), labels.end()) + 1;
  const Tensor2 sims = CosineSimilarityMatrix(query, index);
  std::vector<int> out(query.rows());
  std::vector<std::size_t> order(index.rows());
  for (std::size_t q = 0; q < query.rows(); ++q) {
    const auto s = sims.row(q);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t x, std::size_t y) {
                        return s[x] > s[y] || (s[x] == s[y] && x < y);
                      });
    const double top = s[order[0]] / tau;
    std::vector<double> votes(static_cast<std::size_t>(n_classes), 0.0);
    double z = 0.0;
    for (std::size_t r = 0; r < k; ++r) z += std::exp(s[order[r]] / tau - top);
    for (std::size_t r = 0; r < k; ++r) {
      votes[static_cast<std::size_t>(labels[order[r]])] += std::exp(s[order[r]] / tau - top) / z;
    }
    out[q] = static_cast<int>(ArgMax(votes));
  }
  return out;
}

KnnResult KnnSoftVote(const Tensor2& index, std::span<const int> labels, const Tensor2& query,
                      std::span<const int> query_labels, const EvalConfig& cfg) {
  ValidateEvalConfig(cfg);
  CheckLabels(query, query_labels);
  if (query.rows() == 0) throw Error(ErrorCode::kEmptyIndex, "no k-NN queries");
  KnnResult result;
  for (std::size_t k : cfg.knn_ks) {
    const std::vector<int> pred = KnnSoftPredict(index, labels, query, k, cfg.knn_tau);
    std::size_t correct = 0;
    for (std::size_t q = 0; q < pred.size(); ++q) correct += pred[q] == query_labels[q] ? 1 : 0;
    const double acc = 100.0 * static_cast<double>(correct) / static_cast<double>(pred.size());
    result.accuracy_at_k.emplace_back(k, acc);
    if (result.accuracy_at_k.size() == 1 || acc > result.best_accuracy) {
      result.best_accuracy = acc;
      result.best_k = k;
    }
  }
  return result;
}

double KnnHard(const Tensor2& index, std::span<const int> labels, const Tensor2& query,
               std::span<const int> query_labels, bool exclude_self) {
  CheckLabels(index, labels);
  CheckLabels(query, query_labels);
  if (index.rows() == 0 || query.rows() == 0) {
    throw Error(ErrorCode::kEmptyIndex, "k-NN index or query set is empty");
  }
  if (exclude_self && (index.rows() != query.rows() || index.rows() < 2)) {
    throw Error(ErrorCode::kShapeMismatch, "self exclusion needs query set == index set");
  }
  const Tensor2 sims = CosineSimilarityMatrix(query, index);
  std::size_t correct = 0;
  for (std::size_t q = 0; q < query.rows(); ++q) {
    const auto s = sims.row(q);
    std::size_t best = exclude_self && q == 0 ? 1 : 0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (exclude_self && j == q) continue;
      if (s[j] > s[best]) best = j;
    }
    correct += labels[best] == query_labels[q] ? 1 : 0;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(query.rows());
}

PckResult PckAtZero(const Tensor2& a, const Tensor2& b) {
  CheckSameShape(a, b, "pck");
  if (a.rows() == 0) throw Error(ErrorCode::kShapeMismatch, "pck: no tokens");
  const Tensor2 sims = CosineSimilarityMatrix(a, b);
  const Tensor2 sims_t = Transpose(sims);
  std::size_t ab = 0, ba = 0;
  for (std::size_t t = 0; t < a.rows(); ++t) {
    ab += ArgMax(sims.row(t)) == t ? 1 : 0;
    ba += ArgMax(sims_t.row(t)) == t ? 1 : 0;
  }
  const double n = static_cast<double>(a.rows());
  PckResult r;
  r.a_to_b = 100.0 * static_cast<double>(ab) / n;
  r.b_to_a = 100.0 * static_cast<double>(ba) / n;
  r.mean = 0.5 * (r.a_to_b + r.b_to_a);
  return r;
}

PcaImages PcaVisualize(const std::array<Tensor2, 3>& dense, std::size_t grid_h,
                       std::size_t grid_w, std::size_t upscale, bool strict) {
  const std::size_t t = grid_h * grid_w;
  for (const auto& m : dense) {
    if (m.rows() != t || m.cols() != dense[0].cols()) {
      throw Error(ErrorCode::kShapeMismatch, "dense features do not match the token grid");
    }
  }
  if (upscale < 1) throw Error(ErrorCode::kInvalidArgument, "upscale must be >= 1");
  const std::size_t dim = dense[0].cols();
  Tensor2 all(3 * t, dim);
  for (std::size_t m = 0; m < 3; ++m) {
    std::copy(dense[m].data().begin(), dense[m].data().end(), all.row(m * t).begin());
  }
  const std::size_t k = std::min<std::size_t>(3, std::min(3 * t, dim));
  const PcaResult pca = PcaTopK(all, k);
  const double top = pca.variances.empty() ? 0.0 : std::max(pca.variances[0], 0.0);
  PcaImages out;
  for (std::size_t c = 0; c < k; ++c) {
    if (pca.variances[c] > 1e-12 * std::max(top, 1e-300) && pca.variances[c] > 0.0) ++out.channels;
  }
  if (strict && out.channels < 3) {
    throw Error(ErrorCode::kRankDeficient,
                "only " + std::to_string(out.channels) + " nonzero principal components");
  }
  std::array<double, 3> lo{}, hi{};
  for (std::size_t c = 0; c < out.channels; ++c) {
    lo[c] = hi[c] = pca.projections(0, c);
    for (std::size_t r = 0; r < all.rows(); ++r) {
      lo[c] = std::min(lo[c], pca.projections(r, c));
      hi[c] = std::max(hi[c], pca.projections(r, c));
    }
  }
  for (std::size_t m = 0; m < 3; ++m) {
    ImageRGB img(grid_h, grid_w);
    for (std::size_t tok = 0; tok < t; ++tok) {
      for (std::size_t c = 0; c < out.channels; ++c) {
        const double span = hi[c] - lo[c];
        const double v = pca.projections(m * t + tok, c);
        img.pixels[tok * 3 + c] = span > 0.0 ? (v - lo[c]) / span : 0.0;
      }
    }
    out.images[m] = upscale == 1 ? img : ResizeNearest(img, grid_h * upscale, grid_w * upscale);
  }
  return out;
}

SplitEmbeddings EmbedSplit(const EncoderStack& stack, const std::vector<SceneTriplet>& scenes) {
  const std::size_t n = scenes.size(), dim = stack.config.embed_dim;
  SplitEmbeddings out;
  out.dense_student.resize(n);
  out.dense_teacher.resize(n);
  out.labels.resize(n);
  for (std::size_t m = 0; m < 3; ++m) {
    out.pooled_student[m] = Tensor2(n, dim);
    out.pooled_teacher[m] = Tensor2(n, dim);
  }
  ParallelFor(n, ConfiguredThreads(), [&](std::size_t i) {
    const auto trunk = EvalTrunk(stack, scenes[i]);
    for (std::size_t m = 0; m < 3; ++m) {
      EmbeddingSet e = HeadsForward(stack, trunk[m]);
      std::copy(e.pooled_student.begin(), e.pooled_student.end(), out.pooled_student[m].row(i).begin());
      std::copy(e.pooled_teacher.begin(), e.pooled_teacher.end(), out.pooled_teacher[m].row(i).begin());
      out.dense_student[i][m] = std::move(e.dense_student);
      out.dense_teacher[i][m] = std::move(e.dense_teacher);
    }
    out.labels[i] = scenes[i].label;
  });
  return out;
}

EvalSelection EvalSelection::Parse(const std::string& which) {
  EvalSelection s;
  if (which == "all") return s;
  s = {false, false, false, false};
  if (which == "retrieval") {
    s.retrieval = true;
  } else if (which == "diagnostics") {
    s.diagnostics = true;
  } else if (which == "knn") {
    s.knn = true;
  } else if (which == "pck") {
    s.pck = true;
  } else {
    throw Error(ErrorCode::kConfigInvalid, "unknown evaluation '" + which +
                                               "' (expected retrieval|diagnostics|knn|pck|all)");
  }
  return s;
}

namespace {

ModelEvaluation EvaluateOne(const std::array<Tensor2, 3>& index_pooled,
                            const std::array<Tensor2, 3>& query_pooled,
                            const std::vector<std::array<Tensor2, 3>>& query_dense,
                            const std::vector<int>& index_labels,
                            const std::vector<int>& query_labels, const EvalSelection& which,
                            const EvalConfig& cfg) {
  ModelEvaluation ev;
  if (which.retrieval) ev.retrieval = DirectedPairAverage(query_pooled, cfg);
  if (which.diagnostics) ev.diagnostics = Diagnostics(query_pooled, cfg.pairing_seed);
  if (which.knn) {
    EvalConfig kcfg = cfg;
    kcfg.knn_ks.clear();
    for (std::size_t k : cfg.knn_ks) {
      if (k <= index_labels.size()) kcfg.knn_ks.push_back(k);
    }
    if (kcfg.knn_ks.empty()) kcfg.knn_ks.push_back(1);
    for (std::size_t m = 0; m < 3; ++m) {
      ev.knn[m] = KnnSoftVote(index_pooled[m], index_labels, query_pooled[m], query_labels, kcfg);
      ev.knn_hard[m] = KnnHard(query_pooled[m], query_labels, query_pooled[m], query_labels, true);
    }
  }
  if (which.pck) {
    for (std::size_t p = 0; p < kPckPairs.size(); ++p) {
      PckResult acc;
      for (const auto& scene : query_dense) {
        const PckResult r = PckAtZero(scene[kPckPairs[p][0]], scene[kPckPairs[p][1]]);
        acc.a_to_b += r.a_to_b;
        acc.b_to_a += r.b_to_a;
      }
      const double n = static_cast<double>(query_dense.size());
      acc.a_to_b /= n;
      acc.b_to_a /= n;
      acc.mean = 0.5 * (acc.a_to_b + acc.b_to_a);
      ev.pck[p] = acc;
      ev.pck_mean += acc.mean / 3.0;
    }
  }
  return ev;
}

nlohmann::ordered_json ModelJson(const ModelEvaluation& ev, const EvalSelection& which) {
  nlohmann::ordered_json j;
  if (which.retrieval) j["retrieval"] = ToJson(ev.retrieval);
  if (which.diagnostics) j["diagnostics"] = ToJson(ev.diagnostics);
  if (which.knn) {
    nlohmann::ordered_json knn;
    for (std::size_t m = 0; m < 3; ++m) {
      nlohmann::ordered_json e;
      nlohmann::ordered_json per_k = nlohmann::ordered_json::array();
      for (const auto& [k, acc] : ev.knn[m].accuracy_at_k) per_k.push_back({{"k", k}, {"accuracy", acc}});
      e["soft_vote"] = per_k;
      e["best_k"] = ev.knn[m].best_k;
      e["best_accuracy"] = ev.knn[m].best_accuracy;
      e["hard_exclude_self"] = ev.knn_hard[m];
      knn[ModalityName(kModalities[m])] = e;
    }
    j["knn"] = knn;
  }
  if (which.pck) {
    nlohmann::ordered_json pck = nlohmann::ordered_json::array();
    for (std::size_t p = 0; p < kPckPairs.size(); ++p) {
      pck.push_back({{"a", ModalityName(kModalities[kPckPairs[p][0]])},
                     {"b", ModalityName(kModalities[kPckPairs[p][1]])},
                     {"a_to_b", ev.pck[p].a_to_b},
                     {"b_to_a", ev.pck[p].b_to_a},
                     {"mean", ev.pck[p].mean}});
    }
    j["pck"] = {{"pairs", pck}, {"mean", ev.pck_mean}};
  }
  return j;
}

std::string Fmt(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

void ModelText(std::ostringstream& os, const char* title, const ModelEvaluation& ev,
               const EvalSelection& which) {
  os << "== " << title << " ==\n";
  if (which.retrieval) {
    os << "retrieval   source  target     R@1     R@5     mAP    MedR\n";
    auto line = [&](const std::string& s, const std::string& t, const RetrievalMetrics& m) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "            %-7s %-7s %7.2f %7.2f %7.4f %7.2f\n", s.c_str(),
                    t.c_str(), m.r1, m.r5, m.map, m.medr);
      os << buf;
    };
    for (const auto& p : ev.retrieval.pairs) {
      line(ModalityName(p.source), ModalityName(p.target), p.metrics);
    }
    line("average", "", ev.retrieval.average);
  }
  if (which.diagnostics) {
    const auto& d = ev.diagnostics;
    os << "diagnostics <R,D> " << Fmt("%.4f", d.rgb_depth) << "  <R,S> " << Fmt("%.4f", d.rgb_seg)
       << "  <D,S> " << Fmt("%.4f", d.depth_seg) << "  <R1,R2> "
       << Fmt("%.4f", d.rgb_rgb_mismatched) << "\n";
  }
  if (which.knn) {
    for (std::size_t m = 0; m < 3; ++m) {
      os << "knn " << ModalityName(kModalities[m]) << "  soft best "
         << Fmt("%.2f", ev.knn[m].best_accuracy) << " (k=" << ev.knn[m].best_k << ")  hard "
         << Fmt("%.2f", ev.knn_hard[m]) << "\n";
    }
  }
  if (which.pck) {
    for (std::size_t p = 0; p < kPckPairs.size(); ++p) {
      os << "pck@0 " << ModalityName(kModalities[kPckPairs[p][0]]) << "-"
         << ModalityName(kModalities[kPckPairs[p][1]]) << "  " << Fmt("%.2f", ev.pck[p].a_to_b)
         << " / " << Fmt("%.2f", ev.pck[p].b_to_a) << "  mean " << Fmt("%.2f", ev.pck[p].mean)
         << "\n";
    }
  }
}

}  // namespace

EvalReport Evaluate(const EncoderStack& stack, const std::vector<SceneTriplet>& index,
                    const std::vector<SceneTriplet>& query, const EvalSelection& which,
                    const EvalConfig& cfg) {
  ValidateEvalConfig(cfg);
  if (query.size() < 2) throw Error(ErrorCode::kTooFewScenes, "evaluation needs >= 2 scenes");
  EvalReport report;
  report.which = which;
  report.n_index = index.size();
  report.n_query = query.size();
  const SplitEmbeddings q = EmbedSplit(stack, query);
  SplitEmbeddings ix;
  if (which.knn) {
    if (index.empty()) throw Error(ErrorCode::kEmptyIndex, "k-NN needs an index split");
    ix = EmbedSplit(stack, index);
  }
  report.student = EvaluateOne(ix.pooled_student, q.pooled_student, q.dense_student, ix.labels,
                               q.labels, which, cfg);
  report.teacher = EvaluateOne(ix.pooled_teacher, q.pooled_teacher, q.dense_teacher, ix.labels,
                               q.labels, which, cfg);
  return report;
}

nlohmann::ordered_json ToJson(const RetrievalMetrics& m) {
  return {{"r1", m.r1}, {"r5", m.r5}, {"map", m.map}, {"medr", m.medr}};
}

nlohmann::ordered_json ToJson(const RetrievalReport& r) {
  nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
  for (const auto& p : r.pairs) {
    nlohmann::ordered_json e = ToJson(p.metrics);
    e["source"] = ModalityName(p.source);
    e["target"] = ModalityName(p.target);
    pairs.push_back(e);
  }
  return {{"pairs", pairs}, {"average", ToJson(r.average)}};
}

nlohmann::ordered_json ToJson(const DiagnosticReport& d) {
  return {{"rgb_depth", d.rgb_depth},
          {"rgb_seg", d.rgb_seg},
          {"depth_seg", d.depth_seg},
          {"cross_modal_mean", d.CrossModalMean()},
          {"rgb_rgb_mismatched", d.rgb_rgb_mismatched}};
}

nlohmann::ordered_json ToJson(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["n_index"] = r.n_index;
  j["n_query"] = r.n_query;
  j["student"] = ModelJson(r.student, r.which);
  j["teacher"] = ModelJson(r.teacher, r.which);
  return j;
}

std::string ToText(const EvalReport& r) {
  std::ostringstream os;
  ModelText(os, "student", r.student, r.which);
  ModelText(os, "teacher (untrained)", r.teacher, r.which);
  return os.str();
}

}  // namespace omnialign
