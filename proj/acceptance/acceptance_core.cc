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

// Acceptance checks 1-6 and 8-10. Usage: acceptance_core [N ...]
// With no arguments every check runs. One PASS/FAIL line per check; the exit
// status is nonzero if any selected check fails.

#include <algorithm>
#include <cstdarg>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "omnialign/cli.h"
#include "omnialign/config.h"
#include "omnialign/evalkit.h"
#include "omnialign/imaging.h"
#include "omnialign/model.h"
#include "omnialign/numerics.h"
#include "omnialign/objective.h"
#include "omnialign/optim.h"
#include "omnialign/synth.h"

namespace {

using namespace omnialign;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Format(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
std::string Format(const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  return buf;
}

Tensor2 Gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Tensor2 t(rows, cols);
  for (double& v : t.data()) v = rng.normal();
  return t;
}

Tensor2 UnitGaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Tensor2 t = Gaussian(rows, cols, seed);
  for (std::size_t i = 0; i < rows; ++i) {
    double n = 0;
    for (std::size_t k = 0; k < cols; ++k) n += t(i, k) * t(i, k);
    for (std::size_t k = 0; k < cols; ++k) t(i, k) /= std::sqrt(n);
  }
  return t;
}

double RowCos(const Tensor2& a, std::size_t i, const Tensor2& b, std::size_t j) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t k = 0; k < a.cols(); ++k) {
    ab += a(i, k) * b(j, k);
    aa += a(i, k) * a(i, k);
    bb += b(j, k) * b(j, k);
  }
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

// ---- 1: colorization ------------------------------------------------------

// Rescans the whole map for every pixel and every bin of its window. Each
// bin is summed on its own before the window adds the bins up.
ImageRGB StraightLineColorize(const ScalarMap& raw, const ImageRGB& rgb) {
  const int bins = 64;
  const double eps = 1e-6;
  const std::size_t n = raw.values.size();
  const double mn = *std::min_element(raw.values.begin(), raw.values.end());
  const double mx = *std::max_element(raw.values.begin(), raw.values.end());
  auto bin_of = [&](std::size_t p) {
    const double b = std::floor((raw.values[p] - mn) / (mx - mn + eps) * bins);
    return static_cast<int>(std::clamp(b, 0.0, bins - 1.0));
  };
  ImageRGB out(raw.height, raw.width);
  for (std::size_t p = 0; p < n; ++p) {
    const int b = bin_of(p);
    double sum[3] = {0, 0, 0}, count = 0;
    for (int j = b - 2; j <= b + 2; ++j) {
      if (j < 0 || j >= bins) continue;
      double bin_sum[3] = {0, 0, 0}, bin_count = 0;
      for (std::size_t q = 0; q < n; ++q) {
        if (bin_of(q) != j) continue;
        for (int c = 0; c < 3; ++c) bin_sum[c] += rgb.pixels[q * 3 + c];
        bin_count += 1;
      }
      for (int c = 0; c < 3; ++c) sum[c] += bin_sum[c];
      count += bin_count;
    }
    for (int c = 0; c < 3; ++c) out.pixels[p * 3 + c] = std::clamp(sum[c] / (count + eps), 0.0, 1.0);
  }
  return out;
}

Outcome CheckColorization() {
  Rng rng(2026);
  std::size_t mismatches = 0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t h = 1 + rng.next_below(32), w = 1 + rng.next_below(32);
    ScalarMap raw(h, w);
    ImageRGB rgb(h, w);
    for (double& v : rgb.pixels) v = rng.next_unit();
    if (k == 0) {
      for (double& v : raw.values) v = 4.25;
    } else if (k == 1) {
      for (std::size_t i = 0; i < raw.values.size(); ++i) raw.values[i] = i % 2 ? -3.0 : 7.0;
    } else {
      const double scale = std::exp(rng.uniform(-3, 3));
      for (double& v : raw.values) v = scale * rng.normal();
    }
    mismatches += NaturalColorize(raw, rgb) == StraightLineColorize(raw, rgb) ? 0 : 1;
  }
  return {mismatches == 0, Format("%zu/100 pairs differ (tolerance: exact)", mismatches)};
}

// ---- 2: closed forms --------------------------------------------------------

Outcome CheckClosedForms() {
  const Tensor2 same(2, 3, {1, 0, 0, 1, 0, 0});
  const Tensor2 eye(2, 2, {1, 0, 0, 1});
  const double e_same = std::abs(InfoNce(same, same, 1.0) - std::log(2.0));
  const double e_eye = std::abs(InfoNce(eye, eye, 1.0) - std::log1p(std::exp(-1.0)));

  const Tensor2 a(1, 2, {1, 0}), ortho(1, 2, {0, 1}), anti(1, 2, {-1, 0});
  const bool anchors = AnchorLoss(a, a) == 0.0 && AnchorLoss(a, ortho) == 1.0 &&
                       AnchorLoss(a, anti) == 2.0;

  // total = align + lambda * anchor on a perturbed model.
  ModelConfig mc;
  mc.patch = 4;
  mc.embed_dim = 8;
  mc.frozen_layers = 1;
  mc.adapter_layers = 2;
  EncoderStack stack = InitStack(mc);
  std::vector<double> flat = TrainableParameters(stack);
  Rng rng(5);
  for (double& v : flat) v += 0.3 * rng.normal();
  SetTrainableParameters(stack, flat);
  FeatureBatch batch(3);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t m = 0; m < 3; ++m) batch[i].trunk[m] = Gaussian(9, 8, 100 + 3 * i + m);
    batch[i].dense_indices = SampleDenseIndices(rng, 9, 4);
  }
  double e_total = 0;
  for (double lambda : {0.0, 1.0, 10.0, 100.0}) {
    LossConfig cfg;
    cfg.lambda_anchor = lambda;
    const LossBreakdown l = EvaluateLoss(stack, batch, InitialLogTau(cfg), cfg);
    e_total = std::max(e_total, std::abs(l.total - (l.align + lambda * l.anchor)));
  }
  const bool pass = e_same <= 1e-9 && e_eye <= 1e-9 && anchors && e_total <= 1e-12;
  return {pass, Format("|ln2 err| %.1e, |ln(1+e^-1) err| %.1e (tol 1e-9); anchor {0,1,2} %s; "
                       "total err %.1e (tol 1e-12)",
                       e_same, e_eye, anchors ? "exact" : "WRONG", e_total)};
}

// ---- 3: gradient check ------------------------------------------------------

Outcome CheckGradients() {
  SceneConfig sc;
  sc.height = 16;
  sc.width = 16;
  ModelConfig mc;
  mc.patch = 4;
  mc.embed_dim = 8;
  mc.adapter_layers = 2;
  EncoderStack stack = InitStack(mc);
  std::vector<double> flat = TrainableParameters(stack);
  Rng rng(11);
  for (double& v : flat) v += 0.2 * rng.normal();
  SetTrainableParameters(stack, flat);

  FeatureBatch batch(2);
  for (std::size_t i = 0; i < 2; ++i) {
    batch[i].trunk = EvalTrunk(stack, GenerateScene(sc, i));
    batch[i].dense_indices = SampleDenseIndices(rng, batch[i].trunk[0].rows(), 8);
  }
  double worst = 0;
  std::size_t checked = 0;
  bool all = true;
  for (bool shared : {true, false}) {
    LossConfig cfg;
    cfg.shared_tau = shared;
    const GradCheckReport r = GradCheck(stack, batch, InitialLogTau(cfg), cfg, 1e-5, 1e-4);
    worst = std::max(worst, r.max_rel_error);
    checked += r.entries.size();
    all = all && r.passed;
  }
  return {all && worst < 1e-4,
          Format("%zu derivatives, max rel error %.2e (tol 1e-4, h 1e-5)", checked, worst)};
}

// ---- 4: masked dense InfoNCE -----------------------------------------------

double MaskedDirection(const Tensor2& a, const Tensor2& b, double tau, std::size_t g) {
  double total = 0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double z = 0;
    for (std::size_t j = 0; j < b.rows(); ++j) {
      if (j != i && j / g == i / g) continue;
      z += std::exp(RowCos(a, i, b, j) / tau);
    }
    total += std::log(z) - RowCos(a, i, b, i) / tau;
  }
  return total / static_cast<double>(a.rows());
}

double MaskedOracle(const std::array<Tensor2, 3>& t, std::size_t g, double tau) {
  // Pairs (rgb, seg), (seg, depth), (depth, rgb) with t ordered rgb, depth, seg.
  const std::pair<int, int> pairs[3] = {{0, 2}, {2, 1}, {1, 0}};
  double sum = 0;
  for (const auto& [x, y] : pairs) {
    sum += 0.5 * (MaskedDirection(t[x], t[y], tau, g) + MaskedDirection(t[y], t[x], tau, g));
  }
  return sum / 3.0;
}

Outcome CheckDense() {
  double worst = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const std::array<Tensor2, 3> tok{UnitGaussian(12, 8, 10 * s), UnitGaussian(12, 8, 10 * s + 1),
                                     UnitGaussian(12, 8, 10 * s + 2)};
    for (double tau : {0.07, 0.5}) {
      worst = std::max(worst, std::abs(DenseAlignLoss(tok, 4, tau, true) - MaskedOracle(tok, 4, tau)));
    }
  }
  const std::array<Tensor2, 3> one{UnitGaussian(4, 8, 1), UnitGaussian(4, 8, 2),
                                   UnitGaussian(4, 8, 3)};
  const double single = DenseAlignLoss(one, 4, 0.07, true);
  return {worst <= 1e-10 && single == 0.0,
          Format("B=3 max |err| %.1e (tol 1e-10); B=1 loss %g (want exactly 0)", worst, single)};
}

// ---- 5: retrieval metrics ---------------------------------------------------

RetrievalMetrics FullMatrixOracle(const Tensor2& q, const Tensor2& g) {
  const std::size_t n = q.rows();
  std::vector<std::size_t> ranks(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double truth = RowCos(q, i, g, i);
    std::size_t r = 0;
    for (std::size_t j = 0; j < n; ++j) r += RowCos(q, i, g, j) >= truth - 1e-6 ? 1 : 0;
    ranks[i] = r;
  }
  RetrievalMetrics m;
  for (std::size_t r : ranks) {
    m.r1 += r == 1 ? 1 : 0;
    m.r5 += r <= 5 ? 1 : 0;
    m.map += 1.0 / static_cast<double>(r);
  }
  m.r1 = 100.0 * m.r1 / n;
  m.r5 = 100.0 * m.r5 / n;
  m.map /= n;
  std::sort(ranks.begin(), ranks.end());
  m.medr = n % 2 ? ranks[n / 2] : 0.5 * (ranks[n / 2 - 1] + ranks[n / 2]);
  return m;
}

Outcome CheckRetrieval() {
  std::size_t bad = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Tensor2 q = Gaussian(64, 16, 1000 + s);
    Tensor2 g = Gaussian(64, 16, 2000 + s);
    // Pull the gallery toward the queries so ranks spread over 1..64.
    for (std::size_t i = 0; i < g.data().size(); ++i) g.data()[i] += 0.8 * q.data()[i];
    const RetrievalMetrics want = FullMatrixOracle(q, g);
    for (std::size_t batch : {1, 7, 2048}) {
      EvalConfig cfg;
      cfg.batch = batch;
      const RetrievalMetrics got = RetrievalEval(q, g, cfg);
      bad += got.r1 == want.r1 && got.r5 == want.r5 && got.map == want.map &&
                     got.medr == want.medr
                 ? 0
                 : 1;
    }
  }
  const std::vector<double> tie{0.5, 0.5};
  const std::size_t tie_rank = RankOfTruth(tie, 0, 1e-6);
  return {bad == 0 && tie_rank == 2,
          Format("%zu/150 (instance, batch) mismatches (tolerance: exact); tie rank %zu (want 2)",
                 bad, tie_rank)};
}

// ---- 6: end-to-end alignment --------------------------------------------------

Outcome CheckAlignment() {
  const RunConfig cfg;
  const auto t0 = std::chrono::steady_clock::now();
  const auto train = LoadTrainScenes(cfg.train.data);
  const auto held_out = LoadEvalScenes(cfg.train.data);
  const TrainResult trained = Train(cfg.train, train);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EvalSelection which = EvalSelection::Parse("all");
  which.knn = which.pck = false;
  const EvalReport after = Evaluate(trained.checkpoint.stack, {}, held_out, which, cfg.eval);
  // The teacher column of the same report is the untrained student.
  const double d_r1 = after.student.retrieval.average.r1 - after.teacher.retrieval.average.r1;
  const double d_cross =
      after.student.diagnostics.CrossModalMean() - after.teacher.diagnostics.CrossModalMean();
  const double d_mis =
      after.student.diagnostics.rgb_rgb_mismatched - after.teacher.diagnostics.rgb_rgb_mismatched;
  const bool pass = d_r1 >= 30.0 && d_cross >= 0.2 && d_mis <= 0.15 && seconds < 300.0;
  return {pass, Format("R@1 %.2f -> %.2f (delta %+.2f, need >= 30); cross-modal %.4f -> %.4f "
                       "(delta %+.4f, need >= 0.2); mismatched %.4f -> %.4f (delta %+.4f, need <= "
                       "0.15); train %.0f s (need < 300)",
                       after.teacher.retrieval.average.r1, after.student.retrieval.average.r1, d_r1,
                       after.teacher.diagnostics.CrossModalMean(),
                       after.student.diagnostics.CrossModalMean(), d_cross,
                       after.teacher.diagnostics.rgb_rgb_mismatched,
                       after.student.diagnostics.rgb_rgb_mismatched, d_mis, seconds)};
}

// ---- 8: mixup -----------------------------------------------------------------

Outcome CheckMixup() {
  Rng rng(8);
  ImageRGB x(16, 16), y(16, 16);
  for (double& v : x.pixels) v = rng.next_unit();
  for (double& v : y.pixels) v = rng.next_unit();
  const bool ends = ModalityMixup(x, y, 0.0) == x && ModalityMixup(x, y, 1.0) == y;
  Rng draws(42);
  double sum = 0;
  for (int i = 0; i < 100000; ++i) sum += SampleAlpha(draws, 0.5);
  const double mean = sum / 100000.0;
  return {ends && std::abs(mean - 0.25) <= 0.005,
          Format("endpoints %s; mean alpha %.5f (want 0.25 +- 0.005)", ends ? "bit-exact" : "DIFFER",
                 mean)};
}

// ---- 9: determinism -------------------------------------------------------------

int Cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "omnialign");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = RunCli(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str();
  if (code != 0) std::fprintf(stderr, "%s", e.str().c_str());
  return code;
}

std::string Bytes(const fs::path& p) {
  const auto b = ReadFileBytes(p);
  return {b.begin(), b.end()};
}

Outcome CheckDeterminism() {
  const fs::path dir = fs::temp_directory_path() / "omnialign_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::vector<std::string> cfg{"--train.steps", "25", "--data.n_train", "32",
                                     "--data.n_eval", "16"};
  bool ok = true;
  for (const char* tag : {"a", "b"}) {
    std::vector<std::string> args{"train", "--out-checkpoint", (dir / (std::string(tag) + ".ckpt")).string(),
                                  "--log", (dir / (std::string(tag) + ".jsonl")).string()};
    args.insert(args.end(), cfg.begin(), cfg.end());
    ok = ok && Cli(args) == 0;
  }
  for (const char* tag : {"a", "b"}) {
    std::vector<std::string> args{"eval", "--checkpoint", (dir / "a.ckpt").string(), "--report",
                                  (dir / (std::string(tag) + ".json")).string()};
    args.insert(args.end(), cfg.begin(), cfg.end());
    ok = ok && Cli(args) == 0;
  }
  if (!ok) return {false, "a command failed"};
  const bool ckpt = Bytes(dir / "a.ckpt") == Bytes(dir / "b.ckpt");
  const bool log = Bytes(dir / "a.jsonl") == Bytes(dir / "b.jsonl");
  const bool report = Bytes(dir / "a.json") == Bytes(dir / "b.json");
  const std::string hash = [&] {
    const auto b = ReadFileBytes(dir / "a.ckpt");
    return Format("%016llx", static_cast<unsigned long long>(Fnv1a64(b)));
  }();
  fs::remove_all(dir);
  return {ckpt && log && report,
          Format("checkpoints %s (fnv %s), logs %s, eval reports %s", ckpt ? "identical" : "DIFFER",
                 hash.c_str(), log ? "identical" : "DIFFER", report ? "identical" : "DIFFER")};
}

// ---- 10: PCK and k-NN -------------------------------------------------------------

Outcome CheckPckKnn() {
  const Tensor2 a = Gaussian(16, 8, 3);
  Tensor2 shifted(16, 8);
  for (std::size_t t = 0; t < 16; ++t) {
    for (std::size_t k = 0; k < 8; ++k) shifted((t + 1) % 16, k) = a(t, k);
  }
  const double self = PckAtZero(a, a).mean, shift = PckAtZero(a, shifted).mean;
  std::size_t disagree = 0;
  EvalConfig cfg;
  cfg.knn_ks = {1};
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Tensor2 index = Gaussian(30, 8, 500 + s), query = Gaussian(12, 8, 600 + s);
    Rng rng(s);
    std::vector<int> labels(30), qlabels(12);
    for (int& l : labels) l = static_cast<int>(rng.next_below(4));
    for (int& l : qlabels) l = static_cast<int>(rng.next_below(4));
    const double soft = KnnSoftVote(index, labels, query, qlabels, cfg).best_accuracy;
    disagree += soft == KnnHard(index, labels, query, qlabels, false) ? 0 : 1;
  }
  return {self == 100.0 && shift == 0.0 && disagree == 0,
          Format("pck(A,A) %.1f (want 100), cyclic shift %.1f (want 0); soft k=1 vs hard: "
                 "%zu/20 disagree",
                 self, shift, disagree)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<const char*, std::function<Outcome()>>> checks = {
      {1, {"colorization oracle", CheckColorization}},
      {2, {"loss closed forms", CheckClosedForms}},
      {3, {"gradient check", CheckGradients}},
      {4, {"masked dense InfoNCE", CheckDense}},
      {5, {"retrieval metrics oracle", CheckRetrieval}},
      {6, {"end-to-end alignment", CheckAlignment}},
      {8, {"mixup endpoints and statistics", CheckMixup}},
      {9, {"determinism", CheckDeterminism}},
      {10, {"PCK and k-NN properties", CheckPckKnn}},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty()) {
    for (const auto& [id, c] : checks) selected.push_back(id);
  }
  int failed = 0;
  for (int id : selected) {
    const auto it = checks.find(id);
    if (it == checks.end()) {
      std::fprintf(stderr, "unknown check %d\n", id);
      return 2;
    }
    Outcome o;
    try {
      o = it->second.second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, it->second.first, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
