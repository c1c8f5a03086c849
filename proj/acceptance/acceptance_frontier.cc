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

// Acceptance check 7: the lambda_anchor frontier. Usage:
//   acceptance_frontier [steps]
// Trains one model per lambda in {0, 1, 10, 100} on the default data with
// fixed seeds and checks that teacher similarity rises and cross-modal
// alignment falls as lambda grows.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "omnialign/config.h"
#include "omnialign/experiment.h"

namespace {

using namespace omnialign;

// Monotone up to at most one adjacent inversion no larger than `slack`.
// `sign` is +1 for nondecreasing, -1 for nonincreasing.
bool NearlyMonotone(const std::vector<double>& v, double sign, double slack, int* inversions,
                    double* worst) {
  *inversions = 0;
  *worst = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double drop = -sign * (v[i] - v[i - 1]);
    if (drop > 0) {
      ++*inversions;
      *worst = std::max(*worst, drop);
    }
  }
  return *inversions == 0 || (*inversions == 1 && *worst <= slack);
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  cfg.train.steps = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 1000;
  const std::vector<double> lambdas{0, 1, 10, 100};

  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<FrontierPoint> points = RunSweep(cfg, "lambda_anchor", lambdas, 1);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%s", FrontierText(points).c_str());

  std::vector<double> sim, align;
  for (const auto& p : points) {
    sim.push_back(p.teacher_similarity);
    align.push_back(p.alignment);
  }
  int sim_inv = 0, align_inv = 0;
  double sim_worst = 0, align_worst = 0;
  const bool sim_ok = NearlyMonotone(sim, +1, 0.02, &sim_inv, &sim_worst);
  const bool align_ok = NearlyMonotone(align, -1, 0.02, &align_inv, &align_worst);
  const bool pass = sim_ok && align_ok && seconds < 900.0;
  std::printf(
      "[%s]  7 lambda_anchor frontier: teacher similarity %.4f %.4f %.4f %.4f (%d inversions, "
      "worst %.4f); alignment %.4f %.4f %.4f %.4f (%d inversions, worst %.4f); tolerance one "
      "adjacent inversion <= 0.02; %zu steps per point, %.0f s (need < 900)\n",
      pass ? "PASS" : "FAIL", sim[0], sim[1], sim[2], sim[3], sim_inv, sim_worst, align[0],
      align[1], align[2], align[3], align_inv, align_worst, cfg.train.steps, seconds);
  return pass ? 0 : 1;
}
