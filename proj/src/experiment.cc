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

#include "omnialign/experiment.h"

#include <cstdio>

#include "omnialign/error.h"
#include "omnialign/evalkit.h"

namespace omnialign {

double TeacherSimilarity(const EncoderStack& stack, const std::vector<SceneTriplet>& probe) {
  if (probe.empty()) throw Error(ErrorCode::kTooFewScenes, "empty probe batch");
  const SplitEmbeddings e = EmbedSplit(stack, probe);
  double sum = 0;
  for (std::size_t m = 0; m < 3; ++m)
    for (std::size_t i = 0; i < probe.size(); ++i)
      sum += Dot(e.pooled_student[m].row(i), e.pooled_teacher[m].row(i));
  return sum / static_cast<double>(3 * probe.size());
}

void SetSweepParam(RunConfig& cfg, std::string_view param, double value) {
  if (param == "lambda_anchor") {
    cfg.train.loss.lambda_anchor = value;
  } else if (param == "alpha_max") {
    cfg.train.alpha_max = value;
  } else {
    throw Error(ErrorCode::kConfigInvalid,
                "cannot sweep '" + std::string(param) + "'; use lambda_anchor or alpha_max");
  }
}

FrontierPoint RunFrontierPoint(const RunConfig& cfg, std::string_view param, double value,
                               const std::vector<SceneTriplet>& train,
                               const std::vector<SceneTriplet>& probe) {
  RunConfig run = cfg;
  SetSweepParam(run, param, value);
  ValidateRunConfig(run);
  const TrainResult trained = Train(run.train, train);
  EvalSelection which = EvalSelection::Parse("all");
  which.knn = false;
  which.pck = false;
  const EvalReport report = Evaluate(trained.checkpoint.stack, {}, probe, which, run.eval);

  FrontierPoint p;
  p.param = std::string(param);
  p.value = value;
  p.alignment = report.student.diagnostics.CrossModalMean();
  p.discernibility = 1.0 - report.student.diagnostics.rgb_rgb_mismatched;
  p.teacher_similarity = TeacherSimilarity(trained.checkpoint.stack, probe);
  p.r1 = report.student.retrieval.average.r1;
  p.final_loss = trained.log.back().loss.total;
  return p;
}

std::vector<FrontierPoint> RunSweep(const RunConfig& cfg, std::string_view param,
                                    const std::vector<double>& values, std::size_t jobs) {
  if (values.empty()) throw Error(ErrorCode::kConfigInvalid, "sweep needs at least one value");
  for (double v : values) {
    RunConfig probe_cfg = cfg;
    SetSweepParam(probe_cfg, param, v);
    ValidateRunConfig(probe_cfg);
  }
  const auto train = LoadTrainScenes(cfg.train.data);
  const auto probe = LoadEvalScenes(cfg.train.data);
  std::vector<FrontierPoint> points(values.size());
  ParallelFor(values.size(), std::max<std::size_t>(jobs, 1), [&](std::size_t i) {
    points[i] = RunFrontierPoint(cfg, param, values[i], train, probe);
  });
  return points;
}

nlohmann::ordered_json ToJson(const std::vector<FrontierPoint>& points) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& p : points) {
    rows.push_back({{"param", p.param},
                    {"value", p.value},
                    {"alignment", p.alignment},
                    {"discernibility", p.discernibility},
                    {"teacher_similarity", p.teacher_similarity},
                    {"r1", p.r1},
                    {"final_loss", p.final_loss}});
  }
  return rows;
}

std::string FrontierText(const std::vector<FrontierPoint>& points) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-14s %10s %10s %10s %10s %8s\n",
                points.empty() ? "value" : points.front().param.c_str(), "align", "discern",
                "teacher", "R@1", "loss");
  out += line;
  for (const auto& p : points) {
    std::snprintf(line, sizeof line, "%-14g %10.4f %10.4f %10.4f %10.2f %8.4f\n", p.value,
                  p.alignment, p.discernibility, p.teacher_similarity, p.r1, p.final_loss);
    out += line;
  }
  return out;
}

}  // namespace omnialign
