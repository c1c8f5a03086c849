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

#include "omnialign/cli.h"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "omnialign/config.h"
#include "omnialign/evalkit.h"
#include "omnialign/experiment.h"
#include "omnialign/imaging.h"
#include "omnialign/model.h"
#include "omnialign/optim.h"
#include "omnialign/synth.h"

namespace omnialign {

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIoError:
    case ErrorCode::kMalformedHeader:
    case ErrorCode::kTruncatedPayload:
    case ErrorCode::kMagicMismatch:
    case ErrorCode::kVersionUnsupported:
    case ErrorCode::kDataMissing:
      return kExitIo;
    case ErrorCode::kNonFiniteLoss:
    case ErrorCode::kZeroVector:
    case ErrorCode::kRankDeficient:
      return kExitNumeric;
    default:
      return kExitConfig;
  }
}

namespace {

namespace fs = std::filesystem;

std::string Hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string HashBytes(const std::vector<unsigned char>& bytes) { return Hex64(Fnv1a64(bytes)); }

std::string HashFile(const fs::path& path) { return HashBytes(ReadFileBytes(path)); }

void WriteText(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

// `--config FILE` plus one `--section.key VALUE` option per config key.
class ConfigOptions {
 public:
  void Register(CLI::App* cmd) {
    cmd->add_option("--config", file_, "config file (key = value lines)");
    for (const ConfigKeyInfo& info : ConfigKeys()) {
      const std::string name = info.section + "." + info.key;
      auto* opt = cmd->add_option("--" + name, values_[name], info.help);
      opt->default_str(info.default_value)->type_name("VALUE")->group("Config keys");
    }
  }

  RunConfig Resolve(const CLI::App* cmd) const {
    RunConfig cfg = file_.empty() ? RunConfig{} : LoadRunConfig(file_);
    for (const auto& [name, value] : values_) {
      if (cmd->count("--" + name) > 0) SetConfigValue(cfg, name, value);
    }
    return cfg;
  }

 private:
  std::string file_;
  std::map<std::string, std::string> values_;
};

int GenData(const RunConfig& cfg, const fs::path& out_dir, bool force, std::size_t count,
            std::ostream& out) {
  ValidateSceneConfig(cfg.train.data.scene, cfg.train.model.patch);
  if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !force) {
    throw Error(ErrorCode::kIoError,
                out_dir.string() + " exists and is not empty; pass --force to overwrite");
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + out_dir.string());

  std::vector<SceneTriplet> scenes(count);
  ParallelFor(count, ConfiguredThreads(),
              [&](std::size_t i) { scenes[i] = GenerateScene(cfg.train.data.scene, i); });

  const std::string config_text = SerializeRunConfig(cfg);
  WriteText(out_dir / "config.txt", config_text);
  nlohmann::ordered_json manifest;
  manifest["config_hash"] = HashBytes({config_text.begin(), config_text.end()});
  manifest["count"] = count;
  manifest["scenes"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < count; ++i) {
    const fs::path dir = out_dir / SceneDirName(i);
    WriteSceneDir(dir, scenes[i]);
    nlohmann::ordered_json files;
    for (const char* name : {"rgb.ppm", "depth.f32", "seg.pgm"}) files[name] = HashFile(dir / name);
    manifest["scenes"].push_back(
        {{"name", SceneDirName(i)}, {"label", scenes[i].label}, {"files", files}});
  }
  const std::string text = manifest.dump(2) + "\n";
  WriteText(out_dir / "manifest.json", text);
  out << text;
  return kExitOk;
}

ScalarMap ReadRawMap(const fs::path& path) {
  if (path.extension() == ".f32") return ReadF32Raw(path);
  return ReadPgm(path);
}

int Colorize(const fs::path& rgb_path, const fs::path& raw_path, const fs::path& out_path,
             std::size_t bins, std::size_t kernel, std::ostream& out) {
  const ImageRGB rgb = ReadPpm(rgb_path);
  const ScalarMap raw = ReadRawMap(raw_path);
  const ImageRGB colored = NaturalColorize(raw, rgb, bins, kernel);
  WritePpm(out_path, colored);
  out << out_path.string() << " " << HashFile(out_path) << "\n";
  return kExitOk;
}

int TrainCommand(const RunConfig& cfg, const fs::path& ckpt_path, const fs::path& log_path,
                 const fs::path& checkpoint_dir, std::ostream& out) {
  ValidateRunConfig(cfg);
  TrainConfig train = cfg.train;
  train.checkpoint_dir = checkpoint_dir;
  if (train.checkpoint_every > 0 && checkpoint_dir.empty()) {
    throw Error(ErrorCode::kConfigInvalid, "checkpoint_every needs --checkpoint-dir");
  }
  std::unique_ptr<std::ofstream> log;
  if (!log_path.empty()) {
    if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
    log = std::make_unique<std::ofstream>(log_path, std::ios::binary);
    if (!*log) throw Error(ErrorCode::kIoError, "cannot write " + log_path.string());
  }
  const auto scenes = LoadTrainScenes(train.data);
  const TrainResult result = Train(train, scenes, [&](const StepRecord& rec) {
    if (log) *log << StepRecordJson(rec) << "\n";
  });
  if (log) {
    log->close();
    if (!*log) throw Error(ErrorCode::kIoError, "write failed for " + log_path.string());
  }
  if (ckpt_path.has_parent_path()) fs::create_directories(ckpt_path.parent_path());
  WriteCheckpoint(ckpt_path, result.checkpoint);
  out << StepRecordJson(result.log.back()) << "\n";
  out << ckpt_path.string() << " " << HashFile(ckpt_path) << "\n";
  return kExitOk;
}

int EvalCommand(RunConfig cfg, const fs::path& ckpt_path, const fs::path& data_dir,
                const fs::path& report_path, const std::string& which_text, std::ostream& out) {
  const EvalSelection which = EvalSelection::Parse(which_text);
  ValidateEvalConfig(cfg.eval);
  const Checkpoint ckpt = ReadCheckpoint(ckpt_path);
  if (!data_dir.empty()) cfg.train.data.dir = data_dir;
  const auto& scene = cfg.train.data.scene;
  const std::size_t patch = ckpt.stack.config.patch;
  ValidateSceneConfig(scene, patch);
  if (scene.height % patch != 0 || scene.width % patch != 0) {
    throw Error(ErrorCode::kConfigInvalid, "scene size must be divisible by the patch size");
  }
  const auto query = LoadEvalScenes(cfg.train.data);
  std::vector<SceneTriplet> index;
  if (which.knn) index = LoadTrainScenes(cfg.train.data);
  const EvalReport report = Evaluate(ckpt.stack, index, query, which, cfg.eval);
  WriteText(report_path, ToJson(report).dump(2) + "\n");
  out << ToText(report);
  return kExitOk;
}

std::vector<double> ParseValues(const std::string& text) {
  std::vector<double> values;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    const std::string item = text.substr(start, comma - start);
    double v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size() ||
        !std::isfinite(v)) {
      throw Error(ErrorCode::kConfigInvalid, "bad sweep value '" + item + "'");
    }
    values.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return values;
}

int SweepCommand(const RunConfig& cfg, const std::string& param, const std::string& values_text,
                 const fs::path& out_dir, std::size_t jobs, std::ostream& out) {
  const std::vector<double> values = ParseValues(values_text);
  const auto points = RunSweep(cfg, param, values, jobs);
  const std::string text = FrontierText(points);
  nlohmann::ordered_json doc;
  doc["param"] = param;
  doc["config"] = SerializeRunConfig(cfg);
  doc["points"] = ToJson(points);
  WriteText(out_dir / "frontier.json", doc.dump(2) + "\n");
  WriteText(out_dir / "frontier.txt", text);
  out << text;
  return kExitOk;
}

int PcaCommand(const fs::path& ckpt_path, const fs::path& scene_dir, const std::string& prefix,
               std::size_t upscale, std::ostream& out) {
  const Checkpoint ckpt = ReadCheckpoint(ckpt_path);
  const SceneTriplet scene = ReadSceneDir(scene_dir);
  const std::size_t patch = ckpt.stack.config.patch;
  if (scene.rgb.height % patch != 0 || scene.rgb.width % patch != 0) {
    throw Error(ErrorCode::kDimensionMismatch, "scene size must be divisible by the patch size");
  }
  const SplitEmbeddings e = EmbedSplit(ckpt.stack, {scene});
  const std::size_t gh = scene.rgb.height / patch, gw = scene.rgb.width / patch;
  const std::size_t scale = upscale == 0 ? patch : upscale;
  const PcaImages frozen = PcaVisualize(e.dense_teacher[0], gh, gw, scale);
  const PcaImages adapted = PcaVisualize(e.dense_student[0], gh, gw, scale);
  for (const auto& [tag, images] : {std::pair{"frozen", &frozen}, std::pair{"adapted", &adapted}}) {
    for (Modality m : kModalities) {
      const fs::path path =
          prefix + "_" + tag + "_" + ModalityName(m) + ".ppm";
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      WritePpm(path, images->images[static_cast<std::size_t>(m)]);
      out << path.string() << " " << HashFile(path) << "\n";
    }
  }
  return kExitOk;
}

}  // namespace

int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-modal alignment of a toy encoder on synthetic scenes", "omnialign"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  ConfigOptions gen_cfg, train_cfg, eval_cfg, sweep_cfg, show_cfg;

  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset and print its manifest");
  gen_cfg.Register(gen);
  std::string gen_out;
  bool gen_force = false;
  std::size_t gen_count = 0;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_flag("--force", gen_force, "write into a non-empty directory");
  gen->add_option("--count", gen_count, "scenes to write (default data.n_train + data.n_eval)");

  auto* colorize = app.add_subcommand("colorize", "re-render a raw map with scene colors");
  std::string col_rgb, col_raw, col_out;
  std::size_t col_bins = kPaletteBins, col_kernel = kPaletteKernel;
  colorize->add_option("--rgb", col_rgb, "rgb image (PPM)")->required();
  colorize->add_option("--raw", col_raw, "raw map (PGM, or .f32)")->required();
  colorize->add_option("--out", col_out, "output image (PPM)")->required();
  colorize->add_option("--bins", col_bins, "intensity bins")->capture_default_str();
  colorize->add_option("--kernel", col_kernel, "smoothing kernel size")->capture_default_str();

  auto* train = app.add_subcommand("train", "train the student head");
  train_cfg.Register(train);
  std::string train_ckpt, train_log, train_ckpt_dir;
  train->add_option("--out-checkpoint", train_ckpt, "final checkpoint path")->required();
  train->add_option("--log", train_log, "per-step JSON lines");
  train->add_option("--checkpoint-dir", train_ckpt_dir, "directory for periodic checkpoints");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the held-out split");
  eval_cfg.Register(eval);
  std::string eval_ckpt, eval_data, eval_report, eval_which = "all";
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
  eval->add_option("--data", eval_data, "dataset directory (overrides data.dir)");
  eval->add_option("--report", eval_report, "JSON report path")->required();
  eval->add_option("--which", eval_which, "all, retrieval, diagnostics, knn or pck")
      ->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "train and evaluate once per parameter value");
  sweep_cfg.Register(sweep);
  std::string sweep_param, sweep_values, sweep_out;
  std::size_t sweep_jobs = 1;
  sweep->add_option("--param", sweep_param, "lambda_anchor or alpha_max")->required();
  sweep->add_option("--values", sweep_values, "comma-separated values")->required();
  sweep->add_option("--out", sweep_out, "output directory")->required();
  sweep->add_option("--jobs", sweep_jobs, "concurrent trainings")->capture_default_str();

  auto* pca = app.add_subcommand("pca", "PCA images of frozen and adapted dense features");
  std::string pca_ckpt, pca_scene, pca_prefix;
  std::size_t pca_upscale = 0;
  pca->add_option("--checkpoint", pca_ckpt, "checkpoint path")->required();
  pca->add_option("--scene", pca_scene, "scene directory")->required();
  pca->add_option("--out-prefix", pca_prefix, "output path prefix")->required();
  pca->add_option("--upscale", pca_upscale, "pixels per token (default: patch size)");

  auto* show = app.add_subcommand("config", "print the resolved configuration");
  show_cfg.Register(show);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) {
      const RunConfig cfg = gen_cfg.Resolve(gen);
      const std::size_t count =
          gen->count("--count") ? gen_count : cfg.train.data.n_train + cfg.train.data.n_eval;
      return GenData(cfg, gen_out, gen_force, count, out);
    }
    if (*colorize) return Colorize(col_rgb, col_raw, col_out, col_bins, col_kernel, out);
    if (*train) {
      return TrainCommand(train_cfg.Resolve(train), train_ckpt, train_log, train_ckpt_dir, out);
    }
    if (*eval) {
      return EvalCommand(eval_cfg.Resolve(eval), eval_ckpt, eval_data, eval_report, eval_which,
                         out);
    }
    if (*sweep) {
      return SweepCommand(sweep_cfg.Resolve(sweep), sweep_param, sweep_values, sweep_out,
                          sweep_jobs, out);
    }
    if (*pca) return PcaCommand(pca_ckpt, pca_scene, pca_prefix, pca_upscale, out);
    if (*show) {
      out << SerializeRunConfig(show_cfg.Resolve(show));
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return ExitCodeFor(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace omnialign
