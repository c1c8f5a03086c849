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

#include "omnialign/config.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "omnialign/error.h"

namespace omnialign {
namespace {

[[noreturn]] void Invalid(const std::string& why) { throw Error(ErrorCode::kConfigInvalid, why); }

std::string_view Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double ParseDouble(std::string_view s) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    Invalid("not a finite number: '" + std::string(s) + "'");
  }
  return v;
}

std::uint64_t ParseUnsigned(std::string_view s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    Invalid("not a nonnegative integer: '" + std::string(s) + "'");
  }
  return v;
}

bool ParseBool(std::string_view s) {
  if (s == "true") return true;
  if (s == "false") return false;
  Invalid("expected true or false, got '" + std::string(s) + "'");
}

std::vector<std::string_view> SplitCommas(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    parts.push_back(Trim(s.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return parts;
}

Range ParseRange(std::string_view s) {
  const auto parts = SplitCommas(s);
  if (parts.size() != 2) Invalid("expected 'lo,hi', got '" + std::string(s) + "'");
  const Range r{ParseDouble(parts[0]), ParseDouble(parts[1])};
  if (r.lo > r.hi) Invalid("range lower bound exceeds upper bound: '" + std::string(s) + "'");
  return r;
}

std::vector<std::size_t> ParseList(std::string_view s) {
  std::vector<std::size_t> out;
  for (std::string_view part : SplitCommas(s)) out.push_back(ParseUnsigned(part));
  return out;
}

std::string FormatDouble(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string FormatRange(const Range& r) { return FormatDouble(r.lo) + "," + FormatDouble(r.hi); }

std::string FormatList(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Field {
  const char* section;
  const char* key;
  const char* help;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

#define OA_DOUBLE(expr)                                                     \
  [](const RunConfig& c) { return FormatDouble(c.expr); },                  \
      [](RunConfig& c, std::string_view v) { c.expr = ParseDouble(v); }
#define OA_UNSIGNED(expr)                                                   \
  [](const RunConfig& c) { return std::to_string(c.expr); },                \
      [](RunConfig& c, std::string_view v) {                                \
        c.expr = static_cast<decltype(c.expr)>(ParseUnsigned(v));           \
      }
#define OA_BOOL(expr)                                                       \
  [](const RunConfig& c) { return std::string(c.expr ? "true" : "false"); }, \
      [](RunConfig& c, std::string_view v) { c.expr = ParseBool(v); }
#define OA_RANGE(expr)                                                      \
  [](const RunConfig& c) { return FormatRange(c.expr); },                   \
      [](RunConfig& c, std::string_view v) { c.expr = ParseRange(v); }

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = {
      {"model", "patch", "patch side in pixels", OA_UNSIGNED(train.model.patch)},
      {"model", "embed_dim", "token width D", OA_UNSIGNED(train.model.embed_dim)},
      {"model", "frozen_layers", "frozen residual blocks", OA_UNSIGNED(train.model.frozen_layers)},
      {"model", "adapter_layers", "trainable head blocks", OA_UNSIGNED(train.model.adapter_layers)},
      {"model", "adapter_on_top", "train identity-initialized layers after the teacher head",
       OA_BOOL(train.model.adapter_on_top)},
      {"model", "seed", "weight initialization seed", OA_UNSIGNED(train.model.seed)},

      {"train", "steps", "optimizer steps", OA_UNSIGNED(train.steps)},
      {"train", "batch_size", "scenes per step", OA_UNSIGNED(train.batch_size)},
      {"train", "seed", "batch and augmentation seed", OA_UNSIGNED(train.seed)},
      {"train", "alpha_max", "upper bound of the mixup coefficient", OA_DOUBLE(train.alpha_max)},
      {"train", "lr", "AdamW learning rate", OA_DOUBLE(train.adamw.lr)},
      {"train", "beta1", "AdamW first-moment decay", OA_DOUBLE(train.adamw.beta1)},
      {"train", "beta2", "AdamW second-moment decay", OA_DOUBLE(train.adamw.beta2)},
      {"train", "eps", "AdamW epsilon", OA_DOUBLE(train.adamw.eps)},
      {"train", "weight_decay", "decoupled weight decay", OA_DOUBLE(train.adamw.weight_decay)},
      {"train", "checkpoint_every", "steps between checkpoints, 0 = off",
       OA_UNSIGNED(train.checkpoint_every)},
      {"train", "brightness_delta", "additive brightness range",
       OA_RANGE(train.augment.brightness_delta)},
      {"train", "saturation_scale", "saturation factor range",
       OA_RANGE(train.augment.saturation_scale)},
      {"train", "hue_delta", "hue shift range, in turns", OA_RANGE(train.augment.hue_delta)},
      {"train", "contrast_scale", "contrast factor range", OA_RANGE(train.augment.contrast_scale)},

      {"loss", "lambda_anchor", "weight of the teacher anchor", OA_DOUBLE(train.loss.lambda_anchor)},
      {"loss", "tau_init", "initial temperature", OA_DOUBLE(train.loss.tau_init)},
      {"loss", "tau_min", "temperature lower clip", OA_DOUBLE(train.loss.tau_min)},
      {"loss", "tau_max", "temperature upper clip", OA_DOUBLE(train.loss.tau_max)},
      {"loss", "n_dense", "dense tokens sampled per image", OA_UNSIGNED(train.loss.n_dense)},
      {"loss", "dense_weight", "share of the dense terms", OA_DOUBLE(train.loss.dense_weight)},
      {"loss", "mask_intra_image", "drop same-scene dense negatives",
       OA_BOOL(train.loss.mask_intra_image)},
      {"loss", "shared_tau", "one temperature for pooled and dense terms",
       OA_BOOL(train.loss.shared_tau)},

      {"data", "dir", "scene directory; empty generates scenes in memory",
       [](const RunConfig& c) { return c.train.data.dir.string(); },
       [](RunConfig& c, std::string_view v) { c.train.data.dir = std::string(v); }},
      {"data", "n_train", "training scenes", OA_UNSIGNED(train.data.n_train)},
      {"data", "n_eval", "held-out scenes", OA_UNSIGNED(train.data.n_eval)},
      {"data", "seed", "scene generator seed", OA_UNSIGNED(train.data.scene.seed)},
      {"data", "height", "scene height in pixels", OA_UNSIGNED(train.data.scene.height)},
      {"data", "width", "scene width in pixels", OA_UNSIGNED(train.data.scene.width)},
      {"data", "n_objects_min", "fewest objects per scene", OA_UNSIGNED(train.data.scene.n_objects_min)},
      {"data", "n_objects_max", "most objects per scene", OA_UNSIGNED(train.data.scene.n_objects_max)},
      {"data", "texture_amplitude", "background stripe amplitude",
       OA_DOUBLE(train.data.scene.texture_amplitude)},
      {"data", "texture_theta", "background stripe orientation, radians",
       OA_DOUBLE(train.data.scene.texture_theta)},
      {"data", "texture_period", "background stripe period, pixels",
       OA_DOUBLE(train.data.scene.texture_period)},
      {"data", "relief_amplitude", "depth ridge amplitude", OA_DOUBLE(train.data.scene.relief_amplitude)},
      {"data", "shading", "brightness change per unit depth", OA_DOUBLE(train.data.scene.shading)},
      {"data", "noise_sigma", "per-pixel rgb noise", OA_DOUBLE(train.data.scene.noise_sigma)},

      {"eval", "batch", "query rows per similarity block", OA_UNSIGNED(eval.batch)},
      {"eval", "tie_eps", "similarity tie tolerance", OA_DOUBLE(eval.tie_eps)},
      {"eval", "knn_tau", "k-NN soft vote temperature", OA_DOUBLE(eval.knn_tau)},
      {"eval", "knn_ks", "k values for soft k-NN",
       [](const RunConfig& c) { return FormatList(c.eval.knn_ks); },
       [](RunConfig& c, std::string_view v) { c.eval.knn_ks = ParseList(v); }},
      {"eval", "pairing_seed", "seed of the mismatched-scene pairing", OA_UNSIGNED(eval.pairing_seed)},
  };
  return fields;
}

#undef OA_DOUBLE
#undef OA_UNSIGNED
#undef OA_BOOL
#undef OA_RANGE

const Field& FindField(std::string_view section, std::string_view key) {
  for (const Field& f : Fields()) {
    if (section == f.section && key == f.key) return f;
  }
  Invalid("unknown key '" + std::string(section) + "." + std::string(key) + "'");
}

std::pair<std::string_view, std::string_view> SplitDotted(std::string_view dotted) {
  const auto dot = dotted.find('.');
  if (dot == std::string_view::npos) {
    Invalid("expected section.key, got '" + std::string(dotted) + "'");
  }
  return {dotted.substr(0, dot), dotted.substr(dot + 1)};
}

}  // namespace

const std::vector<ConfigKeyInfo>& ConfigKeys() {
  static const std::vector<ConfigKeyInfo> keys = [] {
    std::vector<ConfigKeyInfo> out;
    const RunConfig defaults;
    for (const Field& f : Fields()) out.push_back({f.section, f.key, f.get(defaults), f.help});
    return out;
  }();
  return keys;
}

RunConfig ParseRunConfig(std::string_view text) {
  RunConfig cfg;
  std::string section;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line(raw);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = Trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    try {
      if (line.front() == '[') {
        if (line.back() != ']') Invalid("unterminated section header");
        section = std::string(Trim(line.substr(1, line.size() - 2)));
        if (section != "model" && section != "train" && section != "loss" && section != "data" &&
            section != "eval") {
          Invalid("unknown section [" + section + "]");
        }
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) Invalid("expected key = value");
      if (section.empty()) Invalid("key outside of any section");
      const std::string key(Trim(line.substr(0, eq)));
      const Field& f = FindField(section, key);
      if (!seen.insert(section + "." + key).second) Invalid("repeated key " + section + "." + key);
      f.set(cfg, Trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kConfigInvalid) throw;
      const std::string msg = e.what();
      const std::string prefix = std::string(ErrorCodeName(ErrorCode::kConfigInvalid)) + ": ";
      Invalid(where + msg.substr(msg.rfind(prefix, 0) == 0 ? prefix.size() : 0));
    }
  }
  return cfg;
}

RunConfig LoadRunConfig(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return ParseRunConfig(text.str());
}

std::string SerializeRunConfig(const RunConfig& cfg) {
  std::string out;
  std::string section;
  for (const Field& f : Fields()) {
    if (section != f.section) {
      if (!section.empty()) out += "\n";
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += std::string(f.key) + " = " + f.get(cfg) + "\n";
  }
  return out;
}

void SetConfigValue(RunConfig& cfg, std::string_view dotted_key, std::string_view value) {
  const auto [section, key] = SplitDotted(dotted_key);
  FindField(section, key).set(cfg, Trim(value));
}

std::string GetConfigValue(const RunConfig& cfg, std::string_view dotted_key) {
  const auto [section, key] = SplitDotted(dotted_key);
  return FindField(section, key).get(cfg);
}

void ValidateRunConfig(const RunConfig& cfg) {
  ValidateTrainConfig(cfg.train);
  ValidateEvalConfig(cfg.eval);
}

}  // namespace omnialign
