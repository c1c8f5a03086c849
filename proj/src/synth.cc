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

#include "omnialign/synth.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "omnialign/error.h"

namespace omnialign {

const char* ModalityName(Modality m) {
  switch (m) {
    case Modality::kRgb: return "rgb";
    case Modality::kDepth: return "depth";
    case Modality::kSeg: return "seg";
  }
  return "?";
}

std::vector<std::array<double, 3>> SceneConfig::DefaultBackgroundPalette() {
  return {{0.55, 0.50, 0.45}, {0.40, 0.45, 0.55}, {0.45, 0.55, 0.40},
          {0.60, 0.58, 0.52}, {0.35, 0.35, 0.38}, {0.58, 0.45, 0.50}};
}

void ValidateSceneConfig(const SceneConfig& cfg, std::size_t min_side) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::kConfigInvalid, why); };
  if (cfg.height < std::max<std::size_t>(1, min_side) ||
      cfg.width < std::max<std::size_t>(1, min_side)) {
    fail("scene dimensions smaller than " + std::to_string(min_side));
  }
  if (cfg.n_objects_min < 1) fail("n_objects_min must be >= 1");
  if (cfg.n_objects_max < cfg.n_objects_min) fail("n_objects_max < n_objects_min");
  if (cfg.n_objects_max > 200) fail("n_objects_max must be <= 200");
  if (cfg.background_palette.empty()) fail("background palette is empty");
  if (!(cfg.texture_amplitude >= 0.0) || !(cfg.noise_sigma >= 0.0) ||
      !(cfg.relief_amplitude >= 0.0) || !(cfg.shading >= 0.0) ||
      !std::isfinite(cfg.texture_theta) || !(cfg.texture_period > 0.0)) {
    fail("invalid texture, relief, shading or noise parameters");
  }
}

bool SceneObject::Covers(double y, double x) const {
  const double dy = y - center_y, dx = x - center_x;
  if (kind == ShapeKind::kRectangle) return std::abs(dy) <= half_h && std::abs(dx) <= half_w;
  return dy * dy + dx * dx <= half_h * half_h;
}

double SceneObject::DepthAt(double y, double x) const {
  const double along = x * std::cos(relief_theta) + y * std::sin(relief_theta);
  return depth + slope_y * (y - center_y) + slope_x * (x - center_x) +
         relief * std::sin(2.0 * std::numbers::pi * along / relief_period + relief_phase);
}

SceneLayout DrawLayout(const SceneConfig& cfg, std::uint64_t index) {
  ValidateSceneConfig(cfg);
  Rng rng(DeriveSeed(cfg.seed, index, 1));
  SceneLayout layout;
  layout.background_depth = kBackgroundDepth;
  layout.background_index = rng.next_below(cfg.background_palette.size());
  const std::size_t k =
      cfg.n_objects_min + rng.next_below(cfg.n_objects_max - cfg.n_objects_min + 1);
  const double side = static_cast<double>(std::min(cfg.height, cfg.width));
  // Depths are separated so no two objects share a depth value.
  const double min_gap = std::min(0.4, 6.0 / static_cast<double>(k + 1));
  for (std::size_t i = 0; i < k; ++i) {
    SceneObject obj;
    obj.id = static_cast<int>(i + 1);
    obj.kind = rng.next_below(2) == 0 ? ShapeKind::kRectangle : ShapeKind::kDisc;
    obj.center_y = rng.uniform(0.0, static_cast<double>(cfg.height));
    obj.center_x = rng.uniform(0.0, static_cast<double>(cfg.width));
    obj.half_h = std::max(1.0, rng.uniform(0.12, 0.3) * side);
    obj.half_w = obj.kind == ShapeKind::kDisc ? obj.half_h
                                              : std::max(1.0, rng.uniform(0.12, 0.3) * side);
    double depth = 0;
    for (int attempt = 0;; ++attempt) {
      depth = rng.uniform(1.0 + kMaxTilt + cfg.relief_amplitude, 9.0 - kMaxTilt - cfg.relief_amplitude);
      const bool clear = std::none_of(
          layout.objects.begin(), layout.objects.end(),
          [&](const SceneObject& o) { return std::abs(o.depth - depth) < min_gap; });
      if (clear || attempt > 1000) break;
    }
    obj.depth = depth;
    // At most kMaxTilt deeper or nearer at the edge of the object.
    obj.slope_y = rng.uniform(-kMaxTilt, kMaxTilt) / obj.half_h;
    obj.slope_x = rng.uniform(-kMaxTilt, kMaxTilt) / obj.half_w;
    obj.relief = cfg.relief_amplitude;
    obj.relief_theta = rng.uniform(0.0, std::numbers::pi);
    obj.relief_period = rng.uniform(4.0, 12.0);
    obj.relief_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (double& c : obj.color) c = rng.uniform(0.05, 0.95);
    layout.objects.push_back(obj);
  }
  return layout;
}

SceneTriplet GenerateScene(const SceneConfig& cfg, std::uint64_t index) {
  const SceneLayout layout = DrawLayout(cfg, index);
  Rng rng(DeriveSeed(cfg.seed, index, 2));
  // Background albedo stripes.
  const double ct = std::cos(cfg.texture_theta), st = std::sin(cfg.texture_theta);
  const double period = cfg.texture_period;
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const auto& bg = cfg.background_palette[layout.background_index];

  SceneTriplet scene;
  scene.label = static_cast<int>(layout.background_index);
  scene.rgb = ImageRGB(cfg.height, cfg.width);
  scene.depth = ScalarMap(cfg.height, cfg.width, layout.background_depth);
  scene.seg = ScalarMap(cfg.height, cfg.width, 0.0);
  for (std::size_t y = 0; y < cfg.height; ++y) {
    for (std::size_t x = 0; x < cfg.width; ++x) {
      const double py = static_cast<double>(y) + 0.5, px = static_cast<double>(x) + 0.5;
      const SceneObject* front = nullptr;
      double front_depth = 0.0;
      for (const auto& o : layout.objects) {
        if (!o.Covers(py, px)) continue;
        const double d = o.DepthAt(py, px);
        if (front == nullptr || d < front_depth) {
          front = &o;
          front_depth = d;
        }
      }
      std::array<double, 3> color;
      if (front != nullptr) {
        const double shade = 1.0 - cfg.shading * (front_depth - front->depth);
        for (int c = 0; c < 3; ++c) color[c] = front->color[c] * shade;
        scene.depth.at(y, x) = front_depth;
        scene.seg.at(y, x) = front->id;
      } else {
        const double wave = std::sin(2.0 * std::numbers::pi * (px * ct + py * st) / period + phase);
        for (int c = 0; c < 3; ++c) color[c] = bg[c] * (1.0 + cfg.texture_amplitude * wave);
      }
      for (int c = 0; c < 3; ++c) {
        scene.rgb.at(y, x, c) = std::clamp(color[c] + cfg.noise_sigma * rng.normal(), 0.0, 1.0);
      }
    }
  }
  return scene;
}

// --- byte helpers ------------------------------------------------------------

namespace {

void PutU32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint32_t GetU32(const std::vector<unsigned char>& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[at + i]) << (8 * i);
  return v;
}

void PutF32(std::vector<unsigned char>& out, float f) { PutU32(out, std::bit_cast<std::uint32_t>(f)); }

float GetF32(const std::vector<unsigned char>& in, std::size_t at) {
  return std::bit_cast<float>(GetU32(in, at));
}

unsigned char Quantize(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// Parses "<magic> <w> <h> <maxval>" followed by exactly one whitespace byte.
struct NetpbmHeader {
  std::size_t width, height, maxval, payload_offset;
};

NetpbmHeader ParseNetpbm(const std::vector<unsigned char>& bytes, const char* magic) {
  if (bytes.size() < 2 || bytes[0] != magic[0] || bytes[1] != magic[1]) {
    throw Error(ErrorCode::kMalformedHeader, std::string("expected ") + magic);
  }
  std::size_t pos = 2;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&] {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
      throw Error(ErrorCode::kMalformedHeader, "expected integer in header");
    }
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > (1u << 24)) throw Error(ErrorCode::kMalformedHeader, "header value too large");
      ++pos;
    }
    return v;
  };
  NetpbmHeader h{};
  h.width = read_int();
  h.height = read_int();
  h.maxval = read_int();
  if (h.width == 0 || h.height == 0 || h.maxval == 0 || h.maxval > 255) {
    throw Error(ErrorCode::kMalformedHeader, "unsupported dimensions or maxval");
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw Error(ErrorCode::kMalformedHeader, "missing separator before payload");
  }
  h.payload_offset = pos + 1;
  return h;
}

}  // namespace

std::vector<unsigned char> ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void WriteFileBytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

std::vector<unsigned char> EncodePpm(const ImageRGB& img) {
  ValidateImage(img);
  const std::string header =
      "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.reserve(out.size() + img.pixels.size());
  for (double v : img.pixels) out.push_back(Quantize(v));
  return out;
}

ImageRGB DecodePpm(const std::vector<unsigned char>& bytes) {
  const NetpbmHeader h = ParseNetpbm(bytes, "P6");
  const std::size_t need = h.width * h.height * 3;
  if (bytes.size() - h.payload_offset < need) {
    throw Error(ErrorCode::kTruncatedPayload, "PPM payload shorter than " + std::to_string(need));
  }
  ImageRGB img(h.height, h.width);
  for (std::size_t i = 0; i < need; ++i)
    img.pixels[i] = static_cast<double>(bytes[h.payload_offset + i]) / static_cast<double>(h.maxval);
  return img;
}

std::vector<unsigned char> EncodePgm(const ScalarMap& map) {
  if (map.height == 0 || map.width == 0) throw Error(ErrorCode::kInvalidArgument, "empty map");
  const std::string header =
      "P5\n" + std::to_string(map.width) + " " + std::to_string(map.height) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  for (double v : map.values) out.push_back(Quantize(v));
  return out;
}

ScalarMap DecodePgm(const std::vector<unsigned char>& bytes) {
  const NetpbmHeader h = ParseNetpbm(bytes, "P5");
  const std::size_t need = h.width * h.height;
  if (bytes.size() - h.payload_offset < need) {
    throw Error(ErrorCode::kTruncatedPayload, "PGM payload shorter than " + std::to_string(need));
  }
  ScalarMap map(h.height, h.width);
  for (std::size_t i = 0; i < need; ++i)
    map.values[i] = static_cast<double>(bytes[h.payload_offset + i]) / static_cast<double>(h.maxval);
  return map;
}

void WritePpm(const std::filesystem::path& path, const ImageRGB& img) {
  WriteFileBytes(path, EncodePpm(img));
}
ImageRGB ReadPpm(const std::filesystem::path& path) { return DecodePpm(ReadFileBytes(path)); }
void WritePgm(const std::filesystem::path& path, const ScalarMap& map) {
  WriteFileBytes(path, EncodePgm(map));
}
ScalarMap ReadPgm(const std::filesystem::path& path) { return DecodePgm(ReadFileBytes(path)); }

namespace {
constexpr unsigned char kF32Magic[4] = {'O', 'F', '3', '2'};
constexpr std::uint32_t kF32Version = 1;
constexpr char kFeatureMagic[8] = {'O', 'M', 'N', 'I', 'F', 'E', 'A', 'T'};
}  // namespace

std::vector<unsigned char> EncodeF32Raw(const ScalarMap& map) {
  std::vector<unsigned char> out(kF32Magic, kF32Magic + 4);
  PutU32(out, kF32Version);
  PutU32(out, static_cast<std::uint32_t>(map.height));
  PutU32(out, static_cast<std::uint32_t>(map.width));
  for (double v : map.values) PutF32(out, static_cast<float>(v));
  return out;
}

ScalarMap DecodeF32Raw(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 16) throw Error(ErrorCode::kMalformedHeader, "f32 header truncated");
  if (!std::equal(kF32Magic, kF32Magic + 4, bytes.begin())) {
    throw Error(ErrorCode::kMagicMismatch, "not an OF32 file");
  }
  if (GetU32(bytes, 4) != kF32Version) {
    throw Error(ErrorCode::kVersionUnsupported, "f32 version " + std::to_string(GetU32(bytes, 4)));
  }
  const std::size_t rows = GetU32(bytes, 8), cols = GetU32(bytes, 12);
  if ((bytes.size() - 16) / 4 < rows * cols) {
    throw Error(ErrorCode::kTruncatedPayload, "f32 payload truncated");
  }
  ScalarMap map(rows, cols);
  for (std::size_t i = 0; i < rows * cols; ++i) map.values[i] = GetF32(bytes, 16 + 4 * i);
  return map;
}

void WriteF32Raw(const std::filesystem::path& path, const ScalarMap& map) {
  WriteFileBytes(path, EncodeF32Raw(map));
}
ScalarMap ReadF32Raw(const std::filesystem::path& path) { return DecodeF32Raw(ReadFileBytes(path)); }

Tensor2 FeatureSet::ToTensor() const {
  Tensor2 t(n_items, dim);
  for (std::size_t i = 0; i < values.size(); ++i) t.data()[i] = values[i];
  return t;
}

FeatureSet FeatureSet::FromTensor(const Tensor2& t, Modality m) {
  FeatureSet set;
  set.n_items = static_cast<std::uint32_t>(t.rows());
  set.dim = static_cast<std::uint32_t>(t.cols());
  set.modality = m;
  set.values.reserve(t.size());
  for (double v : t.data()) set.values.push_back(static_cast<float>(v));
  return set;
}

std::vector<unsigned char> EncodeFeatures(const FeatureSet& set) {
  if (set.values.size() != static_cast<std::size_t>(set.n_items) * set.dim) {
    throw Error(ErrorCode::kDimensionMismatch, "feature payload does not match n_items x dim");
  }
  for (float v : set.values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "non-finite feature");
  }
  std::vector<unsigned char> out(kFeatureMagic, kFeatureMagic + 8);
  PutU32(out, kFeatureSetVersion);
  PutU32(out, set.n_items);
  PutU32(out, set.dim);
  out.push_back(static_cast<unsigned char>(set.modality));
  for (float v : set.values) PutF32(out, v);
  return out;
}

FeatureSet DecodeFeatures(const std::vector<unsigned char>& bytes) {
  constexpr std::size_t kHeader = 8 + 4 + 4 + 4 + 1;
  if (bytes.size() < 8 || !std::equal(kFeatureMagic, kFeatureMagic + 8, bytes.begin())) {
    throw Error(ErrorCode::kMagicMismatch, "not an OMNIFEAT file");
  }
  if (bytes.size() < kHeader) throw Error(ErrorCode::kMalformedHeader, "feature header truncated");
  if (GetU32(bytes, 8) != kFeatureSetVersion) {
    throw Error(ErrorCode::kVersionUnsupported,
                "feature set version " + std::to_string(GetU32(bytes, 8)));
  }
  FeatureSet set;
  set.n_items = GetU32(bytes, 12);
  set.dim = GetU32(bytes, 16);
  if (bytes[20] > 2) throw Error(ErrorCode::kMalformedHeader, "unknown modality tag");
  set.modality = static_cast<Modality>(bytes[20]);
  const std::size_t n = static_cast<std::size_t>(set.n_items) * set.dim;
  if ((bytes.size() - kHeader) / 4 < n) {
    throw Error(ErrorCode::kTruncatedPayload, "feature payload truncated");
  }
  set.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) set.values[i] = GetF32(bytes, kHeader + 4 * i);
  return set;
}

void WriteFeatures(const std::filesystem::path& path, const FeatureSet& set) {
  WriteFileBytes(path, EncodeFeatures(set));
}
FeatureSet ReadFeatures(const std::filesystem::path& path) {
  return DecodeFeatures(ReadFileBytes(path));
}

std::string SceneDirName(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%05zu", index);
  return buf;
}

void WriteSceneDir(const std::filesystem::path& dir, const SceneTriplet& scene) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir.string());
  WritePpm(dir / "rgb.ppm", scene.rgb);
  WriteF32Raw(dir / "depth.f32", scene.depth);
  ScalarMap ids = scene.seg;
  for (double& v : ids.values) {
    if (v < 0 || v > 255) throw Error(ErrorCode::kInvalidArgument, "segment id exceeds 255");
    v /= 255.0;
  }
  WritePgm(dir / "seg.pgm", ids);
}

SceneTriplet ReadSceneDir(const std::filesystem::path& dir, int label) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::kIoError, "missing scene directory " + dir.string());
  }
  SceneTriplet scene;
  scene.rgb = ReadPpm(dir / "rgb.ppm");
  scene.depth = ReadF32Raw(dir / "depth.f32");
  scene.seg = ReadPgm(dir / "seg.pgm");
  for (double& v : scene.seg.values) v = std::round(v * 255.0);
  scene.label = label;
  if (scene.depth.height != scene.rgb.height || scene.depth.width != scene.rgb.width ||
      scene.seg.height != scene.rgb.height || scene.seg.width != scene.rgb.width) {
    throw Error(ErrorCode::kDimensionMismatch, "scene files disagree on size in " + dir.string());
  }
  return scene;
}

}  // namespace omnialign
