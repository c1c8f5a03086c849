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

// Procedural RGB / depth / segmentation scenes and the on-disk formats used
// to exchange them: binary PPM (P6), PGM (P5), a small raw-f32 matrix format
// and OMNIFEAT feature sets.

#ifndef OMNIALIGN_SYNTH_H_
#define OMNIALIGN_SYNTH_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "omnialign/imaging.h"
#include "omnialign/numerics.h"

namespace omnialign {

enum class Modality : std::uint8_t { kRgb = 0, kDepth = 1, kSeg = 2 };
inline constexpr std::array<Modality, 3> kModalities = {Modality::kRgb, Modality::kDepth,
                                                        Modality::kSeg};
const char* ModalityName(Modality m);

struct SceneConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t n_objects_min = 2;
  std::size_t n_objects_max = 4;
  std::vector<std::array<double, 3>> background_palette = DefaultBackgroundPalette();
  // Background stripes: peak amplitude as a fraction of the background color,
  // orientation in radians and period in pixels. Only the phase varies per
  // scene.
  double texture_amplitude = 1.0;
  double texture_theta = 0.6;
  double texture_period = 6.0;
  // Peak depth of the ridges on object surfaces.
  double relief_amplitude = 0.8;
  // Relative brightness change per unit of depth away from an object's
  // center depth; nearer is brighter.
  double shading = 0.8;
  double noise_sigma = 0.02;
  std::uint64_t seed = 42;

  static std::vector<std::array<double, 3>> DefaultBackgroundPalette();
};

void ValidateSceneConfig(const SceneConfig& cfg, std::size_t min_side = 1);

enum class ShapeKind : std::uint8_t { kRectangle = 0, kDisc = 1 };

struct SceneObject {
  int id = 0;  // >= 1
  ShapeKind kind = ShapeKind::kRectangle;
  double center_y = 0, center_x = 0;
  double half_h = 0, half_w = 0;  // half extents; a disc uses half_h as radius
  // Tilted plane depth + slope_y * (y - center_y) + slope_x * (x - center_x)
  // plus sinusoidal ridges of amplitude relief across direction
  // (cos theta, sin theta).
  double depth = 0;
  double slope_y = 0, slope_x = 0;
  double relief = 0, relief_theta = 0, relief_period = 1, relief_phase = 0;
  std::array<double, 3> color{};

  bool Covers(double y, double x) const;
  double DepthAt(double y, double x) const;
};

struct SceneLayout {
  std::vector<SceneObject> objects;
  std::size_t background_index = 0;
  double background_depth = 0;
};

struct SceneTriplet {
  ImageRGB rgb;
  ScalarMap depth;  // smaller is nearer; background holds the maximum
  ScalarMap seg;    // object id of the frontmost object, 0 for background
  int label = 0;    // background palette index, used as a class label

  bool operator==(const SceneTriplet&) const = default;
};

inline constexpr double kBackgroundDepth = 10.0;
// Largest depth change from an object's center to its edge.
inline constexpr double kMaxTilt = 1.0;

// The object list GenerateScene renders for (cfg.seed, index).
SceneLayout DrawLayout(const SceneConfig& cfg, std::uint64_t index);
SceneTriplet GenerateScene(const SceneConfig& cfg, std::uint64_t index);

// --- image files ---------------------------------------------------------

std::vector<unsigned char> EncodePpm(const ImageRGB& img);
ImageRGB DecodePpm(const std::vector<unsigned char>& bytes);
std::vector<unsigned char> EncodePgm(const ScalarMap& map);
ScalarMap DecodePgm(const std::vector<unsigned char>& bytes);

void WritePpm(const std::filesystem::path& path, const ImageRGB& img);
ImageRGB ReadPpm(const std::filesystem::path& path);
void WritePgm(const std::filesystem::path& path, const ScalarMap& map);
ScalarMap ReadPgm(const std::filesystem::path& path);

// 16-byte header "OF32", version, rows, cols (u32 little-endian each), then
// rows * cols little-endian f32.
std::vector<unsigned char> EncodeF32Raw(const ScalarMap& map);
ScalarMap DecodeF32Raw(const std::vector<unsigned char>& bytes);
void WriteF32Raw(const std::filesystem::path& path, const ScalarMap& map);
ScalarMap ReadF32Raw(const std::filesystem::path& path);

// --- feature sets ----------------------------------------------------------

inline constexpr std::uint32_t kFeatureSetVersion = 1;

struct FeatureSet {
  std::uint32_t n_items = 0;
  std::uint32_t dim = 0;
  Modality modality = Modality::kRgb;
  std::vector<float> values;  // n_items * dim, row-major

  Tensor2 ToTensor() const;
  static FeatureSet FromTensor(const Tensor2& t, Modality m);
  bool operator==(const FeatureSet&) const = default;
};

std::vector<unsigned char> EncodeFeatures(const FeatureSet& set);
FeatureSet DecodeFeatures(const std::vector<unsigned char>& bytes);
void WriteFeatures(const std::filesystem::path& path, const FeatureSet& set);
FeatureSet ReadFeatures(const std::filesystem::path& path);

// --- dataset directories ----------------------------------------------------

std::string SceneDirName(std::size_t index);
// Writes scene_%05d/{rgb.ppm, depth.f32, seg.pgm}.
void WriteSceneDir(const std::filesystem::path& dir, const SceneTriplet& scene);
SceneTriplet ReadSceneDir(const std::filesystem::path& dir, int label = 0);

std::vector<unsigned char> ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes);

}  // namespace omnialign

#endif  // OMNIALIGN_SYNTH_H_
