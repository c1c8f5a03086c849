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

// Images and the multimodal input pipeline: photometric jitter for RGB,
// natural colorization of scalar maps, modality mixup and ImageNet
// standardization.

#ifndef OMNIALIGN_IMAGING_H_
#define OMNIALIGN_IMAGING_H_

#include <array>
#include <cstddef>
#include <vector>

#include "omnialign/numerics.h"

namespace omnialign {

// H x W x 3, interleaved, channel values in [0, 1].
struct ImageRGB {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  ImageRGB() = default;
  ImageRGB(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), pixels(h * w * 3, fill) {}

  double& at(std::size_t y, std::size_t x, std::size_t c) {
    return pixels[(y * width + x) * 3 + c];
  }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * 3 + c];
  }
  bool operator==(const ImageRGB&) const = default;
};

struct ScalarMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  ScalarMap() = default;
  ScalarMap(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), values(h * w, fill) {}

  double& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
  double at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
  bool operator==(const ScalarMap&) const = default;
};

// H x W x 3 standardized values; no range invariant.
struct ImageTensor {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;
};

struct Range {
  double lo;
  double hi;
};

struct AugmentConfig {
  Range brightness_delta{-0.1, 0.1};
  Range saturation_scale{0.8, 1.2};
  Range hue_delta{-0.03, 0.03};
  Range contrast_scale{0.8, 1.2};

  static AugmentConfig Identity() {
    return {{0.0, 0.0}, {1.0, 1.0}, {0.0, 0.0}, {1.0, 1.0}};
  }
};

struct NormalizationConstants {
  std::array<double, 3> mean{0.485, 0.456, 0.406};
  std::array<double, 3> std{0.229, 0.224, 0.225};
};

struct ColorPalette {
  std::size_t bins = 64;
  std::size_t kernel = 5;
  double eps = 1e-6;
  std::vector<std::array<double, 3>> sums;           // S, per bin
  std::vector<double> counts;                        // N, per bin
  std::vector<std::array<double, 3>> smoothed_sums;  // S~
  std::vector<double> smoothed_counts;               // N~
  std::vector<std::array<double, 3>> colors;         // P = S~ / (N~ + eps)
  std::vector<std::size_t> bin_of_pixel;             // b(u, v), row-major
};

inline constexpr std::size_t kPaletteBins = 64;
inline constexpr std::size_t kPaletteKernel = 5;
inline constexpr double kPaletteEps = 1e-6;

void ValidateImage(const ImageRGB& img);

// Brightness, saturation, hue, contrast, in that order, each drawn once
// from `rng` and clamped to [0, 1] after every stage. A stage whose draw is
// its identity value is skipped, so collapsed ranges reproduce the input
// exactly.
ImageRGB PhotometricAugment(const ImageRGB& img, const AugmentConfig& cfg, Rng& rng);

// Standard hexagonal RGB <-> HSV, all components in [0, 1].
std::array<double, 3> RgbToHsv(const std::array<double, 3>& rgb);
std::array<double, 3> HsvToRgb(const std::array<double, 3>& hsv);

ColorPalette BuildPalette(const ScalarMap& raw, const ImageRGB& rgb,
                          std::size_t bins = kPaletteBins,
                          std::size_t kernel = kPaletteKernel,
                          double eps = kPaletteEps);

// Re-renders `raw` with per-bin mean colors of `rgb`.
ImageRGB NaturalColorize(const ScalarMap& raw, const ImageRGB& rgb,
                         std::size_t bins = kPaletteBins,
                         std::size_t kernel = kPaletteKernel,
                         double eps = kPaletteEps);

// Baseline colormaps: gray replicates the min-max normalized value, jet is
// the usual piecewise-linear blue-cyan-yellow-red ramp.
ImageRGB GrayColorize(const ScalarMap& raw);
ImageRGB JetColorize(const ScalarMap& raw);

// (1 - alpha) * structural + alpha * rgb_aug.
ImageRGB ModalityMixup(const ImageRGB& structural, const ImageRGB& rgb_aug, double alpha);

// Uniform in [0, alpha_max].
double SampleAlpha(Rng& rng, double alpha_max);

ImageTensor NormalizeImagenet(const ImageRGB& img,
                              const NormalizationConstants& c = {});
ImageRGB DenormalizeImagenet(const ImageTensor& t,
                             const NormalizationConstants& c = {});

ImageRGB CenterCropSquare(const ImageRGB& img);
ScalarMap CenterCropSquare(const ScalarMap& map);
ImageRGB ResizeNearest(const ImageRGB& img, std::size_t h, std::size_t w);
ScalarMap ResizeNearest(const ScalarMap& map, std::size_t h, std::size_t w);
ImageRGB ResizeBilinear(const ImageRGB& img, std::size_t h, std::size_t w);

}  // namespace omnialign

#endif  // OMNIALIGN_IMAGING_H_
