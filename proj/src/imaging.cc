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

#include "omnialign/imaging.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "omnialign/error.h"

namespace omnialign {
namespace {

double Clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void ClampAll(ImageRGB& img) {
  for (double& v : img.pixels) v = Clamp01(v);
}

void RequireSameShape(std::size_t h1, std::size_t w1, std::size_t h2, std::size_t w2,
                      const char* what) {
  if (h1 != h2 || w1 != w2) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(what) + ": " + std::to_string(h1) + "x" + std::to_string(w1) +
                    " vs " + std::to_string(h2) + "x" + std::to_string(w2));
  }
}

void ValidateRange(const Range& r, const char* name) {
  if (!(r.lo <= r.hi)) {
    throw Error(ErrorCode::kConfigInvalid, std::string(name) + " range has min > max");
  }
}

template <typename F>
void ForEachPixelHsv(ImageRGB& img, F&& f) {
  for (std::size_t p = 0; p < img.height * img.width; ++p) {
    double* px = &img.pixels[p * 3];
    auto hsv = RgbToHsv({px[0], px[1], px[2]});
    f(hsv);
    const auto rgb = HsvToRgb(hsv);
    px[0] = rgb[0];
    px[1] = rgb[1];
    px[2] = rgb[2];
  }
}

}  // namespace

void ValidateImage(const ImageRGB& img) {
  if (img.height == 0 || img.width == 0 ||
      img.pixels.size() != img.height * img.width * 3) {
    throw Error(ErrorCode::kDimensionMismatch, "malformed RGB image");
  }
}

std::array<double, 3> RgbToHsv(const std::array<double, 3>& rgb) {
  const double r = rgb[0], g = rgb[1], b = rgb[2];
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  double h = 0.0;
  if (delta > 0.0) {
    if (mx == r) {
      h = (g - b) / delta;
      if (h < 0.0) h += 6.0;
    } else if (mx == g) {
      h = (b - r) / delta + 2.0;
    } else {
      h = (r - g) / delta + 4.0;
    }
    h /= 6.0;
  }
  const double s = mx > 0.0 ? delta / mx : 0.0;
  return {h, s, mx};
}

std::array<double, 3> HsvToRgb(const std::array<double, 3>& hsv) {
  const double s = hsv[1], v = hsv[2];
  if (s <= 0.0) return {v, v, v};
  double h = hsv[0] - std::floor(hsv[0]);
  h *= 6.0;
  const int sector = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

ImageRGB PhotometricAugment(const ImageRGB& img, const AugmentConfig& cfg, Rng& rng) {
  ValidateImage(img);
  ValidateRange(cfg.brightness_delta, "brightness");
  ValidateRange(cfg.saturation_scale, "saturation");
  ValidateRange(cfg.hue_delta, "hue");
  ValidateRange(cfg.contrast_scale, "contrast");

  const double brightness = rng.uniform(cfg.brightness_delta.lo, cfg.brightness_delta.hi);
  const double saturation = rng.uniform(cfg.saturation_scale.lo, cfg.saturation_scale.hi);
  const double hue = rng.uniform(cfg.hue_delta.lo, cfg.hue_delta.hi);
  const double contrast = rng.uniform(cfg.contrast_scale.lo, cfg.contrast_scale.hi);

  ImageRGB out = img;
  if (brightness != 0.0) {
    for (double& v : out.pixels) v += brightness;
    ClampAll(out);
  }
  if (saturation != 1.0) {
    ForEachPixelHsv(out, [&](std::array<double, 3>& hsv) {
      hsv[1] = Clamp01(hsv[1] * saturation);
    });
    ClampAll(out);
  }
  if (hue != 0.0) {
    ForEachPixelHsv(out, [&](std::array<double, 3>& hsv) {
      hsv[0] = hsv[0] + hue;
      hsv[0] -= std::floor(hsv[0]);
    });
    ClampAll(out);
  }
  if (contrast != 1.0) {
    double mean_luma = 0.0;
    const std::size_t n = out.height * out.width;
    for (std::size_t p = 0; p < n; ++p) {
      const double* px = &out.pixels[p * 3];
      mean_luma += 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
    }
    mean_luma /= static_cast<double>(n);
    for (double& v : out.pixels) v = (v - mean_luma) * contrast + mean_luma;
    ClampAll(out);
  }
  return out;
}

ColorPalette BuildPalette(const ScalarMap& raw, const ImageRGB& rgb, std::size_t bins,
                          std::size_t kernel, double eps) {
  ValidateImage(rgb);
  RequireSameShape(raw.height, raw.width, rgb.height, rgb.width, "colorize");
  if (bins == 0 || kernel == 0) {
    throw Error(ErrorCode::kInvalidArgument, "bins and kernel must be positive");
  }
  ColorPalette pal;
  pal.bins = bins;
  pal.kernel = kernel;
  pal.eps = eps;
  const std::size_t n = raw.height * raw.width;

  const auto [mn_it, mx_it] = std::minmax_element(raw.values.begin(), raw.values.end());
  const double mn = *mn_it, mx = *mx_it;
  const double denom = mx - mn + eps;
  pal.bin_of_pixel.resize(n);
  for (std::size_t p = 0; p < n; ++p) {
    const double norm = (raw.values[p] - mn) / denom;
    const double scaled = std::floor(norm * static_cast<double>(bins));
    const double clipped = std::clamp(scaled, 0.0, static_cast<double>(bins - 1));
    pal.bin_of_pixel[p] = static_cast<std::size_t>(clipped);
  }

  pal.sums.assign(bins, {0.0, 0.0, 0.0});
  pal.counts.assign(bins, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t k = pal.bin_of_pixel[p];
    for (int c = 0; c < 3; ++c) pal.sums[k][c] += rgb.pixels[p * 3 + c];
    pal.counts[k] += 1.0;
  }

  // Same-size all-ones convolution, zero padded at both ends of the bin axis.
  const std::ptrdiff_t left = static_cast<std::ptrdiff_t>((kernel - 1) / 2);
  const std::ptrdiff_t right = static_cast<std::ptrdiff_t>(kernel / 2);
  pal.smoothed_sums.assign(bins, {0.0, 0.0, 0.0});
  pal.smoothed_counts.assign(bins, 0.0);
  pal.colors.assign(bins, {0.0, 0.0, 0.0});
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(bins); ++k) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, k - left);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(bins - 1, k + right);
    for (std::ptrdiff_t j = lo; j <= hi; ++j) {
      for (int c = 0; c < 3; ++c) pal.smoothed_sums[k][c] += pal.sums[j][c];
      pal.smoothed_counts[k] += pal.counts[j];
    }
    for (int c = 0; c < 3; ++c)
      pal.colors[k][c] = pal.smoothed_sums[k][c] / (pal.smoothed_counts[k] + eps);
  }
  return pal;
}

ImageRGB NaturalColorize(const ScalarMap& raw, const ImageRGB& rgb, std::size_t bins,
                         std::size_t kernel, double eps) {
  const ColorPalette pal = BuildPalette(raw, rgb, bins, kernel, eps);
  ImageRGB out(raw.height, raw.width);
  for (std::size_t p = 0; p < raw.height * raw.width; ++p) {
    const auto& color = pal.colors[pal.bin_of_pixel[p]];
    for (int c = 0; c < 3; ++c) out.pixels[p * 3 + c] = Clamp01(color[c]);
  }
  return out;
}

namespace {

std::vector<double> MinMaxNormalized(const ScalarMap& raw) {
  if (raw.values.empty()) throw Error(ErrorCode::kDimensionMismatch, "empty map");
  const auto [mn_it, mx_it] = std::minmax_element(raw.values.begin(), raw.values.end());
  const double denom = *mx_it - *mn_it + kPaletteEps;
  std::vector<double> out(raw.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (raw.values[i] - *mn_it) / denom;
  return out;
}

}  // namespace

ImageRGB GrayColorize(const ScalarMap& raw) {
  const auto norm = MinMaxNormalized(raw);
  ImageRGB out(raw.height, raw.width);
  for (std::size_t p = 0; p < norm.size(); ++p)
    for (int c = 0; c < 3; ++c) out.pixels[p * 3 + c] = Clamp01(norm[p]);
  return out;
}

ImageRGB JetColorize(const ScalarMap& raw) {
  const auto norm = MinMaxNormalized(raw);
  ImageRGB out(raw.height, raw.width);
  for (std::size_t p = 0; p < norm.size(); ++p) {
    const double v = norm[p];
    out.pixels[p * 3 + 0] = Clamp01(1.5 - std::abs(4.0 * v - 3.0));
    out.pixels[p * 3 + 1] = Clamp01(1.5 - std::abs(4.0 * v - 2.0));
    out.pixels[p * 3 + 2] = Clamp01(1.5 - std::abs(4.0 * v - 1.0));
  }
  return out;
}

ImageRGB ModalityMixup(const ImageRGB& structural, const ImageRGB& rgb_aug, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error(ErrorCode::kAlphaOutOfRange, "alpha " + std::to_string(alpha));
  }
  RequireSameShape(structural.height, structural.width, rgb_aug.height, rgb_aug.width,
                   "mixup");
  ImageRGB out(structural.height, structural.width);
  const double keep = 1.0 - alpha;
  for (std::size_t i = 0; i < out.pixels.size(); ++i)
    out.pixels[i] = keep * structural.pixels[i] + alpha * rgb_aug.pixels[i];
  return out;
}

double SampleAlpha(Rng& rng, double alpha_max) {
  if (!(alpha_max >= 0.0 && alpha_max <= 1.0)) {
    throw Error(ErrorCode::kAlphaOutOfRange, "alpha_max " + std::to_string(alpha_max));
  }
  return alpha_max * rng.next_unit();
}

ImageTensor NormalizeImagenet(const ImageRGB& img, const NormalizationConstants& c) {
  ValidateImage(img);
  ImageTensor out{img.height, img.width, std::vector<double>(img.pixels.size())};
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const std::size_t ch = i % 3;
    out.values[i] = (img.pixels[i] - c.mean[ch]) / c.std[ch];
  }
  return out;
}

ImageRGB DenormalizeImagenet(const ImageTensor& t, const NormalizationConstants& c) {
  ImageRGB out(t.height, t.width);
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    const std::size_t ch = i % 3;
    out.pixels[i] = t.values[i] * c.std[ch] + c.mean[ch];
  }
  return out;
}

namespace {

template <std::size_t C>
std::vector<double> CropValues(const std::vector<double>& src, std::size_t h, std::size_t w,
                               std::size_t side, std::size_t y0, std::size_t x0) {
  std::vector<double> out(side * side * C);
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side; ++x)
      for (std::size_t c = 0; c < C; ++c)
        out[(y * side + x) * C + c] = src[((y + y0) * w + (x + x0)) * C + c];
  (void)h;
  return out;
}

template <std::size_t C>
std::vector<double> NearestValues(const std::vector<double>& src, std::size_t h,
                                  std::size_t w, std::size_t nh, std::size_t nw) {
  if (nh == 0 || nw == 0) throw Error(ErrorCode::kInvalidArgument, "resize target is empty");
  const double sy = static_cast<double>(h) / static_cast<double>(nh);
  const double sx = static_cast<double>(w) / static_cast<double>(nw);
  std::vector<double> out(nh * nw * C);
  for (std::size_t y = 0; y < nh; ++y) {
    const std::size_t yy =
        std::min(h - 1, static_cast<std::size_t>(std::floor((y + 0.5) * sy)));
    for (std::size_t x = 0; x < nw; ++x) {
      const std::size_t xx =
          std::min(w - 1, static_cast<std::size_t>(std::floor((x + 0.5) * sx)));
      for (std::size_t c = 0; c < C; ++c)
        out[(y * nw + x) * C + c] = src[(yy * w + xx) * C + c];
    }
  }
  return out;
}

}  // namespace

ImageRGB CenterCropSquare(const ImageRGB& img) {
  ValidateImage(img);
  const std::size_t side = std::min(img.height, img.width);
  ImageRGB out;
  out.height = out.width = side;
  out.pixels = CropValues<3>(img.pixels, img.height, img.width, side,
                             (img.height - side) / 2, (img.width - side) / 2);
  return out;
}

ScalarMap CenterCropSquare(const ScalarMap& map) {
  const std::size_t side = std::min(map.height, map.width);
  ScalarMap out;
  out.height = out.width = side;
  out.values = CropValues<1>(map.values, map.height, map.width, side,
                             (map.height - side) / 2, (map.width - side) / 2);
  return out;
}

ImageRGB ResizeNearest(const ImageRGB& img, std::size_t h, std::size_t w) {
  ValidateImage(img);
  ImageRGB out;
  out.height = h;
  out.width = w;
  out.pixels = NearestValues<3>(img.pixels, img.height, img.width, h, w);
  return out;
}

ScalarMap ResizeNearest(const ScalarMap& map, std::size_t h, std::size_t w) {
  ScalarMap out;
  out.height = h;
  out.width = w;
  out.values = NearestValues<1>(map.values, map.height, map.width, h, w);
  return out;
}

ImageRGB ResizeBilinear(const ImageRGB& img, std::size_t h, std::size_t w) {
  ValidateImage(img);
  if (h == 0 || w == 0) throw Error(ErrorCode::kInvalidArgument, "resize target is empty");
  const double sy = static_cast<double>(img.height) / static_cast<double>(h);
  const double sx = static_cast<double>(img.width) / static_cast<double>(w);
  auto sample_axis = [](std::size_t i, double scale, std::size_t n, std::size_t& i0,
                        std::size_t& i1, double& frac) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(n - 1));
    i0 = static_cast<std::size_t>(std::floor(src));
    i1 = std::min(i0 + 1, n - 1);
    frac = src - static_cast<double>(i0);
  };
  ImageRGB out(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    std::size_t y0, y1;
    double fy;
    sample_axis(y, sy, img.height, y0, y1, fy);
    for (std::size_t x = 0; x < w; ++x) {
      std::size_t x0, x1;
      double fx;
      sample_axis(x, sx, img.width, x0, x1, fx);
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = img.at(y0, x0, c) * (1.0 - fx) + img.at(y0, x1, c) * fx;
        const double bot = img.at(y1, x0, c) * (1.0 - fx) + img.at(y1, x1, c) * fx;
        out.at(y, x, c) = top * (1.0 - fy) + bot * fy;
      }
    }
  }
  return out;
}

}  // namespace omnialign
