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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "test_util.h"

namespace omnialign {
namespace {

using testing::CodeOf;
using testing::RandomImage;
using testing::RandomMap;
using testing::TempDir;

// Surface depth of one object, computed from its parameters directly.
double SurfaceDepth(const SceneObject& o, double y, double x) {
  const double along = x * std::cos(o.relief_theta) + y * std::sin(o.relief_theta);
  return o.depth + o.slope_y * (y - o.center_y) + o.slope_x * (x - o.center_x) +
         o.relief * std::sin(2 * std::numbers::pi * along / o.relief_period + o.relief_phase);
}

bool Inside(const SceneObject& o, double y, double x) {
  if (o.kind == ShapeKind::kRectangle)
    return std::abs(y - o.center_y) <= o.half_h && std::abs(x - o.center_x) <= o.half_w;
  return std::hypot(y - o.center_y, x - o.center_x) <= o.half_h * (1 + 1e-12);
}

TEST(SceneTest, Deterministic) {
  const SceneConfig cfg;
  EXPECT_EQ(GenerateScene(cfg, 3), GenerateScene(cfg, 3));
  EXPECT_NE(GenerateScene(cfg, 3).rgb, GenerateScene(cfg, 4).rgb);
}

TEST(SceneTest, DistinctIndicesGiveDistinctImages) {
  SceneConfig cfg;
  cfg.height = cfg.width = 24;
  std::set<std::uint64_t> hashes;
  for (std::uint64_t i = 0; i < 100; ++i) hashes.insert(HashDoubles(GenerateScene(cfg, i).rgb.pixels));
  EXPECT_EQ(hashes.size(), 100u);
}

TEST(SceneTest, SingleObjectScene) {
  SceneConfig cfg;
  cfg.n_objects_min = cfg.n_objects_max = 1;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const SceneTriplet s = GenerateScene(cfg, i);
    std::set<double> ids(s.seg.values.begin(), s.seg.values.end());
    ids.erase(0.0);
    ASSERT_EQ(ids.size(), 1u);
    EXPECT_EQ(*ids.begin(), 1.0);
  }
}

TEST(SceneTest, SegAndDepthAgreeWithLayout) {
  SceneConfig cfg;
  cfg.height = 40;
  cfg.width = 48;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    cfg.seed = seed;
    const SceneLayout layout = DrawLayout(cfg, seed % 7);
    const SceneTriplet s = GenerateScene(cfg, seed % 7);
    ASSERT_EQ(s.depth.height, cfg.height);
    ASSERT_EQ(s.seg.width, cfg.width);
    ASSERT_EQ(s.label, static_cast<int>(layout.background_index));
    std::set<double> depths;
    for (const auto& o : layout.objects) depths.insert(o.depth);
    ASSERT_EQ(depths.size(), layout.objects.size());
    for (std::size_t y = 0; y < cfg.height; ++y) {
      for (std::size_t x = 0; x < cfg.width; ++x) {
        const double py = y + 0.5, px = x + 0.5;
        double nearest = layout.background_depth;
        int nearest_id = 0;
        for (const auto& o : layout.objects) {
          if (!Inside(o, py, px)) continue;
          const double d = SurfaceDepth(o, py, px);
          if (nearest_id == 0 || d < nearest) {
            nearest = d;
            nearest_id = o.id;
          }
        }
        ASSERT_EQ(s.seg.at(y, x), nearest_id) << "seed " << seed << " at " << y << "," << x;
        ASSERT_NEAR(s.depth.at(y, x), nearest, 1e-12);
        if (nearest_id != 0) {
          ASSERT_LT(s.depth.at(y, x), layout.background_depth);
        }
      }
    }
    for (double v : s.rgb.pixels) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
  }
}

TEST(SceneTest, InvalidConfig) {
  SceneConfig cfg;
  cfg.n_objects_min = 0;
  EXPECT_EQ(CodeOf([&] { GenerateScene(cfg, 0); }), ErrorCode::kConfigInvalid);
  cfg = SceneConfig{};
  cfg.n_objects_max = 1;
  EXPECT_EQ(CodeOf([&] { GenerateScene(cfg, 0); }), ErrorCode::kConfigInvalid);
  cfg = SceneConfig{};
  cfg.texture_period = 0;
  EXPECT_EQ(CodeOf([&] { GenerateScene(cfg, 0); }), ErrorCode::kConfigInvalid);
  cfg = SceneConfig{};
  EXPECT_EQ(CodeOf([&] { ValidateSceneConfig(cfg, 100); }), ErrorCode::kConfigInvalid);
}

TEST(PpmTest, WhitePixelBytes) {
  const std::vector<unsigned char> bytes = EncodePpm(ImageRGB(1, 1, 1.0));
  const std::string header = "P6\n1 1\n255\n";
  std::vector<unsigned char> expected(header.begin(), header.end());
  expected.insert(expected.end(), {0xFF, 0xFF, 0xFF});
  EXPECT_EQ(bytes, expected);
}

TEST(PpmTest, RoundTripEqualsQuantized) {
  const ImageRGB img = RandomImage(5, 9, 3);
  ImageRGB quantized = img;
  for (double& v : quantized.pixels) v = std::round(v * 255.0) / 255.0;
  EXPECT_EQ(DecodePpm(EncodePpm(img)), quantized);
  EXPECT_EQ(DecodePpm(EncodePpm(quantized)), quantized);

  TempDir dir("ppm");
  WritePpm(dir.path() / "a.ppm", img);
  EXPECT_EQ(ReadPpm(dir.path() / "a.ppm"), quantized);
}

TEST(PpmTest, HeaderWithComment) {
  const std::string text = "P6\n# made by hand\n2 1\n255\n";
  std::vector<unsigned char> bytes(text.begin(), text.end());
  bytes.insert(bytes.end(), {0, 255, 0, 255, 0, 0});
  const ImageRGB img = DecodePpm(bytes);
  ASSERT_EQ(img.width, 2u);
  EXPECT_EQ(img.at(0, 0, 1), 1.0);
  EXPECT_EQ(img.at(0, 1, 0), 1.0);
}

TEST(PpmTest, ErrorPaths) {
  std::vector<unsigned char> bytes = EncodePpm(RandomImage(4, 4, 1));
  bytes.resize(bytes.size() - 1);
  EXPECT_EQ(CodeOf([&] { DecodePpm(bytes); }), ErrorCode::kTruncatedPayload);
  const std::string bad = "P3\n1 1\n255\n";
  EXPECT_EQ(CodeOf([&] { DecodePpm({bad.begin(), bad.end()}); }), ErrorCode::kMalformedHeader);
  const std::string junk = "P6\nx 1\n255\n";
  EXPECT_EQ(CodeOf([&] { DecodePpm({junk.begin(), junk.end()}); }), ErrorCode::kMalformedHeader);
  EXPECT_EQ(CodeOf([] { ReadPpm("/nonexistent/omnialign.ppm"); }), ErrorCode::kIoError);
}

TEST(PgmTest, RoundTripAndTruncation) {
  const ScalarMap map = RandomMap(6, 3, 2, 1.0);
  ScalarMap quantized = map;
  for (double& v : quantized.values) v = std::round(v * 255.0) / 255.0;
  const auto bytes = EncodePgm(map);
  EXPECT_EQ(bytes[0], 'P');
  EXPECT_EQ(bytes[1], '5');
  EXPECT_EQ(DecodePgm(bytes), quantized);
  auto cut = bytes;
  cut.resize(cut.size() - 3);
  EXPECT_EQ(CodeOf([&] { DecodePgm(cut); }), ErrorCode::kTruncatedPayload);
}

TEST(F32RawTest, RoundTripIsBitExactForFloats) {
  ScalarMap map = RandomMap(7, 11, 4, 100.0);
  for (double& v : map.values) v = static_cast<float>(v);
  const auto bytes = EncodeF32Raw(map);
  EXPECT_EQ(bytes.size(), 16u + 7 * 11 * 4);
  EXPECT_EQ(DecodeF32Raw(bytes), map);
}

TEST(F32RawTest, ErrorPaths) {
  auto bytes = EncodeF32Raw(ScalarMap(2, 2, 1.5));
  auto cut = bytes;
  cut.pop_back();
  EXPECT_EQ(CodeOf([&] { DecodeF32Raw(cut); }), ErrorCode::kTruncatedPayload);
  auto wrong = bytes;
  wrong[0] = 'X';
  EXPECT_EQ(CodeOf([&] { DecodeF32Raw(wrong); }), ErrorCode::kMagicMismatch);
  auto version = bytes;
  version[4] = 9;
  EXPECT_EQ(CodeOf([&] { DecodeF32Raw(version); }), ErrorCode::kVersionUnsupported);
  bytes.resize(10);
  EXPECT_EQ(CodeOf([&] { DecodeF32Raw(bytes); }), ErrorCode::kMalformedHeader);
}

TEST(FeaturesTest, RoundTripBitEqual) {
  const FeatureSet set = FeatureSet::FromTensor(testing::RandomTensor(8, 16, 5), Modality::kDepth);
  const auto bytes = EncodeFeatures(set);
  ASSERT_EQ(bytes.size(), 21u + 8 * 16 * 4);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 8), "OMNIFEAT");
  EXPECT_EQ(bytes[20], 1);
  EXPECT_EQ(DecodeFeatures(bytes), set);

  TempDir dir("feat");
  WriteFeatures(dir.path() / "f.bin", set);
  EXPECT_EQ(ReadFeatures(dir.path() / "f.bin"), set);
  const Tensor2 t = set.ToTensor();
  EXPECT_EQ(t.rows(), 8u);
  EXPECT_EQ(t(3, 5), static_cast<double>(set.values[3 * 16 + 5]));
}

TEST(FeaturesTest, EmptySetIsValid) {
  FeatureSet set;
  set.dim = 4;
  const FeatureSet back = DecodeFeatures(EncodeFeatures(set));
  EXPECT_EQ(back.n_items, 0u);
  EXPECT_TRUE(back.values.empty());
}

TEST(FeaturesTest, ErrorPaths) {
  FeatureSet set = FeatureSet::FromTensor(testing::RandomTensor(2, 3, 1), Modality::kSeg);
  auto bytes = EncodeFeatures(set);
  auto magic = bytes;
  magic[3] = 'X';
  EXPECT_EQ(CodeOf([&] { DecodeFeatures(magic); }), ErrorCode::kMagicMismatch);
  auto version = bytes;
  version[8] = 2;
  EXPECT_EQ(CodeOf([&] { DecodeFeatures(version); }), ErrorCode::kVersionUnsupported);
  auto cut = bytes;
  cut.resize(cut.size() - 4);
  EXPECT_EQ(CodeOf([&] { DecodeFeatures(cut); }), ErrorCode::kTruncatedPayload);
  set.values[0] = std::nanf("");
  EXPECT_EQ(CodeOf([&] { EncodeFeatures(set); }), ErrorCode::kInvalidArgument);
}

TEST(SceneDirTest, RoundTrip) {
  SceneConfig cfg;
  cfg.height = cfg.width = 20;
  const SceneTriplet s = GenerateScene(cfg, 1);
  TempDir dir("scene");
  const auto path = dir.path() / SceneDirName(1);
  EXPECT_EQ(SceneDirName(1), "scene_00001");
  WriteSceneDir(path, s);
  const SceneTriplet back = ReadSceneDir(path, s.label);
  EXPECT_EQ(back.seg, s.seg);
  for (std::size_t i = 0; i < s.depth.values.size(); ++i)
    EXPECT_EQ(back.depth.values[i], static_cast<float>(s.depth.values[i]));
  for (std::size_t i = 0; i < s.rgb.pixels.size(); ++i)
    EXPECT_EQ(back.rgb.pixels[i], std::round(s.rgb.pixels[i] * 255.0) / 255.0);
  EXPECT_EQ(CodeOf([&] { ReadSceneDir(dir.path() / "missing"); }), ErrorCode::kIoError);
}

}  // namespace
}  // namespace omnialign
