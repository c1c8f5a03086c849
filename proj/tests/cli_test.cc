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

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "json.hpp"
#include "omnialign/config.h"
#include "omnialign/imaging.h"
#include "omnialign/synth.h"
#include "test_util.h"

namespace omnialign {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "omnialign");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliResult r;
  r.code = RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string Slurp(const fs::path& p) {
  const auto bytes = ReadFileBytes(p);
  return {bytes.begin(), bytes.end()};
}

std::size_t CountLines(const fs::path& p) {
  std::ifstream f(p);
  std::size_t n = 0;
  for (std::string line; std::getline(f, line);) n += line.empty() ? 0 : 1;
  return n;
}

// A configuration small enough for sub-second training runs.
const char* kTinyConfig =
    "[model]\npatch = 4\nembed_dim = 8\nfrozen_layers = 1\nadapter_layers = 1\n"
    "[train]\nsteps = 3\nbatch_size = 4\nlr = 0.01\n"
    "[loss]\nn_dense = 8\n"
    "[data]\nn_train = 8\nn_eval = 4\nheight = 16\nwidth = 16\n"
    "[eval]\nknn_ks = 1,2\n";

class CliTest : public ::testing::Test {
 protected:
  CliTest() : dir_("cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name())) {
    std::ofstream(Path("tiny.cfg")) << kTinyConfig;
  }
  fs::path Path(const std::string& name) const { return dir_.path() / name; }
  std::string Cfg() const { return Path("tiny.cfg").string(); }

  // Trains the tiny config and returns the checkpoint path.
  fs::path TrainTiny(const std::string& tag, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"train", "--config", Cfg(), "--out-checkpoint",
                                  Path(tag + ".ckpt").string(), "--log",
                                  Path(tag + ".log").string()};
    args.insert(args.end(), extra.begin(), extra.end());
    const CliResult r = Cli(args);
    EXPECT_EQ(r.code, kExitOk) << r.err;
    return Path(tag + ".ckpt");
  }

  TempDir dir_;
};

TEST(ExitCodeTest, Contract) {
  EXPECT_EQ(ExitCodeFor(ErrorCode::kConfigInvalid), kExitConfig);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kShapeMismatch), kExitConfig);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kIoError), kExitIo);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kDataMissing), kExitIo);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kMagicMismatch), kExitIo);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kNonFiniteLoss), kExitNumeric);
}

TEST(BinaryTest, ProcessExitCodes) {
  const char* bin = std::getenv("OMNIALIGN_CLI");
  if (bin == nullptr) GTEST_SKIP() << "OMNIALIGN_CLI not set";
  auto status = [&](const std::string& args) {
    const int raw = std::system(("'" + std::string(bin) + "' " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  EXPECT_EQ(status("--help"), kExitOk);
  EXPECT_EQ(status("train --bogus"), kExitConfig);
  EXPECT_EQ(status("eval --checkpoint /nonexistent/x.ckpt --report /tmp/omnialign_r.json"), kExitIo);
}

TEST_F(CliTest, HelpAndBadUsage) {
  EXPECT_EQ(Cli({"--help"}).code, kExitOk);
  EXPECT_EQ(Cli({}).code, kExitConfig);
  EXPECT_EQ(Cli({"frobnicate"}).code, kExitConfig);
  EXPECT_EQ(Cli({"train", "--no-such-flag"}).code, kExitConfig);
}

TEST_F(CliTest, TrainHelpListsEveryKeyWithDefault) {
  const CliResult r = Cli({"train", "--help"});
  ASSERT_EQ(r.code, kExitOk);
  for (const ConfigKeyInfo& k : ConfigKeys()) {
    const std::string flag = "--" + k.section + "." + k.key;
    const auto at = r.out.find(flag);
    ASSERT_NE(at, std::string::npos) << flag;
    if (!k.default_value.empty()) {
      const std::string line = r.out.substr(at, r.out.find('\n', at) - at);
      EXPECT_NE(line.find(k.default_value), std::string::npos) << line;
    }
  }
}

TEST_F(CliTest, ConfigCommandAppliesOverrides) {
  const CliResult r = Cli({"config", "--config", Cfg(), "--loss.lambda_anchor", "100"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const RunConfig cfg = ParseRunConfig(r.out);
  EXPECT_DOUBLE_EQ(cfg.train.loss.lambda_anchor, 100.0);
  EXPECT_EQ(cfg.train.steps, 3u);
  EXPECT_EQ(Cli({"config", "--train.steps", "x"}).code, kExitConfig);
  EXPECT_EQ(Cli({"config", "--config", Path("absent.cfg").string()}).code, kExitIo);
  std::ofstream(Path("bad.cfg")) << "[train]\nnope = 1\n";
  const CliResult bad = Cli({"config", "--config", Path("bad.cfg").string()});
  EXPECT_EQ(bad.code, kExitConfig);
  EXPECT_NE(bad.err.find("line 2"), std::string::npos);
}

TEST_F(CliTest, GenDataIsDeterministicAndGuarded) {
  const std::vector<std::string> base{"gen-data", "--config", Cfg(), "--data.seed", "7",
                                      "--count", "4", "--out"};
  auto args = base;
  args.push_back(Path("d1").string());
  const CliResult a = Cli(args);
  ASSERT_EQ(a.code, kExitOk) << a.err;
  const auto manifest = nlohmann::json::parse(a.out);
  EXPECT_EQ(manifest["count"], 4);
  ASSERT_EQ(manifest["scenes"].size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_TRUE(fs::exists(Path("d1") / SceneDirName(i) / "rgb.ppm"));
  }
  EXPECT_EQ(Slurp(Path("d1") / "manifest.json"), a.out);

  // Refuses a non-empty directory, then rewrites it identically with --force.
  EXPECT_EQ(Cli(args).code, kExitIo);
  args.push_back("--force");
  const CliResult again = Cli(args);
  ASSERT_EQ(again.code, kExitOk);
  EXPECT_EQ(again.out, a.out);

  auto other = base;
  other[4] = "8";
  other.push_back(Path("d2").string());
  const CliResult b = Cli(other);
  ASSERT_EQ(b.code, kExitOk);
  EXPECT_NE(b.out, a.out);

  EXPECT_EQ(Cli({"gen-data", "--out", Path("d3").string(), "--data.height", "0"}).code,
            kExitConfig);
}

TEST_F(CliTest, ColorizeConstantMapAndErrors) {
  SceneConfig sc;
  sc.height = 16;
  sc.width = 16;
  const SceneTriplet scene = GenerateScene(sc, 0);
  WritePpm(Path("rgb.ppm"), scene.rgb);
  const ImageRGB rgb = ReadPpm(Path("rgb.ppm"));
  ScalarMap flat(16, 16);
  for (double& v : flat.values) v = 3.0;
  WriteF32Raw(Path("flat.f32"), flat);

  const CliResult r = Cli({"colorize", "--rgb", Path("rgb.ppm").string(), "--raw",
                           Path("flat.f32").string(), "--out", Path("c.ppm").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const ImageRGB out = ReadPpm(Path("c.ppm"));
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0;
    for (std::size_t p = 0; p < 256; ++p) mean += rgb.pixels[p * 3 + c];
    mean /= 256.0;
    for (std::size_t p = 0; p < 256; ++p) {
      EXPECT_EQ(out.pixels[p * 3 + c], out.pixels[c]);
      EXPECT_NEAR(out.pixels[p * 3 + c], mean, 0.5 / 255.0 + 1e-12);
    }
  }
  // Explicit defaults give the same bytes.
  ASSERT_EQ(Cli({"colorize", "--rgb", Path("rgb.ppm").string(), "--raw", Path("flat.f32").string(),
                 "--out", Path("d.ppm").string(), "--bins", "64", "--kernel", "5"})
                .code,
            kExitOk);
  EXPECT_EQ(Slurp(Path("c.ppm")), Slurp(Path("d.ppm")));

  WriteF32Raw(Path("small.f32"), ScalarMap(8, 8));
  const CliResult mismatch = Cli({"colorize", "--rgb", Path("rgb.ppm").string(), "--raw",
                                  Path("small.f32").string(), "--out", Path("e.ppm").string()});
  EXPECT_EQ(mismatch.code, kExitConfig);
  EXPECT_FALSE(mismatch.err.empty());
  EXPECT_EQ(Cli({"colorize", "--rgb", Path("none.ppm").string(), "--raw",
                 Path("flat.f32").string(), "--out", Path("f.ppm").string()})
                .code,
            kExitIo);
}

TEST_F(CliTest, TrainIsDeterministicAndLogsEveryStep) {
  const fs::path a = TrainTiny("a");
  const fs::path b = TrainTiny("b");
  EXPECT_EQ(CountLines(Path("a.log")), 3u);
  EXPECT_EQ(Slurp(a), Slurp(b));
  EXPECT_EQ(Slurp(Path("a.log")), Slurp(Path("b.log")));
  const fs::path c = TrainTiny("c", {"--loss.lambda_anchor", "0"});
  EXPECT_NE(Slurp(a), Slurp(c));
  EXPECT_EQ(Cli({"train", "--config", Cfg(), "--out-checkpoint", Path("x.ckpt").string(),
                 "--train.checkpoint_every", "1"})
                .code,
            kExitConfig);
}

TEST_F(CliTest, TrainFromDatasetDirectory) {
  ASSERT_EQ(Cli({"gen-data", "--config", Cfg(), "--out", Path("data").string()}).code, kExitOk);
  const fs::path mem = TrainTiny("mem");
  const fs::path disk = TrainTiny("disk", {"--data.dir", Path("data").string()});
  // Disk scenes pass through 8-bit PPM quantization, so only the shape is compared.
  EXPECT_EQ(CountLines(Path("disk.log")), 3u);
  EXPECT_TRUE(fs::exists(disk));
  EXPECT_EQ(Cli({"train", "--config", Cfg(), "--out-checkpoint", Path("y.ckpt").string(),
                 "--data.dir", Path("nothing").string()})
                .code,
            kExitIo);
  (void)mem;
}

TEST_F(CliTest, EvalReportsAllSectionsStably) {
  const fs::path ckpt = TrainTiny("m");
  const std::vector<std::string> base{"eval", "--config", Cfg(), "--checkpoint", ckpt.string(),
                                      "--report"};
  auto args = base;
  args.push_back(Path("r1.json").string());
  const CliResult r = Cli(args);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto report = nlohmann::json::parse(Slurp(Path("r1.json")));
  for (const char* section : {"retrieval", "diagnostics", "knn", "pck"}) {
    EXPECT_TRUE(report["student"].contains(section)) << section;
    EXPECT_TRUE(report["teacher"].contains(section)) << section;
  }
  args.back() = Path("r2.json").string();
  ASSERT_EQ(Cli(args).code, kExitOk);
  EXPECT_EQ(Slurp(Path("r1.json")), Slurp(Path("r2.json")));

  auto only = base;
  only.insert(only.end(), {Path("r3.json").string(), "--which", "diagnostics"});
  ASSERT_EQ(Cli(only).code, kExitOk);
  const auto partial = nlohmann::json::parse(Slurp(Path("r3.json")));
  EXPECT_TRUE(partial["student"].contains("diagnostics"));
  EXPECT_FALSE(partial["student"].contains("knn"));

  auto bad = base;
  bad.insert(bad.end(), {Path("r4.json").string(), "--which", "nope"});
  EXPECT_EQ(Cli(bad).code, kExitConfig);
  EXPECT_EQ(Cli({"eval", "--checkpoint", Path("none.ckpt").string(), "--report",
                 Path("r5.json").string()})
                .code,
            kExitIo);
}

TEST_F(CliTest, SingleValueSweepMatchesTrainAndEval) {
  const CliResult r = Cli({"sweep", "--config", Cfg(), "--param", "lambda_anchor", "--values", "10",
                           "--out", Path("sweep").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto doc = nlohmann::json::parse(Slurp(Path("sweep") / "frontier.json"));
  ASSERT_EQ(doc["points"].size(), 1u);
  EXPECT_TRUE(fs::exists(Path("sweep") / "frontier.txt"));

  const fs::path ckpt = TrainTiny("single");
  ASSERT_EQ(Cli({"eval", "--config", Cfg(), "--checkpoint", ckpt.string(), "--report",
                 Path("single.json").string(), "--which", "diagnostics"})
                .code,
            kExitOk);
  const auto report = nlohmann::json::parse(Slurp(Path("single.json")));
  const auto& d = report["student"]["diagnostics"];
  const auto& p = doc["points"][0];
  EXPECT_DOUBLE_EQ(p["alignment"].get<double>(), d["cross_modal_mean"].get<double>());
  EXPECT_DOUBLE_EQ(p["discernibility"].get<double>(),
                   1.0 - d["rgb_rgb_mismatched"].get<double>());

  EXPECT_EQ(Cli({"sweep", "--config", Cfg(), "--param", "lr", "--values", "1", "--out",
                 Path("s2").string()})
                .code,
            kExitConfig);
  EXPECT_EQ(Cli({"sweep", "--config", Cfg(), "--param", "alpha_max", "--values", "0,x", "--out",
                 Path("s3").string()})
                .code,
            kExitConfig);
}

TEST_F(CliTest, PcaWritesSixImages) {
  ASSERT_EQ(Cli({"gen-data", "--config", Cfg(), "--count", "1", "--out", Path("one").string()})
                .code,
            kExitOk);
  const fs::path ckpt = TrainTiny("p");
  const std::string prefix = (Path("pca") / "s0").string();
  const CliResult r = Cli({"pca", "--checkpoint", ckpt.string(), "--scene",
                           (Path("one") / SceneDirName(0)).string(), "--out-prefix", prefix});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* tag : {"frozen", "adapted"}) {
    for (const char* m : {"rgb", "depth", "seg"}) {
      const fs::path p = prefix + "_" + tag + "_" + m + ".ppm";
      ASSERT_TRUE(fs::exists(p)) << p;
      EXPECT_EQ(ReadPpm(p).height, 16u);
    }
  }
  EXPECT_EQ(Cli({"pca", "--checkpoint", ckpt.string(), "--scene", Path("missing").string(),
                 "--out-prefix", prefix})
                .code,
            kExitIo);
}

}  // namespace
}  // namespace omnialign
