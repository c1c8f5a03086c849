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

#ifndef OMNIALIGN_TESTS_TEST_UTIL_H_
#define OMNIALIGN_TESTS_TEST_UTIL_H_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include <unistd.h>

#include "omnialign/error.h"
#include "omnialign/imaging.h"
#include "omnialign/numerics.h"

namespace omnialign::testing {

inline Tensor2 RandomTensor(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Tensor2 t(rows, cols);
  for (double& v : t.data()) v = rng.normal();
  return t;
}

inline Tensor2 UnitRows(const Tensor2& t) {
  Tensor2 out = t;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double s = 0;
    for (double v : out.row(i)) s += v * v;
    s = std::sqrt(s);
    for (double& v : out.row(i)) v /= s;
  }
  return out;
}

inline ImageRGB RandomImage(std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  ImageRGB img(h, w);
  for (double& v : img.pixels) v = rng.next_unit();
  return img;
}

inline ScalarMap RandomMap(std::size_t h, std::size_t w, std::uint64_t seed, double scale = 10.0) {
  Rng rng(seed);
  ScalarMap m(h, w);
  for (double& v : m.values) v = scale * rng.next_unit();
  return m;
}

// Runs `fn` and returns the code of the omnialign::Error it throws.
template <typename Fn>
ErrorCode CodeOf(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  throw std::runtime_error("expected an omnialign::Error");
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("omnialign_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace omnialign::testing

#endif  // OMNIALIGN_TESTS_TEST_UTIL_H_
