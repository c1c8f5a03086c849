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

#include "omnialign/model.h"

#include <bit>
#include <cmath>
#include <map>
#include <string>

#include "omnialign/error.h"
#include "omnialign/synth.h"

namespace omnialign {
namespace {

Tensor2 GaussianMatrix(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
  Tensor2 m(rows, cols);
  for (double& v : m.data()) v = stddev * rng.normal();
  return m;
}

// Removes, per output column and color channel, the mean weight over the
// patch pixels, so a patch of constant color projects to zero.
void CenterPerChannel(Tensor2& proj) {
  for (std::size_t d = 0; d < proj.cols(); ++d) {
    for (std::size_t c = 0; c < 3; ++c) {
      double mean = 0;
      std::size_t n = 0;
      for (std::size_t k = c; k < proj.rows(); k += 3, ++n) mean += proj(k, d);
      mean /= static_cast<double>(n);
      for (std::size_t k = c; k < proj.rows(); k += 3) proj(k, d) -= mean;
    }
  }
}

ResidualLayer RandomLayer(Rng& rng, std::size_t dim) {
  const double stddev = 1.0 / std::sqrt(static_cast<double>(dim));
  ResidualLayer layer;
  layer.weight = GaussianMatrix(rng, dim, dim, stddev);
  layer.bias.assign(dim, 0.0);
  return layer;
}

// Returns tanh(h W + b); the layer output is that plus h.
Tensor2 LayerActivation(const ResidualLayer& layer, const Tensor2& h) {
  Tensor2 act = MatMul(h, layer.weight);
  for (std::size_t t = 0; t < act.rows(); ++t) {
    auto row = act.row(t);
    for (std::size_t d = 0; d < row.size(); ++d) row[d] = std::tanh(row[d] + layer.bias[d]);
  }
  return act;
}

void ApplyLayer(const ResidualLayer& layer, Tensor2& h) {
  const Tensor2 act = LayerActivation(layer, h);
  for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] += act.data()[i];
}

std::vector<double> NormalizedMean(const Tensor2& rows) {
  std::vector<double> mean(rows.cols(), 0.0);
  for (std::size_t t = 0; t < rows.rows(); ++t)
    for (std::size_t d = 0; d < rows.cols(); ++d) mean[d] += rows(t, d);
  for (double& v : mean) v /= static_cast<double>(rows.rows());
  const double n = Norm2(mean);
  if (!(n >= 1e-12)) throw Error(ErrorCode::kZeroVector, "pooled token is zero");
  for (double& v : mean) v /= n;
  return mean;
}

Tensor2 NormalizeRowsStrict(const Tensor2& m) {
  Tensor2 out = m;
  for (std::size_t t = 0; t < out.rows(); ++t) {
    auto row = out.row(t);
    const double n = Norm2(row);
    if (!(n >= 1e-12)) throw Error(ErrorCode::kZeroVector, "zero embedding row");
    for (double& v : row) v /= n;
  }
  return out;
}

}  // namespace

void ValidateModelConfig(const ModelConfig& cfg) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::kConfigInvalid, why); };
  if (cfg.patch < 1) fail("patch must be >= 1");
  if (cfg.embed_dim < 2 || cfg.embed_dim % 2 != 0) fail("embed_dim must be even and >= 2");
  if (cfg.frozen_layers < 1) fail("frozen_layers must be >= 1");
  if (cfg.adapter_layers < 1) fail("adapter_layers must be >= 1");
}

EncoderStack InitStack(const ModelConfig& cfg) {
  ValidateModelConfig(cfg);
  Rng rng(cfg.seed);
  EncoderStack stack;
  stack.config = cfg;
  const std::size_t fan_in = 3 * cfg.patch * cfg.patch;
  const double proj_std = 1.0 / std::sqrt(static_cast<double>(fan_in));
  stack.patch_proj = GaussianMatrix(rng, fan_in, cfg.embed_dim, proj_std);
  CenterPerChannel(stack.patch_proj);
  stack.patch_bias.assign(cfg.embed_dim, 0.0);
  for (std::size_t l = 0; l < cfg.frozen_layers; ++l)
    stack.frozen_blocks.push_back(RandomLayer(rng, cfg.embed_dim));
  for (std::size_t l = 0; l < cfg.adapter_layers; ++l)
    stack.teacher_head.push_back(RandomLayer(rng, cfg.embed_dim));
  if (cfg.adapter_on_top) {
    // Zero weights make each adapter layer the identity at initialization.
    for (std::size_t l = 0; l < cfg.adapter_layers; ++l) {
      stack.student_head.push_back(
          {Tensor2(cfg.embed_dim, cfg.embed_dim), std::vector<double>(cfg.embed_dim, 0.0)});
    }
  } else {
    stack.student_head = stack.teacher_head;
  }
  return stack;
}

Tensor2 PositionalEncoding(std::size_t grid_h, std::size_t grid_w, std::size_t dim) {
  Tensor2 pe(grid_h * grid_w, dim);
  const std::size_t half = dim / 2;
  for (std::size_t gy = 0; gy < grid_h; ++gy) {
    for (std::size_t gx = 0; gx < grid_w; ++gx) {
      auto row = pe.row(gy * grid_w + gx);
      for (std::size_t i = 0; i < half; ++i) {
        const double freq =
            std::pow(100.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(half));
        const double pos_y = static_cast<double>(gy) * freq;
        const double pos_x = static_cast<double>(gx) * freq;
        row[i] = (i % 2 == 0) ? std::sin(pos_y) : std::cos(pos_y);
        row[half + i] = (i % 2 == 0) ? std::sin(pos_x) : std::cos(pos_x);
      }
    }
  }
  // Centered over the grid, so position alone adds no offset to the pooled token.
  for (std::size_t d = 0; d < dim; ++d) {
    double mean = 0.0;
    for (std::size_t t = 0; t < pe.rows(); ++t) mean += pe(t, d);
    mean /= static_cast<double>(pe.rows());
    for (std::size_t t = 0; t < pe.rows(); ++t) pe(t, d) -= mean;
  }
  return pe;
}

Tensor2 FrozenForward(const EncoderStack& stack, const ImageTensor& img) {
  const std::size_t p = stack.config.patch;
  if (img.height == 0 || img.width == 0 || img.height % p != 0 || img.width % p != 0 ||
      img.values.size() != img.height * img.width * 3) {
    throw Error(ErrorCode::kDimensionMismatch,
                "image " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                    " is not divisible by patch " + std::to_string(p));
  }
  const std::size_t gh = img.height / p, gw = img.width / p;
  const std::size_t fan_in = 3 * p * p;
  Tensor2 patches(gh * gw, fan_in);
  for (std::size_t gy = 0; gy < gh; ++gy) {
    for (std::size_t gx = 0; gx < gw; ++gx) {
      auto row = patches.row(gy * gw + gx);
      std::size_t k = 0;
      for (std::size_t py = 0; py < p; ++py) {
        const std::size_t y = gy * p + py;
        for (std::size_t px = 0; px < p; ++px) {
          const std::size_t x = gx * p + px;
          for (std::size_t c = 0; c < 3; ++c) row[k++] = img.values[(y * img.width + x) * 3 + c];
        }
      }
    }
  }
  Tensor2 z = MatMul(patches, stack.patch_proj);
  const Tensor2 pe = PositionalEncoding(gh, gw, stack.config.embed_dim);
  for (std::size_t t = 0; t < z.rows(); ++t)
    for (std::size_t d = 0; d < z.cols(); ++d) z(t, d) += stack.patch_bias[d] + pe(t, d);
  for (const auto& layer : stack.frozen_blocks) ApplyLayer(layer, z);
  return z;
}

Tensor2 TeacherHeadForward(const EncoderStack& stack, const Tensor2& z) {
  Tensor2 h = z;
  for (const auto& layer : stack.teacher_head) ApplyLayer(layer, h);
  return h;
}

HeadTrace StudentForwardTraced(const EncoderStack& stack, const Tensor2& z) {
  HeadTrace trace;
  Tensor2 h = stack.config.adapter_on_top ? TeacherHeadForward(stack, z) : z;
  for (const auto& layer : stack.student_head) {
    trace.inputs.push_back(h);
    Tensor2 act = LayerActivation(layer, h);
    for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] += act.data()[i];
    trace.activations.push_back(std::move(act));
  }
  trace.output = std::move(h);
  return trace;
}

EmbeddingSet HeadsForward(const EncoderStack& stack, const Tensor2& z) {
  if (z.cols() != stack.config.embed_dim || z.rows() == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "trunk features have the wrong shape");
  }
  const Tensor2 teacher = TeacherHeadForward(stack, z);
  Tensor2 student = teacher;
  if (stack.config.adapter_on_top) {
    for (const auto& layer : stack.student_head) ApplyLayer(layer, student);
  } else {
    student = z;
    for (const auto& layer : stack.student_head) ApplyLayer(layer, student);
  }
  EmbeddingSet out;
  out.dense_teacher = NormalizeRowsStrict(teacher);
  out.dense_student = NormalizeRowsStrict(student);
  out.pooled_teacher = NormalizedMean(teacher);
  out.pooled_student = NormalizedMean(student);
  return out;
}

EmbeddingSet EmbedImage(const EncoderStack& stack, const ImageRGB& img) {
  return HeadsForward(stack, FrozenForward(stack, NormalizeImagenet(img)));
}

void StudentBackward(const EncoderStack& stack, const HeadTrace& trace,
                     const Tensor2& d_output, std::span<double> grad) {
  const std::size_t dim = stack.config.embed_dim;
  const std::size_t per_layer = dim * dim + dim;
  if (grad.size() != TrainableCount(stack)) {
    throw Error(ErrorCode::kLengthMismatch, "gradient buffer has the wrong length");
  }
  Tensor2 d_h = d_output;
  for (std::size_t l = stack.student_head.size(); l-- > 0;) {
    const Tensor2& input = trace.inputs[l];
    const Tensor2& act = trace.activations[l];
    Tensor2 d_pre(d_h.rows(), dim);
    for (std::size_t i = 0; i < d_pre.size(); ++i) {
      const double a = act.data()[i];
      d_pre.data()[i] = d_h.data()[i] * (1.0 - a * a);
    }
    double* gw = grad.data() + l * per_layer;
    double* gb = gw + dim * dim;
    for (std::size_t t = 0; t < d_pre.rows(); ++t) {
      const auto in_row = input.row(t);
      const auto dp_row = d_pre.row(t);
      for (std::size_t i = 0; i < dim; ++i) {
        const double x = in_row[i];
        double* gw_row = gw + i * dim;
        for (std::size_t j = 0; j < dim; ++j) gw_row[j] += x * dp_row[j];
      }
      for (std::size_t j = 0; j < dim; ++j) gb[j] += dp_row[j];
    }
    if (l > 0) {
      // d_input = d_output + d_pre W^T
      const Tensor2 back = MatMulTransposed(d_pre, stack.student_head[l].weight);
      for (std::size_t i = 0; i < d_h.size(); ++i) d_h.data()[i] += back.data()[i];
    }
  }
}

std::size_t TrainableCount(const EncoderStack& stack) {
  const std::size_t dim = stack.config.embed_dim;
  return stack.student_head.size() * (dim * dim + dim);
}

std::vector<double> TrainableParameters(const EncoderStack& stack) {
  std::vector<double> flat;
  flat.reserve(TrainableCount(stack));
  for (const auto& layer : stack.student_head) {
    flat.insert(flat.end(), layer.weight.data().begin(), layer.weight.data().end());
    flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
  }
  return flat;
}

void SetTrainableParameters(EncoderStack& stack, std::span<const double> flat) {
  if (flat.size() != TrainableCount(stack)) {
    throw Error(ErrorCode::kLengthMismatch, "expected " + std::to_string(TrainableCount(stack)) +
                                                " trainable values, got " +
                                                std::to_string(flat.size()));
  }
  std::size_t at = 0;
  for (auto& layer : stack.student_head) {
    for (double& v : layer.weight.data()) v = flat[at++];
    for (double& v : layer.bias) v = flat[at++];
  }
}

std::uint64_t FrozenParameterHash(const EncoderStack& stack) {
  std::uint64_t h = HashDoubles(stack.patch_proj.data());
  auto mix = [&h](std::span<const double> v) {
    h = Fnv1a64({reinterpret_cast<const unsigned char*>(v.data()), v.size() * sizeof(double)}, h);
  };
  mix(stack.patch_bias);
  for (const auto* group : {&stack.frozen_blocks, &stack.teacher_head}) {
    for (const auto& layer : *group) {
      mix(layer.weight.data());
      mix(layer.bias);
    }
  }
  return h;
}

// --- checkpoints -------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[8] = {'O', 'M', 'N', 'I', 'C', 'K', 'P', 'T'};

class ByteWriter {
 public:
  void U8(std::uint8_t v) { out_.push_back(v); }
  void U32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void U64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void Bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void Group(const std::string& name, std::size_t rows, std::size_t cols,
             std::span<const double> values) {
    U32(static_cast<std::uint32_t>(name.size()));
    Bytes(name.data(), name.size());
    U32(static_cast<std::uint32_t>(rows));
    U32(static_cast<std::uint32_t>(cols));
    for (double v : values) U64(std::bit_cast<std::uint64_t>(v));
  }
  std::vector<unsigned char> Take() { return std::move(out_); }

 private:
  std::vector<unsigned char> out_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<unsigned char>& in) : in_(in) {}
  void Need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw Error(ErrorCode::kTruncatedPayload, "checkpoint truncated");
  }
  std::uint8_t U8() {
    Need(1);
    return in_[pos_++];
  }
  std::uint32_t U32() {
    Need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t U64() {
    Need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::string Str(std::size_t n) {
    Need(n);
    std::string s(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool AtEnd() const { return pos_ == in_.size(); }

 private:
  const std::vector<unsigned char>& in_;
  std::size_t pos_ = 0;
};

void WriteLayers(ByteWriter& w, const std::string& prefix,
                 const std::vector<ResidualLayer>& layers) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string base = prefix + "." + std::to_string(l);
    w.Group(base + ".weight", layers[l].weight.rows(), layers[l].weight.cols(),
            layers[l].weight.data());
    w.Group(base + ".bias", 1, layers[l].bias.size(), layers[l].bias);
  }
}

}  // namespace

std::vector<unsigned char> EncodeCheckpoint(const Checkpoint& ckpt) {
  const EncoderStack& s = ckpt.stack;
  const ModelConfig& c = s.config;
  ByteWriter w;
  w.Bytes(kCheckpointMagic, 8);
  w.U32(kCheckpointVersion);
  w.U64(c.seed);
  w.U32(static_cast<std::uint32_t>(c.patch));
  w.U32(static_cast<std::uint32_t>(c.embed_dim));
  w.U32(static_cast<std::uint32_t>(c.frozen_layers));
  w.U32(static_cast<std::uint32_t>(c.adapter_layers));
  w.U8(c.adapter_on_top ? 1 : 0);
  const std::size_t groups =
      2 + 2 * (s.frozen_blocks.size() + s.teacher_head.size() + s.student_head.size()) + 1;
  w.U32(static_cast<std::uint32_t>(groups));
  w.Group("patch_proj", s.patch_proj.rows(), s.patch_proj.cols(), s.patch_proj.data());
  w.Group("patch_bias", 1, s.patch_bias.size(), s.patch_bias);
  WriteLayers(w, "frozen", s.frozen_blocks);
  WriteLayers(w, "teacher", s.teacher_head);
  WriteLayers(w, "student", s.student_head);
  w.Group("log_tau", 1, ckpt.log_tau.size(), ckpt.log_tau);
  return w.Take();
}

Checkpoint DecodeCheckpoint(const std::vector<unsigned char>& bytes) {
  ByteReader r(bytes);
  if (r.Str(8) != std::string(kCheckpointMagic, 8)) {
    throw Error(ErrorCode::kMagicMismatch, "not an OMNICKPT file");
  }
  const std::uint32_t version = r.U32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kVersionUnsupported, "checkpoint version " + std::to_string(version));
  }
  ModelConfig cfg;
  cfg.seed = r.U64();
  cfg.patch = r.U32();
  cfg.embed_dim = r.U32();
  cfg.frozen_layers = r.U32();
  cfg.adapter_layers = r.U32();
  cfg.adapter_on_top = r.U8() != 0;
  ValidateModelConfig(cfg);

  std::map<std::string, Tensor2> groups;
  const std::uint32_t n_groups = r.U32();
  for (std::uint32_t g = 0; g < n_groups; ++g) {
    const std::string name = r.Str(r.U32());
    const std::size_t rows = r.U32(), cols = r.U32();
    r.Need(rows * cols * 8);
    std::vector<double> values(rows * cols);
    for (double& v : values) v = std::bit_cast<double>(r.U64());
    groups[name] = Tensor2(rows, cols, std::move(values));
  }
  auto take = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    auto it = groups.find(name);
    if (it == groups.end()) throw Error(ErrorCode::kMalformedHeader, "missing group " + name);
    if (it->second.rows() != rows || it->second.cols() != cols) {
      throw Error(ErrorCode::kMalformedHeader, "group " + name + " has the wrong shape");
    }
    return it->second;
  };
  const std::size_t d = cfg.embed_dim;
  Checkpoint ckpt;
  EncoderStack& s = ckpt.stack;
  s.config = cfg;
  s.patch_proj = take("patch_proj", 3 * cfg.patch * cfg.patch, d);
  s.patch_bias = take("patch_bias", 1, d).data();
  auto read_layers = [&](const std::string& prefix, std::size_t n) {
    std::vector<ResidualLayer> layers;
    for (std::size_t l = 0; l < n; ++l) {
      const std::string base = prefix + "." + std::to_string(l);
      layers.push_back({take(base + ".weight", d, d), take(base + ".bias", 1, d).data()});
    }
    return layers;
  };
  s.frozen_blocks = read_layers("frozen", cfg.frozen_layers);
  s.teacher_head = read_layers("teacher", cfg.adapter_layers);
  s.student_head = read_layers("student", cfg.adapter_layers);
  auto it = groups.find("log_tau");
  if (it == groups.end() || it->second.rows() != 1 || it->second.cols() < 1) {
    throw Error(ErrorCode::kMalformedHeader, "missing log_tau");
  }
  ckpt.log_tau = it->second.data();
  return ckpt;
}

void WriteCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  WriteFileBytes(path, EncodeCheckpoint(ckpt));
}

Checkpoint ReadCheckpoint(const std::filesystem::path& path) {
  return DecodeCheckpoint(ReadFileBytes(path));
}

}  // namespace omnialign
