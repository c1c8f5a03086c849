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

// Toy patch encoder with a frozen trunk, a frozen teacher head and a
// trainable student head that starts as an exact copy of the teacher.
//
//   tokens  = patches * patch_proj + patch_bias + positional encoding
//   trunk   = frozen_layers x [z <- tanh(z W + b) + z]
//   teacher = teacher_head(trunk)          (frozen)
//   student = student_head(trunk)          (trainable)
//           | adapter(teacher_head(trunk)) (adapter_on_top)
//
// Dense outputs are row-normalized; the pooled token is the normalized mean
// of the unnormalized dense outputs.

#ifndef OMNIALIGN_MODEL_H_
#define OMNIALIGN_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "omnialign/imaging.h"
#include "omnialign/numerics.h"

namespace omnialign {

struct ModelConfig {
  std::size_t patch = 8;
  std::size_t embed_dim = 32;
  std::size_t frozen_layers = 4;
  std::size_t adapter_layers = 2;
  bool adapter_on_top = false;
  std::uint64_t seed = 42;

  bool operator==(const ModelConfig&) const = default;
};

void ValidateModelConfig(const ModelConfig& cfg);

// h <- tanh(h W + b) + h, with W of shape D x D.
struct ResidualLayer {
  Tensor2 weight;
  std::vector<double> bias;

  bool operator==(const ResidualLayer&) const = default;
};

struct EncoderStack {
  ModelConfig config;
  Tensor2 patch_proj;  // (3 * patch^2) x D
  std::vector<double> patch_bias;
  std::vector<ResidualLayer> frozen_blocks;
  std::vector<ResidualLayer> teacher_head;
  std::vector<ResidualLayer> student_head;

  bool operator==(const EncoderStack&) const = default;
};

// Weights ~ N(0, 1 / fan_in); biases start at zero. Each patch_proj column
// sums to zero over the pixels of every channel, so flat patches carry only
// position.
EncoderStack InitStack(const ModelConfig& cfg);

// Half the channels encode the token row, half the column, each with the
// usual sin/cos frequency ladder.
Tensor2 PositionalEncoding(std::size_t grid_h, std::size_t grid_w, std::size_t dim);

// T x D trunk features, T = (H / patch) * (W / patch) in row-major grid order.
Tensor2 FrozenForward(const EncoderStack& stack, const ImageTensor& img);

struct EmbeddingSet {
  Tensor2 dense_student;  // T x D, unit rows
  Tensor2 dense_teacher;  // T x D, unit rows
  std::vector<double> pooled_student;
  std::vector<double> pooled_teacher;
};

EmbeddingSet HeadsForward(const EncoderStack& stack, const Tensor2& z);

// Normalize -> trunk -> heads for one [0, 1] image.
EmbeddingSet EmbedImage(const EncoderStack& stack, const ImageRGB& img);

// Intermediate values of the trainable path, kept for backpropagation.
struct HeadTrace {
  std::vector<Tensor2> inputs;       // input to trainable layer l
  std::vector<Tensor2> activations;  // tanh(input W + b) of layer l
  Tensor2 output;                    // unnormalized student dense output
};

Tensor2 TeacherHeadForward(const EncoderStack& stack, const Tensor2& z);
HeadTrace StudentForwardTraced(const EncoderStack& stack, const Tensor2& z);

// Accumulates d(loss)/d(trainable parameters) into `grad` (flat layout of
// TrainableParameters) given d(loss)/d(trace.output).
void StudentBackward(const EncoderStack& stack, const HeadTrace& trace,
                     const Tensor2& d_output, std::span<double> grad);

std::size_t TrainableCount(const EncoderStack& stack);
// Student layers in order, each as W (row-major) followed by b.
std::vector<double> TrainableParameters(const EncoderStack& stack);
void SetTrainableParameters(EncoderStack& stack, std::span<const double> flat);

// Hash over everything that must never change during training.
std::uint64_t FrozenParameterHash(const EncoderStack& stack);

struct Checkpoint {
  EncoderStack stack;
  std::vector<double> log_tau;

  bool operator==(const Checkpoint&) const = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<unsigned char> EncodeCheckpoint(const Checkpoint& ckpt);
Checkpoint DecodeCheckpoint(const std::vector<unsigned char>& bytes);
void WriteCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint ReadCheckpoint(const std::filesystem::path& path);

}  // namespace omnialign

#endif  // OMNIALIGN_MODEL_H_
