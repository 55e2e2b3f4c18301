// Copyright 2026 The sefx Authors.
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

#ifndef SEFX_CONVTASNET_HPP_
#define SEFX_CONVTASNET_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "sefx/autodiff.hpp"
#include "sefx/tensor.hpp"
#include "sefx/wave.hpp"

namespace sefx {

enum class MaskActivation { kSigmoid, kRelu };

// Time-domain masking enhancer: learned encoder (stride kernel_len/2),
// dilated temporal convolutional mask network with global layer norm, and
// an overlap-add decoder. A single source is estimated.
struct ConvTasNetConfig {
  int n_filters = 4096;       // N
  int kernel_len = 320;       // L, even
  int bottleneck_dim = 256;   // B
  int n_repeats = 4;          // R
  int blocks_per_repeat = 8;  // X
  int hidden_dim = 512;       // H
  int dconv_kernel = 3;       // P, odd
  MaskActivation mask_activation = MaskActivation::kSigmoid;

  int stride() const { return kernel_len / 2; }
  void Validate() const;

  static ConvTasNetConfig FullPreset();
  // Minutes-scale preset exercising the identical code path.
  static ConvTasNetConfig DeskPreset();
};

struct Param {
  std::string name;
  Tensor value;
};

enum class EnhancerMode { kTrain, kEval };

struct EnhancerModel {
  ConvTasNetConfig config;
  std::vector<Param> params;
  EnhancerMode mode = EnhancerMode::kEval;

  std::size_t ParamCount() const;
  std::uint64_t ParamChecksum() const;
  int FindParam(const std::string& name) const;
};

EnhancerModel InitEnhancer(const ConvTasNetConfig& config, std::uint64_t seed);

// Tape forward pass. Returns the [1, len(y)] output node plus one leaf per
// parameter (aligned with model.params) so the trainer can read gradients.
struct EnhanceGraph {
  ad::Var output;
  std::vector<ad::Var> param_leaves;
};
EnhanceGraph EnhanceOnTape(ad::Tape& tape, const EnhancerModel& model,
                           ad::Var noisy, bool train_params);

Waveform Enhance(const EnhancerModel& model, const Waveform& noisy);
// Items are processed independently (parallel across workers).
std::vector<Waveform> EnhanceBatch(const EnhancerModel& model,
                                   const std::vector<Waveform>& noisy);

// Observation adding: beta*y + (1-beta)*x_hat, elementwise exact.
Waveform ObservationAdd(const Waveform& noisy, const Waveform& enhanced,
                        double beta);

}  // namespace sefx

#endif  // SEFX_CONVTASNET_HPP_
