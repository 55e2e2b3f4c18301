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

#ifndef SEFX_ENCODER_HPP_
#define SEFX_ENCODER_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sefx/autodiff.hpp"
#include "sefx/tensor.hpp"
#include "sefx/wave.hpp"

namespace sefx {

// Stack of per-layer feature matrices, each dim x frames.
struct FeatureSeries {
  std::vector<Tensor> layers;

  int n_layers() const { return static_cast<int>(layers.size()); }
  int dim() const { return layers.empty() ? 0 : layers.front().rows; }
  int n_frames() const { return layers.empty() ? 0 : layers.front().cols; }
};

enum class LayerScheme { kLatterHalfUniform, kUniform, kOneHot, kCustom };

struct LayerWeights {
  std::vector<double> weights;
  LayerScheme scheme = LayerScheme::kCustom;

  int size() const { return static_cast<int>(weights.size()); }
  // Nonnegative, sum to 1 within 1e-12.
  void Validate() const;
};

// latter_half_uniform zeroes the first cut_index weights (default floor(N/2))
// and spreads 1/(N - cut_index) over the rest. The cut override keeps the
// literal printed formula selectable for comparison.
LayerWeights MakeLayerWeights(int n_layers, LayerScheme scheme,
                              int one_hot_index = 0, int cut_override = -1);

// Sum_n w_n * F_n. Layer count must match the weight count.
Tensor WeightedSum(const FeatureSeries& fs, const LayerWeights& w);

// Frozen multi-layer feature extractor boundary. Implementations never
// mutate their parameters after construction.
class EncoderAdapter {
 public:
  virtual ~EncoderAdapter() = default;

  virtual int n_layers() const = 0;
  virtual int dim() const = 0;
  virtual int win() const = 0;
  virtual int hop() const = 0;
  virtual bool differentiable() const = 0;

  // Frame contract T' = g(T).
  int FrameCountFor(int t) const;

  virtual FeatureSeries EncodeLayers(const Waveform& wave) const = 0;

  // Differentiable route: samples[1,T] -> per-layer [frames, dim] nodes.
  // Only meaningful when differentiable() is true.
  virtual std::vector<ad::Var> EncodeLayersOnTape(ad::Tape& tape,
                                                  ad::Var samples) const = 0;

  virtual std::uint64_t ParamChecksum() const = 0;
};

// Deterministic stand-in for a pretrained SSL encoder: per layer a seeded
// fixed affine map followed by tanh, fully differentiable to the input.
std::unique_ptr<EncoderAdapter> MakeToyEncoder(std::uint64_t seed,
                                               int n_layers = 4, int dim = 32,
                                               int win = 400, int hop = 320);

// Loads an adapter from a JSON descriptor
//   {format, path, n_layers, dim, win, hop, differentiable}
// and probes it, raising ContractViolation when the declared shape does not
// match what the model produces. Supported format: "toy-affine-v1".
std::unique_ptr<EncoderAdapter> LoadExternalAdapter(
    const std::string& descriptor_path);

}  // namespace sefx

#endif  // SEFX_ENCODER_HPP_
