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

#include "sefx/encoder.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "sefx/errors.hpp"
#include "sefx/kernels.hpp"
#include "sefx/util.hpp"

namespace sefx {

void LayerWeights::Validate() const {
  if (weights.empty()) throw InvalidScheme("layer weights must be nonempty");
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw InvalidScheme("layer weights must be nonnegative");
    sum += w;
  }
  if (std::fabs(sum - 1.0) > 1e-12)
    throw InvalidScheme("layer weights must sum to 1");
}

LayerWeights MakeLayerWeights(int n_layers, LayerScheme scheme,
                              int one_hot_index, int cut_override) {
  if (n_layers < 1) throw InvalidScheme("layer count must be >= 1");
  LayerWeights lw;
  lw.scheme = scheme;
  lw.weights.assign(n_layers, 0.0);
  switch (scheme) {
    case LayerScheme::kUniform: {
      const double w = 1.0 / n_layers;
      for (double& x : lw.weights) x = w;
      break;
    }
    case LayerScheme::kLatterHalfUniform: {
      int cut = cut_override >= 0 ? cut_override : n_layers / 2;
      if (cut >= n_layers)
        throw InvalidScheme("latter-half cut leaves no active layers");
      const double w = 1.0 / (n_layers - cut);
      for (int i = cut; i < n_layers; ++i) lw.weights[i] = w;
      break;
    }
    case LayerScheme::kOneHot: {
      if (one_hot_index < 0 || one_hot_index >= n_layers)
        throw IndexOutOfRange("one_hot layer index out of range");
      lw.weights[one_hot_index] = 1.0;
      break;
    }
    case LayerScheme::kCustom:
      throw InvalidScheme("custom weights are constructed directly");
  }
  lw.Validate();
  return lw;
}

Tensor WeightedSum(const FeatureSeries& fs, const LayerWeights& w) {
  if (w.size() != fs.n_layers())
    throw LengthMismatch("weighted_sum: weight/layer count mismatch");
  w.Validate();
  const int d = fs.dim();
  const int frames = fs.n_frames();
  for (const Tensor& layer : fs.layers)
    if (layer.rows != d || layer.cols != frames)
      throw LengthMismatch("weighted_sum: ragged feature series");

  Tensor out(d, frames);
  for (int l = 0; l < fs.n_layers(); ++l) {
    const double wl = w.weights[l];
    if (wl == 0.0) continue;
    const Tensor& layer = fs.layers[l];
    for (std::size_t i = 0; i < out.size(); ++i)
      out.v[i] += wl * layer.v[i];
  }
  return out;
}

int EncoderAdapter::FrameCountFor(int t) const {
  if (t < win()) throw InputTooShort("encoder input shorter than one frame");
  return (t - win()) / hop() + 1;
}

namespace {

class ToyEncoder : public EncoderAdapter {
 public:
  ToyEncoder(std::uint64_t seed, int n_layers, int dim, int win, int hop)
      : n_layers_(n_layers), dim_(dim), win_(win), hop_(hop) {
    if (n_layers < 1 || dim < 1 || win < 1 || hop < 1)
      throw InvalidConfig("toy encoder: all dimensions must be >= 1");
    RandomStream rng(MixSeed(seed, 0x70f0));
    weights_.reserve(n_layers);
    biases_.reserve(n_layers);
    // Gain 3 puts the tanh units in their sensitive range; layer RMS stays
    // near 0.3-0.5 on nominal speech-scale input.
    for (int l = 0; l < n_layers; ++l) {
      const int in_dim = l == 0 ? win : dim;
      Tensor w(in_dim, dim);
      const double scale = 3.0 / std::sqrt(static_cast<double>(in_dim));
      for (double& x : w.v) x = rng.Uniform(-scale, scale);
      Tensor b(1, dim);
      for (double& x : b.v) x = rng.Uniform(-0.1, 0.1);
      weights_.push_back(std::move(w));
      biases_.push_back(std::move(b));
    }
  }

  int n_layers() const override { return n_layers_; }
  int dim() const override { return dim_; }
  int win() const override { return win_; }
  int hop() const override { return hop_; }
  bool differentiable() const override { return true; }

  std::vector<ad::Var> EncodeLayersOnTape(ad::Tape& tape,
                                          ad::Var samples) const override {
    const Tensor& x = tape.val(samples);
    if (x.cols < win_) throw InputTooShort("toy encoder: input too short");
    std::vector<ad::Var> layers;
    layers.reserve(n_layers_);
    ad::Var h = ad::UnfoldRows(tape, samples, win_, hop_);
    for (int l = 0; l < n_layers_; ++l) {
      ad::Var w = tape.Leaf(weights_[l], false);
      ad::Var b = tape.Leaf(biases_[l], false);
      h = ad::Tanh(tape, ad::AddBias(tape, ad::MatMul(tape, h, w), b));
      layers.push_back(h);
    }
    return layers;
  }

  FeatureSeries EncodeLayers(const Waveform& wave) const override {
    wave.Validate();
    ad::Tape tape;
    ad::Var samples = tape.Leaf(
        Tensor(1, static_cast<int>(wave.size()), wave.samples), false);
    std::vector<ad::Var> nodes = EncodeLayersOnTape(tape, samples);

    FeatureSeries fs;
    fs.layers.reserve(nodes.size());
    for (ad::Var v : nodes) {
      const Tensor& h = tape.val(v);  // frames x dim
      Tensor layer(dim_, h.rows);
      for (int f = 0; f < h.rows; ++f)
        for (int d = 0; d < dim_; ++d) layer.at(d, f) = h.at(f, d);
      fs.layers.push_back(std::move(layer));
    }
    return fs;
  }

  std::uint64_t ParamChecksum() const override {
    std::uint64_t h = 1469598103934665603ull;
    for (int l = 0; l < n_layers_; ++l) {
      h = Fnv1a64(weights_[l].v, h);
      h = Fnv1a64(biases_[l].v, h);
    }
    return h;
  }

 private:
  int n_layers_, dim_, win_, hop_;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
};

}  // namespace

std::unique_ptr<EncoderAdapter> MakeToyEncoder(std::uint64_t seed,
                                               int n_layers, int dim, int win,
                                               int hop) {
  return std::make_unique<ToyEncoder>(seed, n_layers, dim, win, hop);
}

std::unique_ptr<EncoderAdapter> LoadExternalAdapter(
    const std::string& descriptor_path) {
  std::ifstream in(descriptor_path);
  if (!in) throw IoFailure("cannot open adapter descriptor: " + descriptor_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("bad adapter descriptor JSON: ") +
                        e.what());
  }

  const std::string format = j.value("format", "");
  const int n_layers = j.value("n_layers", 0);
  const int dim = j.value("dim", 0);
  const int win = j.value("win", 0);
  const int hop = j.value("hop", 0);
  const bool differentiable = j.value("differentiable", false);

  if (n_layers < 1 || dim < 1 || win < 1 || hop < 1)
    throw InvalidConfig("adapter descriptor with non-positive shape fields");

  std::unique_ptr<EncoderAdapter> adapter;
  if (format == "toy-affine-v1") {
    const std::string path = j.value("path", "");
    std::ifstream model(path);
    if (!model) throw IoFailure("cannot open adapter model file: " + path);
    nlohmann::json m;
    try {
      model >> m;
    } catch (const nlohmann::json::exception& e) {
      throw UnsupportedModel(std::string("bad toy-affine model file: ") +
                             e.what());
    }
    const std::uint64_t seed = m.value("seed", 0ull);
    adapter = MakeToyEncoder(seed, m.value("n_layers", n_layers),
                             m.value("dim", dim), m.value("win", win),
                             m.value("hop", hop));
    if (!differentiable)
      throw InvalidConfig(
          "toy-affine-v1 adapters are differentiable; descriptor disagrees");
  } else {
    throw UnsupportedModel("unknown adapter format tag: " + format);
  }

  // Probe with one second of deterministic audio and check the declared
  // contract against what the model actually produces.
  Waveform probe;
  probe.sample_rate = 16000;
  probe.samples.resize(16000);
  for (std::size_t i = 0; i < probe.samples.size(); ++i)
    probe.samples[i] = 0.1 * std::sin(0.01 * static_cast<double>(i));
  FeatureSeries fs = adapter->EncodeLayers(probe);
  const int want_frames = (16000 - win) / hop + 1;
  if (fs.n_layers() != n_layers)
    throw ContractViolation("adapter produced a different layer count than declared");
  if (fs.dim() != dim)
    throw ContractViolation("adapter produced a different dim than declared");
  if (fs.n_frames() != want_frames)
    throw ContractViolation("adapter frame contract does not match declared win/hop");
  return adapter;
}

}  // namespace sefx
