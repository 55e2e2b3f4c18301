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

#include "sefx/convtasnet.hpp"

#include <cmath>

#include "sefx/errors.hpp"
#include "sefx/util.hpp"

namespace sefx {

namespace {
constexpr double kGlnEps = 1e-8;
}

void ConvTasNetConfig::Validate() const {
  if (n_filters < 1 || kernel_len < 1 || bottleneck_dim < 1 || n_repeats < 1 ||
      blocks_per_repeat < 1 || hidden_dim < 1 || dconv_kernel < 1)
    throw InvalidConfig("conv-tasnet: all dimensions must be >= 1");
  if (kernel_len % 2 != 0)
    throw InvalidConfig("conv-tasnet: kernel_len must be even");
  if (dconv_kernel % 2 != 1)
    throw InvalidConfig("conv-tasnet: dconv_kernel must be odd");
}

ConvTasNetConfig ConvTasNetConfig::FullPreset() { return ConvTasNetConfig{}; }

ConvTasNetConfig ConvTasNetConfig::DeskPreset() {
  ConvTasNetConfig c;
  c.n_filters = 256;
  c.kernel_len = 40;
  c.bottleneck_dim = 64;
  c.n_repeats = 2;
  c.blocks_per_repeat = 4;
  c.hidden_dim = 128;
  c.dconv_kernel = 3;
  return c;
}

std::size_t EnhancerModel::ParamCount() const {
  std::size_t n = 0;
  for (const Param& p : params) n += p.value.size();
  return n;
}

std::uint64_t EnhancerModel::ParamChecksum() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const Param& p : params) {
    h = Fnv1a64(p.name.data(), p.name.size(), h);
    h = Fnv1a64(p.value.v, h);
  }
  return h;
}

int EnhancerModel::FindParam(const std::string& name) const {
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].name == name) return static_cast<int>(i);
  return -1;
}

namespace {

struct ParamBuilder {
  std::vector<Param>* out;
  RandomStream* rng;

  void Weight(const std::string& name, int rows, int cols) {
    Tensor t(rows, cols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
    for (double& x : t.v) x = rng->Uniform(-scale, scale);
    out->push_back(Param{name, std::move(t)});
  }
  void Bias(const std::string& name, int cols) {
    out->push_back(Param{name, Tensor(1, cols)});
  }
  void NormPair(const std::string& prefix, int cols) {
    Tensor gamma(1, cols);
    gamma.fill(1.0);
    out->push_back(Param{prefix + ".gamma", std::move(gamma)});
    out->push_back(Param{prefix + ".beta", Tensor(1, cols)});
  }
  void PreluAlpha(const std::string& name) {
    Tensor a(1, 1);
    a.v[0] = 0.25;
    out->push_back(Param{name, std::move(a)});
  }
};

std::string BlockPrefix(int r, int x) {
  return "separator.block" + std::to_string(r) + "_" + std::to_string(x);
}

}  // namespace

EnhancerModel InitEnhancer(const ConvTasNetConfig& config, std::uint64_t seed) {
  config.Validate();
  EnhancerModel model;
  model.config = config;
  RandomStream rng(MixSeed(seed, 0xc7a5));
  ParamBuilder pb{&model.params, &rng};

  const int n = config.n_filters, b = config.bottleneck_dim,
            h = config.hidden_dim, l = config.kernel_len,
            p = config.dconv_kernel;

  pb.Weight("encoder.weight", l, n);
  pb.NormPair("separator.norm_in", n);
  pb.Weight("separator.bottleneck.weight", n, b);
  pb.Bias("separator.bottleneck.bias", b);
  for (int r = 0; r < config.n_repeats; ++r) {
    for (int x = 0; x < config.blocks_per_repeat; ++x) {
      const std::string pre = BlockPrefix(r, x);
      pb.Weight(pre + ".conv_in.weight", b, h);
      pb.Bias(pre + ".conv_in.bias", h);
      pb.PreluAlpha(pre + ".prelu1.alpha");
      pb.NormPair(pre + ".norm1", h);
      pb.Weight(pre + ".dconv.weight", h, p);
      pb.Bias(pre + ".dconv.bias", h);
      pb.PreluAlpha(pre + ".prelu2.alpha");
      pb.NormPair(pre + ".norm2", h);
      pb.Weight(pre + ".conv_out.weight", h, b);
      pb.Bias(pre + ".conv_out.bias", b);
    }
  }
  pb.PreluAlpha("separator.mask_prelu.alpha");
  pb.Weight("separator.mask.weight", b, n);
  pb.Bias("separator.mask.bias", n);
  pb.Weight("decoder.weight", n, l);
  return model;
}

EnhanceGraph EnhanceOnTape(ad::Tape& tape, const EnhancerModel& model,
                           ad::Var noisy, bool train_params) {
  const ConvTasNetConfig& cfg = model.config;
  const Tensor& y = tape.val(noisy);
  if (y.rows != 1) throw LengthMismatch("enhance: input must be a signal row");
  const int t = y.cols;
  if (t < cfg.kernel_len)
    throw InputTooShort("enhance: input shorter than the encoder kernel");

  EnhanceGraph graph;
  graph.param_leaves.reserve(model.params.size());
  for (const Param& p : model.params)
    graph.param_leaves.push_back(tape.Leaf(p.value, train_params));
  auto P = [&](const std::string& name) -> ad::Var {
    const int i = model.FindParam(name);
    if (i < 0) throw CheckpointFormatError("missing parameter: " + name);
    return graph.param_leaves[i];
  };

  // Right-pad to a whole number of encoder frames.
  const int stride = cfg.stride();
  const int t_pad =
      (t - cfg.kernel_len) % stride == 0
          ? t
          : t + stride - (t - cfg.kernel_len) % stride;
  ad::Var x = noisy;
  if (t_pad != t) x = ad::PadCols(tape, x, 0, t_pad - t);

  ad::Var frames = ad::UnfoldRows(tape, x, cfg.kernel_len, stride);  // [F,L]
  ad::Var enc = ad::MatMul(tape, frames, P("encoder.weight"));       // [F,N]

  ad::Var s = ad::GlobalLayerNorm(tape, enc, P("separator.norm_in.gamma"),
                                  P("separator.norm_in.beta"), kGlnEps);
  s = ad::AddBias(tape,
                  ad::MatMul(tape, s, P("separator.bottleneck.weight")),
                  P("separator.bottleneck.bias"));  // [F,B]

  for (int r = 0; r < cfg.n_repeats; ++r) {
    for (int bx = 0; bx < cfg.blocks_per_repeat; ++bx) {
      const std::string pre = BlockPrefix(r, bx);
      const int dilation = 1 << bx;
      ad::Var u = ad::AddBias(
          tape, ad::MatMul(tape, s, P(pre + ".conv_in.weight")),
          P(pre + ".conv_in.bias"));
      u = ad::PRelu(tape, u, P(pre + ".prelu1.alpha"));
      u = ad::GlobalLayerNorm(tape, u, P(pre + ".norm1.gamma"),
                              P(pre + ".norm1.beta"), kGlnEps);
      u = ad::DepthwiseConv(tape, u, P(pre + ".dconv.weight"), dilation);
      u = ad::AddBias(tape, u, P(pre + ".dconv.bias"));
      u = ad::PRelu(tape, u, P(pre + ".prelu2.alpha"));
      u = ad::GlobalLayerNorm(tape, u, P(pre + ".norm2.gamma"),
                              P(pre + ".norm2.beta"), kGlnEps);
      u = ad::AddBias(tape, ad::MatMul(tape, u, P(pre + ".conv_out.weight")),
                      P(pre + ".conv_out.bias"));
      s = ad::Add(tape, s, u);  // residual
    }
  }

  s = ad::PRelu(tape, s, P("separator.mask_prelu.alpha"));
  ad::Var mask_logits =
      ad::AddBias(tape, ad::MatMul(tape, s, P("separator.mask.weight")),
                  P("separator.mask.bias"));  // [F,N]
  ad::Var mask = cfg.mask_activation == MaskActivation::kSigmoid
                     ? ad::Sigmoid(tape, mask_logits)
                     : ad::Relu(tape, mask_logits);

  ad::Var masked = ad::Mul(tape, enc, mask);
  ad::Var out_frames = ad::MatMul(tape, masked, P("decoder.weight"));  // [F,L]
  ad::Var out = ad::OverlapAdd(tape, out_frames, stride, t_pad);
  if (t_pad != t) out = ad::SliceCols(tape, out, 0, t);
  graph.output = out;
  return graph;
}

Waveform Enhance(const EnhancerModel& model, const Waveform& noisy) {
  noisy.Validate();
  ad::Tape tape;
  ad::Var y = tape.Leaf(
      Tensor(1, static_cast<int>(noisy.size()), noisy.samples), false);
  EnhanceGraph g = EnhanceOnTape(tape, model, y, false);
  Waveform out;
  out.sample_rate = noisy.sample_rate;
  out.samples = tape.val(g.output).v;
  return out;
}

std::vector<Waveform> EnhanceBatch(const EnhancerModel& model,
                                   const std::vector<Waveform>& noisy) {
  std::vector<Waveform> out(noisy.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(noisy.size()); ++i)
    out[i] = Enhance(model, noisy[i]);
  return out;
}

Waveform ObservationAdd(const Waveform& noisy, const Waveform& enhanced,
                        double beta) {
  if (noisy.size() != enhanced.size())
    throw LengthMismatch("observation_add: lengths differ");
  if (noisy.sample_rate != enhanced.sample_rate)
    throw SampleRateMismatch("observation_add: sample rates differ");
  if (!(beta >= 0.0 && beta <= 1.0))
    throw RatioOutOfRange("observation_add: beta must be in [0,1]");

  Waveform out;
  out.sample_rate = noisy.sample_rate;
  out.samples.resize(noisy.size());
  for (std::size_t i = 0; i < noisy.size(); ++i)
    out.samples[i] = beta * noisy.samples[i] + (1.0 - beta) * enhanced.samples[i];
  return out;
}

}  // namespace sefx
