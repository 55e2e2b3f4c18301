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

#include "sefx/losses.hpp"

#include <cmath>

#include "sefx/errors.hpp"

namespace sefx {

namespace {
const double kNeg10OverLn10 = -10.0 / std::log(10.0);

Tensor RowTensor(const Waveform& w) {
  return Tensor(1, static_cast<int>(w.size()), w.samples);
}

void CheckLengths(const Waveform& a, const Waveform& b, const char* who) {
  if (a.size() != b.size())
    throw LengthMismatch(std::string(who) + ": waveform lengths differ");
  if (a.sample_rate != b.sample_rate)
    throw SampleRateMismatch(std::string(who) + ": sample rates differ");
}
}  // namespace

void MultitaskConfig::Validate() const {
  if (alpha < 0.0) throw InvalidConfig("multitask alpha must be >= 0");
  if (lambda < 0.0 || lambda > 1.0)
    throw InvalidConfig("multitask lambda must be in [0,1]");
  if (epsilon <= 0.0) throw InvalidConfig("multitask epsilon must be > 0");
}

ad::Var SnrLossOnTape(ad::Tape& tape, ad::Var estimate, const Tensor& reference,
                      const SnrLossOptions& opts) {
  const Tensor& est = tape.val(estimate);
  if (est.rows != 1 || reference.rows != 1 || est.cols != reference.cols)
    throw LengthMismatch("snr_loss: estimate/reference shape mismatch");

  ad::Var ref = tape.Leaf(reference, false);
  ad::Var num;
  if (opts.numerator == SnrNumerator::kEstimate) {
    num = ad::Sum(tape, ad::Square(tape, estimate));
  } else {
    num = ad::Sum(tape, ad::Square(tape, ref));
  }
  if (tape.val(num).v[0] < opts.epsilon)
    throw ZeroEnergyEstimate("snr_loss: numerator energy below epsilon");

  ad::Var err = ad::Sub(tape, ref, estimate);
  ad::Var den = ad::AddConst(tape, ad::Sum(tape, ad::Square(tape, err)),
                             opts.epsilon);
  // -10*log10(num/den) = -(10/ln10) * (ln num - ln den)
  ad::Var diff = ad::Sub(tape, ad::Ln(tape, num), ad::Ln(tape, den));
  return ad::Scale(tape, diff, kNeg10OverLn10);
}

double SnrLoss(const Waveform& estimate, const Waveform& reference,
               const SnrLossOptions& opts) {
  CheckLengths(estimate, reference, "snr_loss");
  ad::Tape tape;
  ad::Var est = tape.Leaf(RowTensor(estimate), false);
  ad::Var loss = SnrLossOnTape(tape, est, RowTensor(reference), opts);
  return tape.val(loss).v[0];
}

double FeatureMse(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw LengthMismatch("feature_mse: shape mismatch");
  if (a.empty()) throw LengthMismatch("feature_mse: empty features");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.v[i] - b.v[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

TapeLoss SnrOnlyOnTape(ad::Tape& tape, ad::Var estimate,
                       const Tensor& reference, const SnrLossOptions& opts) {
  ad::Var snr = SnrLossOnTape(tape, estimate, reference, opts);
  TapeLoss out{snr, {}};
  out.components["snr"] = tape.val(snr).v[0];
  return out;
}

TapeLoss LmfbMtOnTape(ad::Tape& tape, ad::Var estimate, const Tensor& reference,
                      int sample_rate, const LmfbConfig& cfg, double alpha,
                      const SnrLossOptions& snr_opts) {
  if (alpha < 0.0) throw InvalidConfig("alpha must be >= 0");
  ad::Var ref = tape.Leaf(reference, false);
  ad::Var feats_est = LmfbOnTape(tape, estimate, sample_rate, cfg);
  ad::Var feats_ref = LmfbOnTape(tape, ref, sample_rate, cfg);
  ad::Var diff = ad::Sub(tape, feats_est, feats_ref);
  const double m = static_cast<double>(tape.val(diff).size());
  ad::Var lmfb = ad::Scale(tape, ad::Sum(tape, ad::Square(tape, diff)),
                           1.0 / m);
  ad::Var snr = SnrLossOnTape(tape, estimate, reference, snr_opts);
  ad::Var total = ad::Add(tape, lmfb, ad::Scale(tape, snr, alpha));

  TapeLoss out{total, {}};
  out.components["lmfb"] = tape.val(lmfb).v[0];
  out.components["snr"] = tape.val(snr).v[0];
  return out;
}

LossValue LmfbMtLoss(const Waveform& estimate, const Waveform& reference,
                     const LmfbConfig& cfg, double alpha,
                     const SnrLossOptions& snr_opts) {
  CheckLengths(estimate, reference, "lmfb_mt_loss");
  ad::Tape tape;
  ad::Var est = tape.Leaf(RowTensor(estimate), false);
  TapeLoss tl = LmfbMtOnTape(tape, est, RowTensor(reference),
                             estimate.sample_rate, cfg, alpha, snr_opts);
  return LossValue{tape.val(tl.total).v[0], tl.components};
}

namespace {

// Weighted sum of per-layer tape nodes (each [frames, dim]); zero-weight
// layers are skipped so their gradients never materialize.
ad::Var WeightedSumOnTape(ad::Tape& tape, const std::vector<ad::Var>& layers,
                          const LayerWeights& w) {
  if (static_cast<int>(layers.size()) != w.size())
    throw LengthMismatch("weighted_sum: weight/layer count mismatch");
  w.Validate();
  ad::Var acc = -1;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (w.weights[l] == 0.0) continue;
    ad::Var term = ad::Scale(tape, layers[l], w.weights[l]);
    acc = acc < 0 ? term : ad::Add(tape, acc, term);
  }
  if (acc < 0) throw InvalidScheme("weighted_sum: all weights are zero");
  return acc;
}

// Clean-branch features as a constant [frames, dim] leaf.
Tensor TransposedWeightedSum(const EncoderAdapter& adapter,
                             const Waveform& wave, const LayerWeights& w) {
  FeatureSeries fs = adapter.EncodeLayers(wave);
  Tensor pooled = WeightedSum(fs, w);  // dim x frames
  Tensor out(pooled.cols, pooled.rows);
  for (int d = 0; d < pooled.rows; ++d)
    for (int f = 0; f < pooled.cols; ++f) out.at(f, d) = pooled.at(d, f);
  return out;
}

ad::Var SslMseOnTape(ad::Tape& tape, ad::Var estimate, const Waveform& clean,
                     const EncoderAdapter& adapter, const LayerWeights& w) {
  const Tensor& est = tape.val(estimate);
  if (est.cols != static_cast<int>(clean.size()))
    throw LengthMismatch("ssl_mse_loss: waveform lengths differ");

  std::vector<ad::Var> layers = adapter.EncodeLayersOnTape(tape, estimate);
  ad::Var pooled_est = WeightedSumOnTape(tape, layers, w);
  Tensor pooled_clean = TransposedWeightedSum(adapter, clean, w);
  ad::Var diff =
      ad::Sub(tape, pooled_est, tape.Leaf(std::move(pooled_clean), false));
  const double dt = static_cast<double>(tape.val(diff).size());
  return ad::Scale(tape, ad::Sum(tape, ad::Square(tape, diff)), 1.0 / dt);
}

}  // namespace

double SslMseFromSeries(const FeatureSeries& enhanced,
                        const FeatureSeries& clean,
                        const LayerWeights& weights) {
  Tensor a = WeightedSum(enhanced, weights);
  Tensor b = WeightedSum(clean, weights);
  return FeatureMse(a, b);
}

double SslMseLoss(const Waveform& estimate, const Waveform& reference,
                  const EncoderAdapter& adapter, const LayerWeights& weights) {
  CheckLengths(estimate, reference, "ssl_mse_loss");
  FeatureSeries est = adapter.EncodeLayers(estimate);
  FeatureSeries ref = adapter.EncodeLayers(reference);
  return SslMseFromSeries(est, ref, weights);
}

TapeLoss SslMtOnTape(ad::Tape& tape, ad::Var estimate, const Tensor& reference,
                     int sample_rate, const EncoderAdapter& adapter,
                     const LayerWeights& weights, double alpha,
                     const SnrLossOptions& snr_opts) {
  if (alpha < 0.0) throw InvalidConfig("alpha must be >= 0");
  Waveform clean(reference.v, sample_rate);
  ad::Var ssl = SslMseOnTape(tape, estimate, clean, adapter, weights);
  ad::Var snr = SnrLossOnTape(tape, estimate, reference, snr_opts);
  ad::Var total = ad::Add(tape, ssl, ad::Scale(tape, snr, alpha));

  TapeLoss out{total, {}};
  out.components["ssl_mse"] = tape.val(ssl).v[0];
  out.components["snr"] = tape.val(snr).v[0];
  return out;
}

LossValue SslMtLoss(const Waveform& estimate, const Waveform& reference,
                    const EncoderAdapter& adapter, const LayerWeights& weights,
                    double alpha, const SnrLossOptions& snr_opts) {
  CheckLengths(estimate, reference, "ssl_mt_loss");
  ad::Tape tape;
  ad::Var est = tape.Leaf(RowTensor(estimate), false);
  TapeLoss tl = SslMtOnTape(tape, est, RowTensor(reference),
                            estimate.sample_rate, adapter, weights, alpha,
                            snr_opts);
  return LossValue{tape.val(tl.total).v[0], tl.components};
}

TapeLoss AsrMtOnTape(ad::Tape& tape, ad::Var estimate, const Tensor& reference,
                     int sample_rate, const std::vector<int>& tokens,
                     const RecognizerAdapter& recognizer,
                     const MultitaskConfig& mt,
                     const SnrLossOptions& snr_opts) {
  mt.Validate();
  RecognizerAdapter::TapeLosses rl =
      recognizer.LossesOnTape(tape, estimate, sample_rate, tokens);
  ad::Var asr = ad::Add(tape, ad::Scale(tape, rl.ctc, mt.lambda),
                        ad::Scale(tape, rl.attention, 1.0 - mt.lambda));
  ad::Var snr = SnrLossOnTape(tape, estimate, reference, snr_opts);
  ad::Var total = ad::Add(tape, asr, ad::Scale(tape, snr, mt.alpha));

  TapeLoss out{total, {}};
  out.components["ctc"] = tape.val(rl.ctc).v[0];
  out.components["att"] = tape.val(rl.attention).v[0];
  out.components["asr"] = tape.val(asr).v[0];
  out.components["snr"] = tape.val(snr).v[0];
  return out;
}

LossValue AsrMtLoss(const Waveform& estimate, const Waveform& reference,
                    const std::vector<int>& tokens,
                    const RecognizerAdapter& recognizer,
                    const MultitaskConfig& mt, const SnrLossOptions& snr_opts) {
  CheckLengths(estimate, reference, "asr_mt_loss");
  ad::Tape tape;
  ad::Var est = tape.Leaf(RowTensor(estimate), false);
  TapeLoss tl = AsrMtOnTape(tape, est, RowTensor(reference),
                            estimate.sample_rate, tokens, recognizer, mt,
                            snr_opts);
  return LossValue{tape.val(tl.total).v[0], tl.components};
}

}  // namespace sefx
