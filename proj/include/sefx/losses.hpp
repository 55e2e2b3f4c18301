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

#ifndef SEFX_LOSSES_HPP_
#define SEFX_LOSSES_HPP_

#include <map>
#include <string>
#include <vector>

#include "sefx/autodiff.hpp"
#include "sefx/encoder.hpp"
#include "sefx/lmfb.hpp"
#include "sefx/recognizer.hpp"
#include "sefx/wave.hpp"

namespace sefx {

// Which energy sits in the SNR-loss numerator. kEstimate implements the
// formula as printed (||x_hat||^2); kReference is the conventional variant
// kept selectable for comparison.
enum class SnrNumerator { kEstimate, kReference };

struct SnrLossOptions {
  double epsilon = 1e-8;
  SnrNumerator numerator = SnrNumerator::kEstimate;
};

struct MultitaskConfig {
  double alpha = 0.1;    // SNR weight
  double lambda = 0.3;   // CTC / attention balance
  double epsilon = 1e-8;

  void Validate() const;
};

struct LossValue {
  double total = 0.0;
  std::map<std::string, double> components;
};

// -10*log10(num / (||x - x_hat||^2 + eps)). Raises ZeroEnergyEstimate when
// the numerator energy falls below eps.
double SnrLoss(const Waveform& estimate, const Waveform& reference,
               const SnrLossOptions& opts = {});
ad::Var SnrLossOnTape(ad::Tape& tape, ad::Var estimate,
                      const Tensor& reference, const SnrLossOptions& opts = {});

// ||A - B||_F^2 / numel(A): the mean squared feature distance shared by the
// LMFB and encoder-space losses.
double FeatureMse(const Tensor& a, const Tensor& b);

// LMFB multitask criterion: lmfb + alpha * snr.
LossValue LmfbMtLoss(const Waveform& estimate, const Waveform& reference,
                     const LmfbConfig& cfg, double alpha,
                     const SnrLossOptions& snr_opts = {});

// Encoder-space distance: || WS(enc(est)) - WS(enc(ref)) ||_F^2 / (D*T').
// The adapter stays frozen; gradients flow only through the estimate branch.
double SslMseLoss(const Waveform& estimate, const Waveform& reference,
                  const EncoderAdapter& adapter, const LayerWeights& weights);
double SslMseFromSeries(const FeatureSeries& enhanced,
                        const FeatureSeries& clean, const LayerWeights& weights);

// ssl_mse + alpha * snr.
LossValue SslMtLoss(const Waveform& estimate, const Waveform& reference,
                    const EncoderAdapter& adapter, const LayerWeights& weights,
                    double alpha, const SnrLossOptions& snr_opts = {});

// lambda*ctc + (1-lambda)*att + alpha * snr over a frozen recognizer.
LossValue AsrMtLoss(const Waveform& estimate, const Waveform& reference,
                    const std::vector<int>& tokens,
                    const RecognizerAdapter& recognizer,
                    const MultitaskConfig& mt,
                    const SnrLossOptions& snr_opts = {});

// Tape-building variants used by the training loop and gradient checks.
struct TapeLoss {
  ad::Var total;
  std::map<std::string, double> components;
};

TapeLoss SnrOnlyOnTape(ad::Tape& tape, ad::Var estimate, const Tensor& reference,
                       const SnrLossOptions& opts = {});
TapeLoss LmfbMtOnTape(ad::Tape& tape, ad::Var estimate, const Tensor& reference,
                      int sample_rate, const LmfbConfig& cfg, double alpha,
                      const SnrLossOptions& snr_opts = {});
TapeLoss SslMtOnTape(ad::Tape& tape, ad::Var estimate, const Tensor& reference,
                     int sample_rate, const EncoderAdapter& adapter,
                     const LayerWeights& weights, double alpha,
                     const SnrLossOptions& snr_opts = {});
TapeLoss AsrMtOnTape(ad::Tape& tape, ad::Var estimate, const Tensor& reference,
                     int sample_rate, const std::vector<int>& tokens,
                     const RecognizerAdapter& recognizer,
                     const MultitaskConfig& mt,
                     const SnrLossOptions& snr_opts = {});

}  // namespace sefx

#endif  // SEFX_LOSSES_HPP_
