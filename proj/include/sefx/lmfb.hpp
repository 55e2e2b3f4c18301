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

#ifndef SEFX_LMFB_HPP_
#define SEFX_LMFB_HPP_

#include "sefx/autodiff.hpp"
#include "sefx/tensor.hpp"
#include "sefx/wave.hpp"

namespace sefx {

// Log mel-filterbank extraction. Convention: Hann analysis window, no
// pre-emphasis, magnitude-squared spectrum, triangular mel filters, natural
// log with an explicit floor.
struct LmfbConfig {
  int n_mels = 80;
  int win_length = 400;
  int hop_length = 200;
  int fft_size = 512;
  double log_floor = 1e-10;
  double mel_f_min_hz = 0.0;
  double mel_f_max_hz = 0.0;  // 0 means sample_rate / 2

  void Validate() const;
};

struct FeatureMatrix {
  Tensor values;  // n_mels x frames
  double frame_rate = 0.0;
};

// floor((t - win)/hop) + 1, no padding. Throws InputTooShort when t < win.
int FrameCount(int t, int win, int hop);

FeatureMatrix Lmfb(const Waveform& wave, const LmfbConfig& cfg);

// Tape route used by the feature-domain losses: samples[1,T] -> [frames,
// n_mels]. Gradients flow to the samples everywhere the floor is inactive.
ad::Var LmfbOnTape(ad::Tape& tape, ad::Var samples, int sample_rate,
                   const LmfbConfig& cfg);

// Mel filter weights, bins x n_mels. Exposed for the oracle tests.
Tensor MelFilterWeights(const LmfbConfig& cfg, int sample_rate);

double HzToMel(double hz);
double MelToHz(double mel);

}  // namespace sefx

#endif  // SEFX_LMFB_HPP_
