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

#include "sefx/lmfb.hpp"

#include <cmath>

#include "sefx/errors.hpp"

namespace sefx {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

Tensor HannWindow(int win) {
  Tensor w(1, win);
  for (int i = 0; i < win; ++i)
    w.v[i] = 0.5 - 0.5 * std::cos(kTwoPi * i / win);
  return w;
}

// Real-DFT basis as two [fft, bins] matrices so the spectrum is a matmul.
void DftMatrices(int fft, Tensor* re, Tensor* im) {
  const int bins = fft / 2 + 1;
  *re = Tensor(fft, bins);
  *im = Tensor(fft, bins);
  for (int n = 0; n < fft; ++n)
    for (int k = 0; k < bins; ++k) {
      const double ang = kTwoPi * n * k / fft;
      re->at(n, k) = std::cos(ang);
      im->at(n, k) = -std::sin(ang);
    }
}
}  // namespace

void LmfbConfig::Validate() const {
  if (n_mels < 1) throw InvalidConfig("lmfb: n_mels must be >= 1");
  if (hop_length < 1) throw InvalidConfig("lmfb: hop_length must be >= 1");
  if (win_length < 1) throw InvalidConfig("lmfb: win_length must be >= 1");
  if (win_length > fft_size)
    throw InvalidConfig("lmfb: win_length must be <= fft_size");
  if (log_floor <= 0.0) throw InvalidConfig("lmfb: log_floor must be > 0");
}

int FrameCount(int t, int win, int hop) {
  if (t < win) throw InputTooShort("frame_count: signal shorter than window");
  return (t - win) / hop + 1;
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

Tensor MelFilterWeights(const LmfbConfig& cfg, int sample_rate) {
  const int bins = cfg.fft_size / 2 + 1;
  const double f_min = cfg.mel_f_min_hz;
  const double f_max =
      cfg.mel_f_max_hz > 0.0 ? cfg.mel_f_max_hz : sample_rate / 2.0;
  const double mel_min = HzToMel(f_min);
  const double mel_max = HzToMel(f_max);

  std::vector<double> centers(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i)
    centers[i] =
        MelToHz(mel_min + (mel_max - mel_min) * i / (cfg.n_mels + 1));

  Tensor w(bins, cfg.n_mels);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = centers[m], mid = centers[m + 1], hi = centers[m + 2];
    for (int b = 0; b < bins; ++b) {
      const double f = static_cast<double>(b) * sample_rate / cfg.fft_size;
      double v = 0.0;
      if (f > lo && f < hi)
        v = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
      w.at(b, m) = v;
    }
  }
  return w;
}

ad::Var LmfbOnTape(ad::Tape& tape, ad::Var samples, int sample_rate,
                   const LmfbConfig& cfg) {
  cfg.Validate();
  const Tensor& x = tape.val(samples);
  if (x.cols < cfg.win_length)
    throw InputTooShort("lmfb: input shorter than win_length");

  ad::Var frames = ad::UnfoldRows(tape, samples, cfg.win_length, cfg.hop_length);

  Tensor hann = HannWindow(cfg.win_length);
  Tensor hann_rows(tape.val(frames).rows, cfg.win_length);
  for (int r = 0; r < hann_rows.rows; ++r)
    for (int c = 0; c < cfg.win_length; ++c) hann_rows.at(r, c) = hann.v[c];
  ad::Var windowed =
      ad::Mul(tape, frames, tape.Leaf(std::move(hann_rows), false));

  if (cfg.fft_size > cfg.win_length)
    windowed = ad::PadCols(tape, windowed, 0, cfg.fft_size - cfg.win_length);

  Tensor re, im;
  DftMatrices(cfg.fft_size, &re, &im);
  ad::Var spec_re = ad::MatMul(tape, windowed, tape.Leaf(std::move(re), false));
  ad::Var spec_im = ad::MatMul(tape, windowed, tape.Leaf(std::move(im), false));
  ad::Var power = ad::Add(tape, ad::Square(tape, spec_re),
                          ad::Square(tape, spec_im));

  Tensor mel = MelFilterWeights(cfg, sample_rate);
  ad::Var banked = ad::MatMul(tape, power, tape.Leaf(std::move(mel), false));
  return ad::LogFloored(tape, banked, cfg.log_floor);
}

FeatureMatrix Lmfb(const Waveform& wave, const LmfbConfig& cfg) {
  wave.Validate();
  ad::Tape tape;
  ad::Var samples = tape.Leaf(
      Tensor(1, static_cast<int>(wave.size()), wave.samples), false);
  ad::Var feats = LmfbOnTape(tape, samples, wave.sample_rate, cfg);

  const Tensor& fv = tape.val(feats);  // frames x n_mels
  FeatureMatrix out;
  out.frame_rate = static_cast<double>(wave.sample_rate) / cfg.hop_length;
  out.values = Tensor(cfg.n_mels, fv.rows);
  for (int f = 0; f < fv.rows; ++f)
    for (int m = 0; m < cfg.n_mels; ++m) out.values.at(m, f) = fv.at(f, m);
  return out;
}

}  // namespace sefx
