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

#ifndef SEFX_WAVE_HPP_
#define SEFX_WAVE_HPP_

#include <string>
#include <vector>

namespace sefx {

// Mono waveform, dimensionless amplitude nominally in [-1, 1]. Samples are
// held in double precision throughout mixing and metric computation.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  Waveform() = default;
  Waveform(std::vector<double> s, int rate)
      : samples(std::move(s)), sample_rate(rate) {}

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }

  // Enforces the type invariants: positive rate, length >= 1, all finite.
  void Validate() const;
};

double Energy(const Waveform& w);

enum class WavFormat { kPcm16, kFloat32 };

// RIFF mono reader/writer. Readers accept 16-bit PCM and 32-bit IEEE float;
// anything else raises UnsupportedFormat. write+read round-trips exactly
// for float32 and within 1/32768 for PCM16.
Waveform ReadWav(const std::string& path);
void WriteWav(const std::string& path, const Waveform& w,
              WavFormat format = WavFormat::kFloat32);

}  // namespace sefx

#endif  // SEFX_WAVE_HPP_
