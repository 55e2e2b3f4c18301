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

#ifndef SEFX_MIXER_HPP_
#define SEFX_MIXER_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sefx/wave.hpp"

namespace sefx {

// One simulated noisy utterance. noise is the post-scaling noise, so
// noisy == clean + noise elementwise and the measured SNR of (clean, noise)
// equals snr_db.
struct MixtureExample {
  Waveform clean;
  Waveform noise;
  Waveform noisy;
  double snr_db = 0.0;
  std::string id;
};

// One line of a JSONL manifest.
struct ManifestEntry {
  std::string clean_path;
  std::optional<std::string> noise_path;
  std::optional<double> snr_db;
  std::string id;
};

// Full-utterance SNR in dB: 10*log10(||clean||^2 / ||noise||^2).
double MeasureSnr(const Waveform& clean, const Waveform& noise);

// Scales noise so the clean-to-noise energy ratio hits snr_db, then adds.
// A noise longer than clean contributes a seed-selected segment; a shorter
// one is tiled cyclically from a seed-selected offset.
MixtureExample MixAtSnr(const Waveform& clean, const Waveform& noise,
                        double snr_db, std::uint64_t seed,
                        const std::string& id = "");

// Synthetic desk-scale material: "speech" is a seeded sum of 2..4 harmonics
// under slow amplitude modulation, "noise" is seeded one-pole-filtered
// white noise.
struct SyntheticSpec {
  int sample_rate = 16000;
  int n_samples = 4000;
  double f0_lo_hz = 100.0;
  double f0_hi_hz = 300.0;
};

Waveform SynthesizeSpeech(const SyntheticSpec& spec, std::uint64_t seed);
Waveform SynthesizeNoise(const SyntheticSpec& spec, std::uint64_t seed);

struct SnrRange {
  double lo_db = -3.0;
  double hi_db = 20.0;
};

// Deterministic function of (spec, range, count, seed); per-example SNRs
// are drawn uniformly from the range at simulation time.
std::vector<MixtureExample> SimulateDataset(const SyntheticSpec& spec,
                                            const SnrRange& range, int count,
                                            std::uint64_t seed);

// Manifest-driven variant. Entries without a noise path get seeded
// synthetic noise; entries without snr_db draw from the range.
std::vector<MixtureExample> SimulateDataset(
    const std::vector<ManifestEntry>& manifest, const SnrRange& range,
    std::uint64_t seed);

// JSONL manifest I/O: one JSON object per line with keys clean_path,
// noise_path (optional), snr_db (optional), id.
std::vector<ManifestEntry> ReadManifest(const std::string& path);
void WriteManifest(const std::string& path,
                   const std::vector<ManifestEntry>& entries);

}  // namespace sefx

#endif  // SEFX_MIXER_HPP_
