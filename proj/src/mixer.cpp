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

#include "sefx/mixer.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sefx/errors.hpp"
#include "sefx/util.hpp"

namespace sefx {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

double MeasureSnr(const Waveform& clean, const Waveform& noise) {
  if (clean.size() != noise.size())
    throw LengthMismatch("measure_snr: unequal lengths");
  const double ec = Energy(clean);
  const double en = Energy(noise);
  if (ec <= 0.0 || en <= 0.0)
    throw ZeroEnergySignal("measure_snr: zero-energy signal");
  return 10.0 * std::log10(ec / en);
}

MixtureExample MixAtSnr(const Waveform& clean, const Waveform& noise,
                        double snr_db, std::uint64_t seed,
                        const std::string& id) {
  clean.Validate();
  noise.Validate();
  if (clean.sample_rate != noise.sample_rate)
    throw SampleRateMismatch("mix_at_snr: sample rates differ");

  const std::size_t n = clean.size();
  RandomStream rng(MixSeed(seed, Fnv1a64(id.data(), id.size())));

  // Select a noise segment of exactly n samples: seeded offset, cyclic
  // tiling when the noise is shorter than the speech.
  std::vector<double> segment(n);
  if (noise.size() >= n) {
    const std::size_t max_off = noise.size() - n;
    const std::size_t off =
        static_cast<std::size_t>(rng.NextIndex(max_off + 1));
    for (std::size_t i = 0; i < n; ++i) segment[i] = noise.samples[off + i];
  } else {
    const std::size_t off =
        static_cast<std::size_t>(rng.NextIndex(noise.size()));
    for (std::size_t i = 0; i < n; ++i)
      segment[i] = noise.samples[(off + i) % noise.size()];
  }

  const double ec = Energy(clean);
  double en = 0.0;
  for (double s : segment) en += s * s;
  if (ec <= 0.0) throw ZeroEnergySignal("mix_at_snr: clean has zero energy");
  if (en <= 0.0)
    throw ZeroEnergySignal("mix_at_snr: noise segment has zero energy");

  // 10*log10(ec / (s^2 * en)) = snr_db  =>  s = sqrt(ec / (en * 10^(snr/10)))
  const double scale = std::sqrt(ec / (en * std::pow(10.0, snr_db / 10.0)));

  MixtureExample ex;
  ex.id = id;
  ex.snr_db = snr_db;
  ex.clean = clean;
  ex.noise.sample_rate = clean.sample_rate;
  ex.noise.samples.resize(n);
  ex.noisy.sample_rate = clean.sample_rate;
  ex.noisy.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ex.noise.samples[i] = segment[i] * scale;
    ex.noisy.samples[i] = clean.samples[i] + ex.noise.samples[i];
  }
  return ex;
}

Waveform SynthesizeSpeech(const SyntheticSpec& spec, std::uint64_t seed) {
  RandomStream rng(seed);
  const int n = spec.n_samples;
  const double sr = spec.sample_rate;

  const int harmonics = 2 + static_cast<int>(rng.NextIndex(3));  // 2..4
  const double f0 = rng.Uniform(spec.f0_lo_hz, spec.f0_hi_hz);
  const double am_rate = rng.Uniform(1.0, 6.0);
  const double am_phase = rng.Uniform(0.0, kTwoPi);

  std::vector<double> amp(harmonics), phase(harmonics);
  for (int h = 0; h < harmonics; ++h) {
    amp[h] = rng.Uniform(0.4, 1.0) / (h + 1);
    phase[h] = rng.Uniform(0.0, kTwoPi);
  }

  Waveform w;
  w.sample_rate = spec.sample_rate;
  w.samples.resize(n);
  double peak = 0.0;
  for (int i = 0; i < n; ++i) {
    const double tm = i / sr;
    const double am =
        0.55 + 0.45 * std::sin(kTwoPi * am_rate * tm + am_phase);
    double s = 0.0;
    for (int h = 0; h < harmonics; ++h)
      s += amp[h] * std::sin(kTwoPi * f0 * (h + 1) * tm + phase[h]);
    w.samples[i] = am * s;
    peak = std::max(peak, std::fabs(w.samples[i]));
  }
  if (peak > 0.0)
    for (double& s : w.samples) s *= 0.5 / peak;
  return w;
}

Waveform SynthesizeNoise(const SyntheticSpec& spec, std::uint64_t seed) {
  RandomStream rng(seed);
  const int n = spec.n_samples;
  const double pole = rng.Uniform(0.2, 0.8);

  Waveform w;
  w.sample_rate = spec.sample_rate;
  w.samples.resize(n);
  double state = 0.0;
  double peak = 0.0;
  for (int i = 0; i < n; ++i) {
    state = pole * state + (1.0 - pole) * rng.Gaussian();
    w.samples[i] = state;
    peak = std::max(peak, std::fabs(state));
  }
  if (peak > 0.0)
    for (double& s : w.samples) s *= 0.5 / peak;
  return w;
}

std::vector<MixtureExample> SimulateDataset(const SyntheticSpec& spec,
                                            const SnrRange& range, int count,
                                            std::uint64_t seed) {
  if (range.lo_db > range.hi_db)
    throw InvalidConfig("simulate_dataset: snr_lo > snr_hi");
  if (count < 1) throw InvalidConfig("simulate_dataset: count must be >= 1");

  std::vector<MixtureExample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const std::uint64_t item_seed = MixSeed(seed, static_cast<std::uint64_t>(i));
    Waveform speech = SynthesizeSpeech(spec, MixSeed(item_seed, 1));
    Waveform noise = SynthesizeNoise(spec, MixSeed(item_seed, 2));
    RandomStream rng(MixSeed(item_seed, 3));
    const double snr = rng.Uniform(range.lo_db, range.hi_db);
    std::ostringstream id;
    id << "synth-" << i;
    out.push_back(MixAtSnr(speech, noise, snr, MixSeed(item_seed, 4), id.str()));
  }
  return out;
}

std::vector<MixtureExample> SimulateDataset(
    const std::vector<ManifestEntry>& manifest, const SnrRange& range,
    std::uint64_t seed) {
  if (manifest.empty()) throw EmptyManifest("manifest holds no entries");
  if (range.lo_db > range.hi_db)
    throw InvalidConfig("simulate_dataset: snr_lo > snr_hi");

  std::vector<MixtureExample> out;
  out.reserve(manifest.size());
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const ManifestEntry& e = manifest[i];
    const std::uint64_t item_seed = MixSeed(seed, i);
    Waveform clean = ReadWav(e.clean_path);
    Waveform noise;
    if (e.noise_path.has_value()) {
      noise = ReadWav(*e.noise_path);
    } else {
      SyntheticSpec spec;
      spec.sample_rate = clean.sample_rate;
      spec.n_samples = static_cast<int>(clean.size());
      noise = SynthesizeNoise(spec, MixSeed(item_seed, 2));
    }
    double snr;
    if (e.snr_db.has_value()) {
      snr = *e.snr_db;
    } else {
      RandomStream rng(MixSeed(item_seed, 3));
      snr = rng.Uniform(range.lo_db, range.hi_db);
    }
    out.push_back(MixAtSnr(clean, noise, snr, MixSeed(item_seed, 4), e.id));
  }
  return out;
}

std::vector<ManifestEntry> ReadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open manifest: " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      std::ostringstream msg;
      msg << "manifest " << path << " line " << line_no << ": " << e.what();
      throw InvalidConfig(msg.str());
    }
    ManifestEntry e;
    e.clean_path = j.at("clean_path").get<std::string>();
    if (e.clean_path.empty())
      throw InvalidConfig("manifest entry with empty clean_path");
    if (j.contains("noise_path") && !j["noise_path"].is_null()) {
      e.noise_path = j["noise_path"].get<std::string>();
      if (e.noise_path->empty())
        throw InvalidConfig("manifest entry with empty noise_path");
    }
    if (j.contains("snr_db") && !j["snr_db"].is_null()) {
      e.snr_db = j["snr_db"].get<double>();
      if (!std::isfinite(*e.snr_db))
        throw InvalidConfig("manifest snr_db not finite");
    }
    e.id = j.value("id", "");
    entries.push_back(std::move(e));
  }
  return entries;
}

void WriteManifest(const std::string& path,
                   const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot open manifest for writing: " + path);
  for (const ManifestEntry& e : entries) {
    nlohmann::json j;
    j["clean_path"] = e.clean_path;
    if (e.noise_path.has_value()) j["noise_path"] = *e.noise_path;
    if (e.snr_db.has_value()) j["snr_db"] = *e.snr_db;
    j["id"] = e.id;
    out << j.dump() << "\n";
  }
  if (!out) throw IoFailure("failed writing manifest: " + path);
}

}  // namespace sefx
