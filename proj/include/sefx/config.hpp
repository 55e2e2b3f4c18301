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

#ifndef SEFX_CONFIG_HPP_
#define SEFX_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "sefx/convtasnet.hpp"
#include "sefx/lmfb.hpp"
#include "sefx/losses.hpp"

namespace sefx {

struct PathsConfig {
  std::string workdir = "work";
  std::string train_manifest;
  std::string dev_manifest;
  std::string eval_manifest;
  std::string checkpoint;
  std::string report;
};

struct SignalSection {
  int sample_rate = 16000;
  int n_samples = 4000;
  double f0_lo_hz = 100.0;
  double f0_hi_hz = 300.0;
  double snr_lo_db = -3.0;
  double snr_hi_db = 20.0;
  int count = 100;
};

struct EncoderSection {
  std::string kind = "toy";  // "toy" or "external"
  std::string descriptor;    // JSON descriptor path for "external"
  int n_layers = 4;
  int dim = 32;
  int win = 400;
  int hop = 320;
  std::string weight_scheme = "latter_half_uniform";
  int cut_index = -1;  // override for the latter-half cut; -1 = floor(N/2)
  int one_hot_index = 0;
};

struct EnhancerSection {
  std::string preset = "desk";  // desk | full | custom
  ConvTasNetConfig custom = ConvTasNetConfig::DeskPreset();

  ConvTasNetConfig Resolve() const;
};

struct LossSection {
  std::string kind = "snr";
  double alpha = 0.1;
  double lambda = 0.3;
  double epsilon = 1e-8;
  std::string snr_numerator = "estimate";  // estimate | reference
  int recognizer_vocab = 9;

  MultitaskConfig Multitask() const;
  SnrLossOptions SnrOptions() const;
};

struct TrainingSection {
  double pretrain_lr = 5e-4;
  double finetune_lr = 1e-4;
  double lr_factor = 0.75;
  int patience_epochs = 2;
  int pretrain_epochs = 100;
  int finetune_epochs = 50;
  int batch_size = 8;
  double clip_norm = 5.0;
  bool clip_enabled = true;
};

struct EvaluationSection {
  std::vector<double> betas = {0.0, 0.1, 0.5};
  std::vector<double> alphas = {0.0, 1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0};
  double snr_lo_db = 0.0;
  double snr_hi_db = 10.0;
  double cap_db = 60.0;
  std::string external_scorer;
};

// Whole-run configuration: one human-readable JSON document of flat
// sections. Unknown keys are rejected at load time; every section is
// validated against its module's invariants.
struct GlobalConfig {
  std::uint64_t seed = 17;
  int workers = 1;
  PathsConfig paths;
  SignalSection signal;
  LmfbConfig lmfb;
  EncoderSection encoder;
  EnhancerSection enhancer;
  LossSection loss;
  TrainingSection training;
  EvaluationSection evaluation;

  void Validate() const;
};

GlobalConfig LoadGlobalConfig(const std::string& path);
void DumpGlobalConfig(const GlobalConfig& cfg, const std::string& path);
std::string GlobalConfigToJson(const GlobalConfig& cfg);
GlobalConfig GlobalConfigFromJson(const std::string& text);

// Environment overrides: SEFX_WORKDIR and SEFX_SEED.
void ApplyEnvOverrides(GlobalConfig* cfg);

}  // namespace sefx

#endif  // SEFX_CONFIG_HPP_
