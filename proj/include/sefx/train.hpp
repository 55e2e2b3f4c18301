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

#ifndef SEFX_TRAIN_HPP_
#define SEFX_TRAIN_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sefx/convtasnet.hpp"
#include "sefx/losses.hpp"
#include "sefx/mixer.hpp"

namespace sefx {

enum class TrainStage { kPretrain, kFinetune };
enum class LossKind { kSnr, kLmfbMt, kAsrMt, kSslMt };

std::string LossKindName(LossKind k);
LossKind LossKindFromName(const std::string& name);

struct TrainConfig {
  TrainStage stage = TrainStage::kPretrain;
  LossKind loss = LossKind::kSnr;
  ConvTasNetConfig enhancer = ConvTasNetConfig::FullPreset();
  double initial_lr = 5e-4;
  double lr_factor = 0.75;
  int patience_epochs = 2;
  int max_epochs = 100;
  int batch_size = 8;
  std::uint64_t seed = 17;
  MultitaskConfig mt;
  SnrLossOptions snr_opts;
  // Adam
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // Gradient clipping at global norm; disable with clip_enabled = false.
  double clip_norm = 5.0;
  bool clip_enabled = true;
  std::string log_path;  // per-epoch JSONL; empty disables the file log

  void Validate() const;

  static TrainConfig PretrainDefaults();
  static TrainConfig FinetuneDefaults();
};

// Frozen side inputs for the feature-domain losses.
struct LossContext {
  const EncoderAdapter* encoder = nullptr;
  LayerWeights layer_weights;
  const RecognizerAdapter* recognizer = nullptr;
  LmfbConfig lmfb;
};

struct TrainState {
  int epoch = 0;
  double current_lr = 0.0;
  double best_dev_loss = 0.0;  // +inf until the first dev evaluation
  int epochs_since_improvement = 0;
  int n_lr_cuts = 0;
  std::string rng_state;
};

// "did not decrease for 2 epochs": a counter of consecutive non-improving
// epochs (no new best) that cuts the LR by lr_factor when it reaches the
// patience and then resets.
void LrScheduleStep(TrainState* state, double dev_loss, const TrainConfig& cfg);

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long step = 0;
};

AdamState InitAdam(const EnhancerModel& model);
void AdamUpdate(EnhancerModel* model, const std::vector<Tensor>& grads,
                AdamState* opt, double lr, const TrainConfig& cfg);

struct Checkpoint {
  int format_version = 1;
  EnhancerModel model;
  AdamState opt;
  TrainState state;
  TrainStage stage = TrainStage::kPretrain;
  LossKind loss = LossKind::kSnr;
  MultitaskConfig mt;
  SnrLossOptions snr_opts;
};

void SaveCheckpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint LoadCheckpoint(const std::string& path);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_total = 0.0;
  std::map<std::string, double> train_components;
  double dev_total = 0.0;
  std::map<std::string, double> dev_components;
  double wall_time_s = 0.0;
};

struct TrainResult {
  Checkpoint best;
  Checkpoint last;
  std::vector<EpochLog> logs;
  double initial_dev_loss = 0.0;  // dev loss of the starting parameters
};

// Stage 1: SNR-loss optimization from a fresh seeded model.
TrainResult Pretrain(const std::vector<MixtureExample>& train,
                     const std::vector<MixtureExample>& dev,
                     const TrainConfig& cfg);

// Stage 2: multitask fine-tuning from a checkpoint with a fresh optimizer
// and schedule. ctx supplies the frozen encoder/recognizer.
TrainResult Finetune(const Checkpoint& start,
                     const std::vector<MixtureExample>& train,
                     const std::vector<MixtureExample>& dev,
                     const TrainConfig& cfg, const LossContext& ctx);

// Continues an interrupted run, keeping optimizer and schedule state.
TrainResult ResumeTraining(const Checkpoint& ckpt,
                           const std::vector<MixtureExample>& train,
                           const std::vector<MixtureExample>& dev,
                           const TrainConfig& cfg, const LossContext& ctx);

// Mean loss of a model over a dataset (value only, no gradients).
std::pair<double, std::map<std::string, double>> EvaluateLoss(
    const EnhancerModel& model, const std::vector<MixtureExample>& data,
    LossKind loss, const MultitaskConfig& mt, const SnrLossOptions& snr_opts,
    const LossContext& ctx);

}  // namespace sefx

#endif  // SEFX_TRAIN_HPP_
