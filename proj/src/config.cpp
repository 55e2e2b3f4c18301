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

#include "sefx/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include <json.hpp>

#include "sefx/errors.hpp"
#include "sefx/train.hpp"

namespace sefx {

using nlohmann::json;

ConvTasNetConfig EnhancerSection::Resolve() const {
  if (preset == "desk") return ConvTasNetConfig::DeskPreset();
  if (preset == "full") return ConvTasNetConfig::FullPreset();
  if (preset == "custom") return custom;
  throw InvalidConfig("enhancer preset must be desk, full, or custom");
}

MultitaskConfig LossSection::Multitask() const {
  MultitaskConfig mt;
  mt.alpha = alpha;
  mt.lambda = lambda;
  mt.epsilon = epsilon;
  return mt;
}

SnrLossOptions LossSection::SnrOptions() const {
  SnrLossOptions o;
  o.epsilon = epsilon;
  if (snr_numerator == "estimate")
    o.numerator = SnrNumerator::kEstimate;
  else if (snr_numerator == "reference")
    o.numerator = SnrNumerator::kReference;
  else
    throw InvalidConfig("snr_numerator must be estimate or reference");
  return o;
}

void GlobalConfig::Validate() const {
  if (workers < 1) throw InvalidConfig("workers must be >= 1");
  if (signal.sample_rate < 1) throw InvalidConfig("signal.sample_rate must be >= 1");
  if (signal.n_samples < 1) throw InvalidConfig("signal.n_samples must be >= 1");
  if (signal.count < 1) throw InvalidConfig("signal.count must be >= 1");
  if (signal.snr_lo_db > signal.snr_hi_db)
    throw InvalidConfig("signal snr range is inverted");
  lmfb.Validate();
  if (encoder.kind != "toy" && encoder.kind != "external")
    throw InvalidConfig("encoder.kind must be toy or external");
  if (encoder.n_layers < 1 || encoder.dim < 1 || encoder.win < 1 ||
      encoder.hop < 1)
    throw InvalidConfig("encoder dimensions must be >= 1");
  if (encoder.weight_scheme != "latter_half_uniform" &&
      encoder.weight_scheme != "uniform" && encoder.weight_scheme != "one_hot")
    throw InvalidConfig("unknown encoder.weight_scheme");
  enhancer.Resolve().Validate();
  loss.Multitask().Validate();
  loss.SnrOptions();
  LossKindFromName(loss.kind);
  if (loss.recognizer_vocab < 2)
    throw InvalidConfig("loss.recognizer_vocab must be >= 2 (blank + symbols)");
  if (!(training.lr_factor > 0.0 && training.lr_factor < 1.0))
    throw InvalidConfig("training.lr_factor must be in (0,1)");
  if (training.patience_epochs < 1)
    throw InvalidConfig("training.patience_epochs must be >= 1");
  if (training.pretrain_epochs < 1 || training.finetune_epochs < 1)
    throw InvalidConfig("training epoch limits must be >= 1");
  if (training.batch_size < 1)
    throw InvalidConfig("training.batch_size must be >= 1");
  if (training.pretrain_lr <= 0.0 || training.finetune_lr <= 0.0)
    throw InvalidConfig("training learning rates must be > 0");
  if (evaluation.snr_lo_db > evaluation.snr_hi_db)
    throw InvalidConfig("evaluation snr range is inverted");
  for (double b : evaluation.betas)
    if (!(b >= 0.0 && b <= 1.0))
      throw InvalidConfig("evaluation.betas must lie in [0,1]");
  for (double a : evaluation.alphas)
    if (a < 0.0) throw InvalidConfig("evaluation.alphas must be >= 0");
  if (evaluation.cap_db <= 0.0)
    throw InvalidConfig("evaluation.cap_db must be > 0");
}

namespace {

void RejectUnknown(const json& j, const std::set<std::string>& known,
                   const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!known.count(key))
      throw InvalidConfig("unknown config key '" + key + "' in " + where);
}

template <typename T>
void Get(const json& j, const char* key, T* dst) {
  if (j.contains(key)) *dst = j.at(key).get<T>();
}

}  // namespace

std::string GlobalConfigToJson(const GlobalConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["workers"] = cfg.workers;
  j["paths"] = {{"workdir", cfg.paths.workdir},
                {"train_manifest", cfg.paths.train_manifest},
                {"dev_manifest", cfg.paths.dev_manifest},
                {"eval_manifest", cfg.paths.eval_manifest},
                {"checkpoint", cfg.paths.checkpoint},
                {"report", cfg.paths.report}};
  j["signal"] = {{"sample_rate", cfg.signal.sample_rate},
                 {"n_samples", cfg.signal.n_samples},
                 {"f0_lo_hz", cfg.signal.f0_lo_hz},
                 {"f0_hi_hz", cfg.signal.f0_hi_hz},
                 {"snr_lo_db", cfg.signal.snr_lo_db},
                 {"snr_hi_db", cfg.signal.snr_hi_db},
                 {"count", cfg.signal.count}};
  j["lmfb"] = {{"n_mels", cfg.lmfb.n_mels},
               {"win_length", cfg.lmfb.win_length},
               {"hop_length", cfg.lmfb.hop_length},
               {"fft_size", cfg.lmfb.fft_size},
               {"log_floor", cfg.lmfb.log_floor},
               {"mel_f_min_hz", cfg.lmfb.mel_f_min_hz},
               {"mel_f_max_hz", cfg.lmfb.mel_f_max_hz}};
  j["encoder"] = {{"kind", cfg.encoder.kind},
                  {"descriptor", cfg.encoder.descriptor},
                  {"n_layers", cfg.encoder.n_layers},
                  {"dim", cfg.encoder.dim},
                  {"win", cfg.encoder.win},
                  {"hop", cfg.encoder.hop},
                  {"weight_scheme", cfg.encoder.weight_scheme},
                  {"cut_index", cfg.encoder.cut_index},
                  {"one_hot_index", cfg.encoder.one_hot_index}};
  j["enhancer"] = {
      {"preset", cfg.enhancer.preset},
      {"n_filters", cfg.enhancer.custom.n_filters},
      {"kernel_len", cfg.enhancer.custom.kernel_len},
      {"bottleneck_dim", cfg.enhancer.custom.bottleneck_dim},
      {"n_repeats", cfg.enhancer.custom.n_repeats},
      {"blocks_per_repeat", cfg.enhancer.custom.blocks_per_repeat},
      {"hidden_dim", cfg.enhancer.custom.hidden_dim},
      {"dconv_kernel", cfg.enhancer.custom.dconv_kernel},
      {"mask_activation",
       cfg.enhancer.custom.mask_activation == MaskActivation::kSigmoid
           ? "sigmoid"
           : "relu"}};
  j["loss"] = {{"kind", cfg.loss.kind},
               {"alpha", cfg.loss.alpha},
               {"lambda", cfg.loss.lambda},
               {"epsilon", cfg.loss.epsilon},
               {"snr_numerator", cfg.loss.snr_numerator},
               {"recognizer_vocab", cfg.loss.recognizer_vocab}};
  j["training"] = {{"pretrain_lr", cfg.training.pretrain_lr},
                   {"finetune_lr", cfg.training.finetune_lr},
                   {"lr_factor", cfg.training.lr_factor},
                   {"patience_epochs", cfg.training.patience_epochs},
                   {"pretrain_epochs", cfg.training.pretrain_epochs},
                   {"finetune_epochs", cfg.training.finetune_epochs},
                   {"batch_size", cfg.training.batch_size},
                   {"clip_norm", cfg.training.clip_norm},
                   {"clip_enabled", cfg.training.clip_enabled}};
  j["evaluation"] = {{"betas", cfg.evaluation.betas},
                     {"alphas", cfg.evaluation.alphas},
                     {"snr_lo_db", cfg.evaluation.snr_lo_db},
                     {"snr_hi_db", cfg.evaluation.snr_hi_db},
                     {"cap_db", cfg.evaluation.cap_db},
                     {"external_scorer", cfg.evaluation.external_scorer}};
  return j.dump(2);
}

GlobalConfig GlobalConfigFromJson(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("config is not valid JSON: ") + e.what());
  }

  GlobalConfig cfg;
  RejectUnknown(j,
                {"seed", "workers", "paths", "signal", "lmfb", "encoder",
                 "enhancer", "loss", "training", "evaluation"},
                "top level");
  Get(j, "seed", &cfg.seed);
  Get(j, "workers", &cfg.workers);

  if (j.contains("paths")) {
    const json& p = j["paths"];
    RejectUnknown(p,
                  {"workdir", "train_manifest", "dev_manifest", "eval_manifest",
                   "checkpoint", "report"},
                  "paths");
    Get(p, "workdir", &cfg.paths.workdir);
    Get(p, "train_manifest", &cfg.paths.train_manifest);
    Get(p, "dev_manifest", &cfg.paths.dev_manifest);
    Get(p, "eval_manifest", &cfg.paths.eval_manifest);
    Get(p, "checkpoint", &cfg.paths.checkpoint);
    Get(p, "report", &cfg.paths.report);
  }
  if (j.contains("signal")) {
    const json& s = j["signal"];
    RejectUnknown(s,
                  {"sample_rate", "n_samples", "f0_lo_hz", "f0_hi_hz",
                   "snr_lo_db", "snr_hi_db", "count"},
                  "signal");
    Get(s, "sample_rate", &cfg.signal.sample_rate);
    Get(s, "n_samples", &cfg.signal.n_samples);
    Get(s, "f0_lo_hz", &cfg.signal.f0_lo_hz);
    Get(s, "f0_hi_hz", &cfg.signal.f0_hi_hz);
    Get(s, "snr_lo_db", &cfg.signal.snr_lo_db);
    Get(s, "snr_hi_db", &cfg.signal.snr_hi_db);
    Get(s, "count", &cfg.signal.count);
  }
  if (j.contains("lmfb")) {
    const json& l = j["lmfb"];
    RejectUnknown(l,
                  {"n_mels", "win_length", "hop_length", "fft_size",
                   "log_floor", "mel_f_min_hz", "mel_f_max_hz"},
                  "lmfb");
    Get(l, "n_mels", &cfg.lmfb.n_mels);
    Get(l, "win_length", &cfg.lmfb.win_length);
    Get(l, "hop_length", &cfg.lmfb.hop_length);
    Get(l, "fft_size", &cfg.lmfb.fft_size);
    Get(l, "log_floor", &cfg.lmfb.log_floor);
    Get(l, "mel_f_min_hz", &cfg.lmfb.mel_f_min_hz);
    Get(l, "mel_f_max_hz", &cfg.lmfb.mel_f_max_hz);
  }
  if (j.contains("encoder")) {
    const json& e = j["encoder"];
    RejectUnknown(e,
                  {"kind", "descriptor", "n_layers", "dim", "win", "hop",
                   "weight_scheme", "cut_index", "one_hot_index"},
                  "encoder");
    Get(e, "kind", &cfg.encoder.kind);
    Get(e, "descriptor", &cfg.encoder.descriptor);
    Get(e, "n_layers", &cfg.encoder.n_layers);
    Get(e, "dim", &cfg.encoder.dim);
    Get(e, "win", &cfg.encoder.win);
    Get(e, "hop", &cfg.encoder.hop);
    Get(e, "weight_scheme", &cfg.encoder.weight_scheme);
    Get(e, "cut_index", &cfg.encoder.cut_index);
    Get(e, "one_hot_index", &cfg.encoder.one_hot_index);
  }
  if (j.contains("enhancer")) {
    const json& e = j["enhancer"];
    RejectUnknown(e,
                  {"preset", "n_filters", "kernel_len", "bottleneck_dim",
                   "n_repeats", "blocks_per_repeat", "hidden_dim",
                   "dconv_kernel", "mask_activation"},
                  "enhancer");
    Get(e, "preset", &cfg.enhancer.preset);
    Get(e, "n_filters", &cfg.enhancer.custom.n_filters);
    Get(e, "kernel_len", &cfg.enhancer.custom.kernel_len);
    Get(e, "bottleneck_dim", &cfg.enhancer.custom.bottleneck_dim);
    Get(e, "n_repeats", &cfg.enhancer.custom.n_repeats);
    Get(e, "blocks_per_repeat", &cfg.enhancer.custom.blocks_per_repeat);
    Get(e, "hidden_dim", &cfg.enhancer.custom.hidden_dim);
    Get(e, "dconv_kernel", &cfg.enhancer.custom.dconv_kernel);
    if (e.contains("mask_activation")) {
      const std::string m = e["mask_activation"].get<std::string>();
      if (m == "sigmoid")
        cfg.enhancer.custom.mask_activation = MaskActivation::kSigmoid;
      else if (m == "relu")
        cfg.enhancer.custom.mask_activation = MaskActivation::kRelu;
      else
        throw InvalidConfig("mask_activation must be sigmoid or relu");
    }
  }
  if (j.contains("loss")) {
    const json& l = j["loss"];
    RejectUnknown(l,
                  {"kind", "alpha", "lambda", "epsilon", "snr_numerator",
                   "recognizer_vocab"},
                  "loss");
    Get(l, "kind", &cfg.loss.kind);
    Get(l, "alpha", &cfg.loss.alpha);
    Get(l, "lambda", &cfg.loss.lambda);
    Get(l, "epsilon", &cfg.loss.epsilon);
    Get(l, "snr_numerator", &cfg.loss.snr_numerator);
    Get(l, "recognizer_vocab", &cfg.loss.recognizer_vocab);
  }
  if (j.contains("training")) {
    const json& t = j["training"];
    RejectUnknown(t,
                  {"pretrain_lr", "finetune_lr", "lr_factor", "patience_epochs",
                   "pretrain_epochs", "finetune_epochs", "batch_size",
                   "clip_norm", "clip_enabled"},
                  "training");
    Get(t, "pretrain_lr", &cfg.training.pretrain_lr);
    Get(t, "finetune_lr", &cfg.training.finetune_lr);
    Get(t, "lr_factor", &cfg.training.lr_factor);
    Get(t, "patience_epochs", &cfg.training.patience_epochs);
    Get(t, "pretrain_epochs", &cfg.training.pretrain_epochs);
    Get(t, "finetune_epochs", &cfg.training.finetune_epochs);
    Get(t, "batch_size", &cfg.training.batch_size);
    Get(t, "clip_norm", &cfg.training.clip_norm);
    Get(t, "clip_enabled", &cfg.training.clip_enabled);
  }
  if (j.contains("evaluation")) {
    const json& e = j["evaluation"];
    RejectUnknown(e,
                  {"betas", "alphas", "snr_lo_db", "snr_hi_db", "cap_db",
                   "external_scorer"},
                  "evaluation");
    Get(e, "betas", &cfg.evaluation.betas);
    Get(e, "alphas", &cfg.evaluation.alphas);
    Get(e, "snr_lo_db", &cfg.evaluation.snr_lo_db);
    Get(e, "snr_hi_db", &cfg.evaluation.snr_hi_db);
    Get(e, "cap_db", &cfg.evaluation.cap_db);
    Get(e, "external_scorer", &cfg.evaluation.external_scorer);
  }

  cfg.Validate();
  return cfg;
}

GlobalConfig LoadGlobalConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return GlobalConfigFromJson(text);
}

void DumpGlobalConfig(const GlobalConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot open config file for writing: " + path);
  out << GlobalConfigToJson(cfg) << "\n";
  if (!out) throw IoFailure("failed writing config file: " + path);
}

void ApplyEnvOverrides(GlobalConfig* cfg) {
  if (const char* wd = std::getenv("SEFX_WORKDIR")) cfg->paths.workdir = wd;
  if (const char* seed = std::getenv("SEFX_SEED"))
    cfg->seed = std::strtoull(seed, nullptr, 10);
}

}  // namespace sefx
