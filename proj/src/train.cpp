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

#include "sefx/train.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "sefx/errors.hpp"
#include "sefx/util.hpp"

namespace sefx {

using nlohmann::json;

std::string LossKindName(LossKind k) {
  switch (k) {
    case LossKind::kSnr: return "snr";
    case LossKind::kLmfbMt: return "lmfb_mt";
    case LossKind::kAsrMt: return "asr_mt";
    case LossKind::kSslMt: return "ssl_mt";
  }
  return "snr";
}

LossKind LossKindFromName(const std::string& name) {
  if (name == "snr") return LossKind::kSnr;
  if (name == "lmfb_mt") return LossKind::kLmfbMt;
  if (name == "asr_mt") return LossKind::kAsrMt;
  if (name == "ssl_mt") return LossKind::kSslMt;
  throw InvalidConfig("unknown loss kind: " + name);
}

void TrainConfig::Validate() const {
  enhancer.Validate();
  mt.Validate();
  if (!(lr_factor > 0.0 && lr_factor < 1.0))
    throw InvalidConfig("lr_factor must be in (0,1)");
  if (patience_epochs < 1) throw InvalidConfig("patience must be >= 1");
  if (max_epochs < 1) throw InvalidConfig("max_epochs must be >= 1");
  if (batch_size < 1) throw InvalidConfig("batch_size must be >= 1");
  if (initial_lr <= 0.0) throw InvalidConfig("initial_lr must be > 0");
}

TrainConfig TrainConfig::PretrainDefaults() {
  TrainConfig c;
  c.stage = TrainStage::kPretrain;
  c.loss = LossKind::kSnr;
  c.initial_lr = 5e-4;
  c.max_epochs = 100;
  return c;
}

TrainConfig TrainConfig::FinetuneDefaults() {
  TrainConfig c;
  c.stage = TrainStage::kFinetune;
  c.loss = LossKind::kSslMt;
  c.initial_lr = 1e-4;
  c.max_epochs = 50;
  return c;
}

void LrScheduleStep(TrainState* state, double dev_loss,
                    const TrainConfig& cfg) {
  if (!std::isfinite(dev_loss))
    throw NonFiniteDevLoss("development loss is not finite");
  if (dev_loss < state->best_dev_loss) {
    state->best_dev_loss = dev_loss;
    state->epochs_since_improvement = 0;
    return;
  }
  ++state->epochs_since_improvement;
  if (state->epochs_since_improvement >= cfg.patience_epochs) {
    state->current_lr *= cfg.lr_factor;
    ++state->n_lr_cuts;
    state->epochs_since_improvement = 0;
  }
}

AdamState InitAdam(const EnhancerModel& model) {
  AdamState s;
  s.m.reserve(model.params.size());
  s.v.reserve(model.params.size());
  for (const Param& p : model.params) {
    s.m.push_back(Tensor::Zeros(p.value.rows, p.value.cols));
    s.v.push_back(Tensor::Zeros(p.value.rows, p.value.cols));
  }
  return s;
}

void AdamUpdate(EnhancerModel* model, const std::vector<Tensor>& grads,
                AdamState* opt, double lr, const TrainConfig& cfg) {
  double scale = 1.0;
  if (cfg.clip_enabled) {
    double sq = 0.0;
    for (const Tensor& g : grads)
      for (double x : g.v) sq += x * x;
    const double norm = std::sqrt(sq);
    if (norm > cfg.clip_norm && norm > 0.0) scale = cfg.clip_norm / norm;
  }
  ++opt->step;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, opt->step);
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, opt->step);
  for (std::size_t i = 0; i < model->params.size(); ++i) {
    Tensor& p = model->params[i].value;
    Tensor& m = opt->m[i];
    Tensor& v = opt->v[i];
    const Tensor& g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g.v[j] * scale;
      m.v[j] = cfg.adam_beta1 * m.v[j] + (1.0 - cfg.adam_beta1) * gj;
      v.v[j] = cfg.adam_beta2 * v.v[j] + (1.0 - cfg.adam_beta2) * gj * gj;
      const double mhat = m.v[j] / bc1;
      const double vhat = v.v[j] / bc2;
      p.v[j] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoint container: magic, version, JSON header, raw little-endian
// tensor blobs in header order. save -> load -> save is byte identical.

namespace {
constexpr char kMagic[8] = {'S', 'E', 'F', 'X', 'C', 'K', 'P', '1'};

json ConfigToJson(const ConvTasNetConfig& c) {
  return json{{"n_filters", c.n_filters},
              {"kernel_len", c.kernel_len},
              {"bottleneck_dim", c.bottleneck_dim},
              {"n_repeats", c.n_repeats},
              {"blocks_per_repeat", c.blocks_per_repeat},
              {"hidden_dim", c.hidden_dim},
              {"dconv_kernel", c.dconv_kernel},
              {"mask_activation",
               c.mask_activation == MaskActivation::kSigmoid ? "sigmoid"
                                                             : "relu"}};
}

ConvTasNetConfig ConfigFromJson(const json& j) {
  ConvTasNetConfig c;
  c.n_filters = j.at("n_filters").get<int>();
  c.kernel_len = j.at("kernel_len").get<int>();
  c.bottleneck_dim = j.at("bottleneck_dim").get<int>();
  c.n_repeats = j.at("n_repeats").get<int>();
  c.blocks_per_repeat = j.at("blocks_per_repeat").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.dconv_kernel = j.at("dconv_kernel").get<int>();
  c.mask_activation = j.at("mask_activation").get<std::string>() == "relu"
                          ? MaskActivation::kRelu
                          : MaskActivation::kSigmoid;
  return c;
}

void WriteTensorBlob(std::ofstream& out, const Tensor& t) {
  out.write(reinterpret_cast<const char*>(t.v.data()),
            static_cast<std::streamsize>(t.v.size() * sizeof(double)));
}

Tensor ReadTensorBlob(std::ifstream& in, int rows, int cols) {
  Tensor t(rows, cols);
  in.read(reinterpret_cast<char*>(t.v.data()),
          static_cast<std::streamsize>(t.v.size() * sizeof(double)));
  if (!in) throw CheckpointFormatError("checkpoint tensor blob truncated");
  return t;
}
}  // namespace

void SaveCheckpoint(const Checkpoint& ckpt, const std::string& path) {
  json header;
  header["format_version"] = ckpt.format_version;
  header["config"] = ConfigToJson(ckpt.model.config);
  header["stage"] = ckpt.stage == TrainStage::kPretrain ? "pretrain" : "finetune";
  header["loss"] = LossKindName(ckpt.loss);
  header["mt"] = {{"alpha", ckpt.mt.alpha},
                  {"lambda", ckpt.mt.lambda},
                  {"epsilon", ckpt.mt.epsilon}};
  header["snr_numerator"] =
      ckpt.snr_opts.numerator == SnrNumerator::kEstimate ? "estimate"
                                                         : "reference";
  header["snr_epsilon"] = ckpt.snr_opts.epsilon;
  header["epoch"] = ckpt.state.epoch;
  header["current_lr"] = ckpt.state.current_lr;
  if (std::isfinite(ckpt.state.best_dev_loss))
    header["best_dev_loss"] = ckpt.state.best_dev_loss;
  else
    header["best_dev_loss"] = nullptr;
  header["epochs_since_improvement"] = ckpt.state.epochs_since_improvement;
  header["n_lr_cuts"] = ckpt.state.n_lr_cuts;
  header["rng_state"] = ckpt.state.rng_state;
  header["adam_step"] = ckpt.opt.step;

  json tensors = json::array();
  for (const Param& p : ckpt.model.params)
    tensors.push_back({{"name", "p." + p.name},
                       {"rows", p.value.rows},
                       {"cols", p.value.cols}});
  for (std::size_t i = 0; i < ckpt.opt.m.size(); ++i)
    tensors.push_back({{"name", "m." + ckpt.model.params[i].name},
                       {"rows", ckpt.opt.m[i].rows},
                       {"cols", ckpt.opt.m[i].cols}});
  for (std::size_t i = 0; i < ckpt.opt.v.size(); ++i)
    tensors.push_back({{"name", "v." + ckpt.model.params[i].name},
                       {"rows", ckpt.opt.v[i].rows},
                       {"cols", ckpt.opt.v[i].cols}});
  header["tensors"] = tensors;

  const std::string hs = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot open checkpoint for writing: " + path);
  out.write(kMagic, 8);
  const std::uint64_t hlen = hs.size();
  out.write(reinterpret_cast<const char*>(&hlen), 8);
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const Param& p : ckpt.model.params) WriteTensorBlob(out, p.value);
  for (const Tensor& t : ckpt.opt.m) WriteTensorBlob(out, t);
  for (const Tensor& t : ckpt.opt.v) WriteTensorBlob(out, t);
  if (!out) throw IoFailure("failed writing checkpoint: " + path);
}

Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0)
    throw CheckpointFormatError("bad checkpoint magic: " + path);
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), 8);
  if (!in || hlen == 0 || hlen > (1ull << 30))
    throw CheckpointFormatError("bad checkpoint header length: " + path);
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw CheckpointFormatError("truncated checkpoint header: " + path);

  json header;
  try {
    header = json::parse(hs);
  } catch (const json::exception& e) {
    throw CheckpointFormatError(std::string("unparseable checkpoint header: ") +
                                e.what());
  }

  Checkpoint ckpt;
  try {
    ckpt.format_version = header.at("format_version").get<int>();
    ckpt.model.config = ConfigFromJson(header.at("config"));
    ckpt.stage = header.at("stage").get<std::string>() == "finetune"
                     ? TrainStage::kFinetune
                     : TrainStage::kPretrain;
    ckpt.loss = LossKindFromName(header.at("loss").get<std::string>());
    ckpt.mt.alpha = header.at("mt").at("alpha").get<double>();
    ckpt.mt.lambda = header.at("mt").at("lambda").get<double>();
    ckpt.mt.epsilon = header.at("mt").at("epsilon").get<double>();
    ckpt.snr_opts.numerator =
        header.at("snr_numerator").get<std::string>() == "reference"
            ? SnrNumerator::kReference
            : SnrNumerator::kEstimate;
    ckpt.snr_opts.epsilon = header.at("snr_epsilon").get<double>();
    ckpt.state.epoch = header.at("epoch").get<int>();
    ckpt.state.current_lr = header.at("current_lr").get<double>();
    if (header.at("best_dev_loss").is_null())
      ckpt.state.best_dev_loss = std::numeric_limits<double>::infinity();
    else
      ckpt.state.best_dev_loss = header.at("best_dev_loss").get<double>();
    ckpt.state.epochs_since_improvement =
        header.at("epochs_since_improvement").get<int>();
    ckpt.state.n_lr_cuts = header.at("n_lr_cuts").get<int>();
    ckpt.state.rng_state = header.at("rng_state").get<std::string>();
    ckpt.opt.step = header.at("adam_step").get<long>();

    const json& tensors = header.at("tensors");
    for (const json& tj : tensors) {
      const std::string name = tj.at("name").get<std::string>();
      const int rows = tj.at("rows").get<int>();
      const int cols = tj.at("cols").get<int>();
      if (rows < 1 || cols < 1)
        throw CheckpointFormatError("bad tensor shape in checkpoint header");
      Tensor t = ReadTensorBlob(in, rows, cols);
      if (name.rfind("p.", 0) == 0)
        ckpt.model.params.push_back(Param{name.substr(2), std::move(t)});
      else if (name.rfind("m.", 0) == 0)
        ckpt.opt.m.push_back(std::move(t));
      else if (name.rfind("v.", 0) == 0)
        ckpt.opt.v.push_back(std::move(t));
      else
        throw CheckpointFormatError("unknown tensor key in checkpoint: " + name);
    }
  } catch (const json::exception& e) {
    throw CheckpointFormatError(std::string("checkpoint header field error: ") +
                                e.what());
  }
  if (ckpt.opt.m.size() != ckpt.model.params.size() ||
      ckpt.opt.v.size() != ckpt.model.params.size())
    throw CheckpointFormatError("checkpoint optimizer state incomplete");
  return ckpt;
}

// ---------------------------------------------------------------------------
// Training loop.

namespace {

std::vector<int> PseudoTokens(const RecognizerAdapter& rec,
                              const Waveform& clean) {
  std::vector<int> tokens = rec.GreedyCtc(clean);
  if (tokens.empty()) tokens.push_back(1);
  return tokens;
}

TapeLoss BuildLoss(ad::Tape& tape, ad::Var estimate, const MixtureExample& ex,
                   LossKind loss, const MultitaskConfig& mt,
                   const SnrLossOptions& snr_opts, const LossContext& ctx) {
  Tensor ref(1, static_cast<int>(ex.clean.size()), ex.clean.samples);
  switch (loss) {
    case LossKind::kSnr:
      return SnrOnlyOnTape(tape, estimate, ref, snr_opts);
    case LossKind::kLmfbMt:
      return LmfbMtOnTape(tape, estimate, ref, ex.clean.sample_rate, ctx.lmfb,
                          mt.alpha, snr_opts);
    case LossKind::kSslMt:
      if (!ctx.encoder)
        throw InvalidConfig("ssl_mt loss requires an encoder adapter");
      return SslMtOnTape(tape, estimate, ref, ex.clean.sample_rate,
                         *ctx.encoder, ctx.layer_weights, mt.alpha, snr_opts);
    case LossKind::kAsrMt: {
      if (!ctx.recognizer)
        throw InvalidConfig("asr_mt loss requires a recognizer adapter");
      std::vector<int> tokens = PseudoTokens(*ctx.recognizer, ex.clean);
      return AsrMtOnTape(tape, estimate, ref, ex.clean.sample_rate, tokens,
                         *ctx.recognizer, mt, snr_opts);
    }
  }
  throw InvalidConfig("unhandled loss kind");
}

void AppendLogLine(const std::string& path, const EpochLog& log) {
  if (path.empty()) return;
  json j;
  j["epoch"] = log.epoch;
  j["lr"] = log.lr;
  j["train_total"] = log.train_total;
  j["train_components"] = log.train_components;
  j["dev_total"] = log.dev_total;
  j["dev_components"] = log.dev_components;
  j["wall_time_s"] = log.wall_time_s;
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoFailure("cannot append to training log: " + path);
  out << j.dump() << "\n";
}

TrainResult RunLoop(EnhancerModel model, AdamState opt, TrainState state,
                    TrainStage stage,
                    const std::vector<MixtureExample>& train,
                    const std::vector<MixtureExample>& dev,
                    const TrainConfig& cfg, const LossContext& ctx) {
  cfg.Validate();
  if (train.empty()) throw EmptyDataset("training set is empty");
  if (dev.empty()) throw EmptyDataset("development set is empty");

  model.mode = EnhancerMode::kTrain;

  TrainResult result;
  auto dev0 = EvaluateLoss(model, dev, cfg.loss, cfg.mt, cfg.snr_opts, ctx);
  result.initial_dev_loss = dev0.first;

  auto snapshot = [&](Checkpoint* dst) {
    dst->model = model;
    dst->model.mode = EnhancerMode::kEval;
    dst->opt = opt;
    dst->state = state;
    dst->stage = stage;
    dst->loss = cfg.loss;
    dst->mt = cfg.mt;
    dst->snr_opts = cfg.snr_opts;
  };
  snapshot(&result.best);
  double best_seen = result.initial_dev_loss;

  std::vector<Tensor> grads;
  grads.reserve(model.params.size());
  for (const Param& p : model.params)
    grads.push_back(Tensor::Zeros(p.value.rows, p.value.cols));

  while (state.epoch < cfg.max_epochs) {
    const auto t0 = std::chrono::steady_clock::now();

    // Seeded epoch shuffle (Fisher-Yates on the index list).
    std::vector<int> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i)
      order[i] = static_cast<int>(i);
    RandomStream shuffle_rng(
        MixSeed(cfg.seed, 0x5u + static_cast<std::uint64_t>(state.epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = shuffle_rng.NextIndex(i);
      std::swap(order[i - 1], order[j]);
    }

    double train_total = 0.0;
    std::map<std::string, double> train_components;
    std::size_t seen = 0;

    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const std::size_t stop =
          std::min(order.size(), start + cfg.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      for (Tensor& g : grads) g.fill(0.0);

      for (std::size_t bi = start; bi < stop; ++bi) {
        const MixtureExample& ex = train[order[bi]];
        ad::Tape tape;
        ad::Var noisy = tape.Leaf(
            Tensor(1, static_cast<int>(ex.noisy.size()), ex.noisy.samples),
            false);
        EnhanceGraph g = EnhanceOnTape(tape, model, noisy, true);
        TapeLoss tl = BuildLoss(tape, g.output, ex, cfg.loss, cfg.mt,
                                cfg.snr_opts, ctx);
        const double loss_val = tape.val(tl.total).v[0];
        if (!std::isfinite(loss_val))
          throw DivergenceDetected("non-finite training loss");
        train_total += loss_val;
        for (const auto& [k, v] : tl.components) train_components[k] += v;
        ++seen;

        tape.Backward(tl.total);
        for (std::size_t pi = 0; pi < grads.size(); ++pi) {
          if (!tape.has_grad(g.param_leaves[pi])) continue;
          const Tensor& pg = tape.grad(g.param_leaves[pi]);
          for (std::size_t j = 0; j < pg.size(); ++j)
            grads[pi].v[j] += inv_batch * pg.v[j];
        }
      }
      AdamUpdate(&model, grads, &opt, state.current_lr, cfg);
    }

    train_total /= static_cast<double>(seen);
    for (auto& [k, v] : train_components) v /= static_cast<double>(seen);

    auto dev_eval =
        EvaluateLoss(model, dev, cfg.loss, cfg.mt, cfg.snr_opts, ctx);

    ++state.epoch;

    EpochLog log;
    log.epoch = state.epoch;
    log.lr = state.current_lr;
    log.train_total = train_total;
    log.train_components = train_components;
    log.dev_total = dev_eval.first;
    log.dev_components = dev_eval.second;
    log.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    AppendLogLine(cfg.log_path, log);
    result.logs.push_back(log);

    if (dev_eval.first < best_seen) {
      best_seen = dev_eval.first;
      snapshot(&result.best);
    }
    LrScheduleStep(&state, dev_eval.first, cfg);
  }

  snapshot(&result.last);
  return result;
}

}  // namespace

std::pair<double, std::map<std::string, double>> EvaluateLoss(
    const EnhancerModel& model, const std::vector<MixtureExample>& data,
    LossKind loss, const MultitaskConfig& mt, const SnrLossOptions& snr_opts,
    const LossContext& ctx) {
  if (data.empty()) throw EmptyDataset("evaluation set is empty");
  double total = 0.0;
  std::map<std::string, double> components;
  for (const MixtureExample& ex : data) {
    ad::Tape tape;
    ad::Var noisy = tape.Leaf(
        Tensor(1, static_cast<int>(ex.noisy.size()), ex.noisy.samples), false);
    EnhanceGraph g = EnhanceOnTape(tape, model, noisy, false);
    TapeLoss tl =
        BuildLoss(tape, g.output, ex, loss, mt, snr_opts, ctx);
    total += tape.val(tl.total).v[0];
    for (const auto& [k, v] : tl.components) components[k] += v;
  }
  total /= static_cast<double>(data.size());
  for (auto& [k, v] : components) v /= static_cast<double>(data.size());
  return {total, components};
}

TrainResult Pretrain(const std::vector<MixtureExample>& train,
                     const std::vector<MixtureExample>& dev,
                     const TrainConfig& cfg) {
  TrainConfig c = cfg;
  c.stage = TrainStage::kPretrain;
  c.Validate();
  EnhancerModel model = InitEnhancer(c.enhancer, c.seed);
  AdamState opt = InitAdam(model);
  TrainState state;
  state.current_lr = c.initial_lr;
  state.best_dev_loss = std::numeric_limits<double>::infinity();
  RandomStream rng(MixSeed(c.seed, 0x11));
  state.rng_state = rng.SaveState();
  return RunLoop(std::move(model), std::move(opt), state, TrainStage::kPretrain,
                 train, dev, c, LossContext{});
}

TrainResult Finetune(const Checkpoint& start,
                     const std::vector<MixtureExample>& train,
                     const std::vector<MixtureExample>& dev,
                     const TrainConfig& cfg, const LossContext& ctx) {
  TrainConfig c = cfg;
  c.stage = TrainStage::kFinetune;
  c.Validate();
  EnhancerModel model = start.model;
  AdamState opt = InitAdam(model);  // fresh optimizer for the new criterion
  TrainState state;
  state.current_lr = c.initial_lr;
  state.best_dev_loss = std::numeric_limits<double>::infinity();
  RandomStream rng(MixSeed(c.seed, 0x12));
  state.rng_state = rng.SaveState();
  return RunLoop(std::move(model), std::move(opt), state,
                 TrainStage::kFinetune, train, dev, c, ctx);
}

TrainResult ResumeTraining(const Checkpoint& ckpt,
                           const std::vector<MixtureExample>& train,
                           const std::vector<MixtureExample>& dev,
                           const TrainConfig& cfg, const LossContext& ctx) {
  cfg.Validate();
  return RunLoop(ckpt.model, ckpt.opt, ckpt.state, ckpt.stage, train, dev, cfg,
                 ctx);
}

}  // namespace sefx
