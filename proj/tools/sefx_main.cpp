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

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "sefx/config.hpp"
#include "sefx/errors.hpp"
#include "sefx/evaluate.hpp"
#include "sefx/kernels.hpp"
#include "sefx/train.hpp"
#include "sefx/util.hpp"

namespace fs = std::filesystem;
using namespace sefx;

namespace {

struct GlobalFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> workdir;
  std::optional<int> workers;
  std::string dump_config_path;
};

GlobalConfig ResolveConfig(const GlobalFlags& flags) {
  GlobalConfig cfg;
  if (!flags.config_path.empty()) cfg = LoadGlobalConfig(flags.config_path);
  ApplyEnvOverrides(&cfg);
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.workdir) cfg.paths.workdir = *flags.workdir;
  if (flags.workers) cfg.workers = *flags.workers;
  cfg.Validate();
  kernels::SetWorkers(cfg.workers);
  if (!flags.dump_config_path.empty())
    DumpGlobalConfig(cfg, flags.dump_config_path);
  return cfg;
}

std::unique_ptr<EncoderAdapter> BuildEncoder(const GlobalConfig& cfg) {
  if (cfg.encoder.kind == "external") {
    if (cfg.encoder.descriptor.empty())
      throw InvalidConfig("encoder.kind external needs encoder.descriptor");
    return LoadExternalAdapter(cfg.encoder.descriptor);
  }
  return MakeToyEncoder(MixSeed(cfg.seed, 0xe0c), cfg.encoder.n_layers,
                        cfg.encoder.dim, cfg.encoder.win, cfg.encoder.hop);
}

LayerWeights BuildWeights(const GlobalConfig& cfg, int n_layers) {
  if (cfg.encoder.weight_scheme == "uniform")
    return MakeLayerWeights(n_layers, LayerScheme::kUniform);
  if (cfg.encoder.weight_scheme == "one_hot")
    return MakeLayerWeights(n_layers, LayerScheme::kOneHot,
                            cfg.encoder.one_hot_index);
  return MakeLayerWeights(n_layers, LayerScheme::kLatterHalfUniform, 0,
                          cfg.encoder.cut_index);
}

std::vector<MixtureExample> LoadSet(const std::string& manifest_path,
                                    const SnrRange& range,
                                    std::uint64_t seed, const char* which) {
  if (manifest_path.empty())
    throw InvalidConfig(std::string("no ") + which + " manifest configured");
  auto entries = ReadManifest(manifest_path);
  if (entries.empty())
    throw InvalidConfig(std::string(which) + " manifest is empty: " +
                        manifest_path);
  return SimulateDataset(entries, range, seed);
}

TrainConfig MakeTrainConfig(const GlobalConfig& cfg, TrainStage stage) {
  TrainConfig t = stage == TrainStage::kPretrain
                      ? TrainConfig::PretrainDefaults()
                      : TrainConfig::FinetuneDefaults();
  t.enhancer = cfg.enhancer.Resolve();
  t.loss = LossKindFromName(cfg.loss.kind);
  t.initial_lr = stage == TrainStage::kPretrain ? cfg.training.pretrain_lr
                                                : cfg.training.finetune_lr;
  t.lr_factor = cfg.training.lr_factor;
  t.patience_epochs = cfg.training.patience_epochs;
  t.max_epochs = stage == TrainStage::kPretrain ? cfg.training.pretrain_epochs
                                                : cfg.training.finetune_epochs;
  t.batch_size = cfg.training.batch_size;
  t.seed = cfg.seed;
  t.mt = cfg.loss.Multitask();
  t.snr_opts = cfg.loss.SnrOptions();
  t.clip_norm = cfg.training.clip_norm;
  t.clip_enabled = cfg.training.clip_enabled;
  return t;
}

struct AdapterBundle {
  std::unique_ptr<EncoderAdapter> encoder;
  std::unique_ptr<RecognizerAdapter> recognizer;
  LossContext ctx;
};

AdapterBundle BuildContext(const GlobalConfig& cfg, LossKind loss) {
  AdapterBundle bundle;
  bundle.ctx.lmfb = cfg.lmfb;
  if (loss == LossKind::kSslMt || loss == LossKind::kAsrMt ||
      loss == LossKind::kSnr || loss == LossKind::kLmfbMt) {
    // the encoder also backs the ssl_feature_mse evaluation metric
    bundle.encoder = BuildEncoder(cfg);
    bundle.ctx.encoder = bundle.encoder.get();
    bundle.ctx.layer_weights = BuildWeights(cfg, bundle.encoder->n_layers());
  }
  if (loss == LossKind::kAsrMt) {
    bundle.recognizer = MakeToyRecognizer(MixSeed(cfg.seed, 0xa5e),
                                          cfg.loss.recognizer_vocab, cfg.lmfb);
    bundle.ctx.recognizer = bundle.recognizer.get();
  }
  return bundle;
}

void PrintRows(const std::vector<MetricsRow>& rows) {
  std::printf("%-16s %6s %8s %12s %12s %16s %6s\n", "system", "beta", "alpha",
              "si_sdr_db", "sd_snr_db", "ssl_feat_mse", "n");
  for (const MetricsRow& r : rows) {
    std::string beta = r.beta ? std::to_string(*r.beta).substr(0, 5) : "-";
    std::ostringstream alpha;
    if (r.alpha) alpha << *r.alpha;
    else alpha << "-";
    std::printf("%-16s %6s %8s %12.4f %12.4f %16.8g %6d\n", r.system.c_str(),
                beta.c_str(), alpha.str().c_str(), r.si_sdr_db, r.sd_snr_db,
                r.ssl_feature_mse, r.n_utterances);
  }
}

ReportFormat FormatFromPath(const std::string& path) {
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json")
    return ReportFormat::kJson;
  return ReportFormat::kCsv;
}

// ---------------------------------------------------------------------------

int CmdSimulate(const GlobalConfig& cfg, int count, double snr_lo,
                double snr_hi, const std::string& out_dir) {
  if (snr_lo > snr_hi)
    throw InvalidConfig("simulate: --snr-lo must be <= --snr-hi");
  fs::create_directories(out_dir);

  SyntheticSpec spec;
  spec.sample_rate = cfg.signal.sample_rate;
  spec.n_samples = cfg.signal.n_samples;
  spec.f0_lo_hz = cfg.signal.f0_lo_hz;
  spec.f0_hi_hz = cfg.signal.f0_hi_hz;

  auto examples = SimulateDataset(spec, {snr_lo, snr_hi}, count, cfg.seed);

  std::vector<ManifestEntry> manifest;
  double snr_min = 1e300, snr_max = -1e300, snr_sum = 0.0;
  for (const MixtureExample& ex : examples) {
    const std::string base = (fs::path(out_dir) / ex.id).string();
    WriteWav(base + "_clean.wav", ex.clean);
    WriteWav(base + "_noise.wav", ex.noise);
    WriteWav(base + "_noisy.wav", ex.noisy);
    ManifestEntry e;
    e.clean_path = base + "_clean.wav";
    e.noise_path = base + "_noise.wav";
    e.snr_db = ex.snr_db;
    e.id = ex.id;
    manifest.push_back(e);
    snr_min = std::min(snr_min, ex.snr_db);
    snr_max = std::max(snr_max, ex.snr_db);
    snr_sum += ex.snr_db;
  }
  const std::string manifest_path =
      (fs::path(out_dir) / "manifest.jsonl").string();
  WriteManifest(manifest_path, manifest);

  std::printf("simulated %zu mixtures into %s\n", examples.size(),
              out_dir.c_str());
  std::printf("snr_db min %.2f mean %.2f max %.2f\n", snr_min,
              snr_sum / examples.size(), snr_max);
  std::printf("manifest: %s\n", manifest_path.c_str());
  return 0;
}

int CmdTrain(const GlobalConfig& cfg, const std::string& resume_path,
             std::optional<int> epochs) {
  SnrRange range{cfg.signal.snr_lo_db, cfg.signal.snr_hi_db};
  auto train =
      LoadSet(cfg.paths.train_manifest, range, MixSeed(cfg.seed, 1), "train");
  auto dev = LoadSet(cfg.paths.dev_manifest, range, MixSeed(cfg.seed, 2), "dev");

  fs::create_directories(cfg.paths.workdir);
  TrainConfig tcfg = MakeTrainConfig(cfg, TrainStage::kPretrain);
  if (epochs) tcfg.max_epochs = *epochs;
  tcfg.log_path = (fs::path(cfg.paths.workdir) / "pretrain_log.jsonl").string();

  TrainResult result;
  if (!resume_path.empty()) {
    Checkpoint ckpt = LoadCheckpoint(resume_path);
    tcfg.loss = ckpt.loss;
    AdapterBundle bundle = BuildContext(cfg, tcfg.loss);
    result = ResumeTraining(ckpt, train, dev, tcfg, bundle.ctx);
  } else {
    tcfg.loss = LossKind::kSnr;  // pretraining criterion
    result = Pretrain(train, dev, tcfg);
  }

  const std::string best =
      (fs::path(cfg.paths.workdir) / "pretrain_best.ckpt").string();
  const std::string last =
      (fs::path(cfg.paths.workdir) / "pretrain_last.ckpt").string();
  SaveCheckpoint(result.best, best);
  SaveCheckpoint(result.last, last);
  std::printf("pretrain done: %zu epochs, dev %.4f -> %.4f\n",
              result.logs.size(), result.initial_dev_loss,
              result.logs.empty() ? result.initial_dev_loss
                                  : result.logs.back().dev_total);
  std::printf("best checkpoint: %s\nlast checkpoint: %s\n", best.c_str(),
              last.c_str());
  return 0;
}

int CmdFinetune(const GlobalConfig& cfg, const std::string& from,
                std::optional<int> epochs) {
  const std::string ckpt_path =
      !from.empty() ? from : cfg.paths.checkpoint;
  if (ckpt_path.empty() || !fs::exists(ckpt_path))
    throw InvalidConfig("finetune needs an existing checkpoint (--from)");

  SnrRange range{cfg.signal.snr_lo_db, cfg.signal.snr_hi_db};
  auto train =
      LoadSet(cfg.paths.train_manifest, range, MixSeed(cfg.seed, 1), "train");
  auto dev = LoadSet(cfg.paths.dev_manifest, range, MixSeed(cfg.seed, 2), "dev");

  TrainConfig tcfg = MakeTrainConfig(cfg, TrainStage::kFinetune);
  if (epochs) tcfg.max_epochs = *epochs;
  if (tcfg.loss == LossKind::kSnr)
    throw InvalidConfig(
        "finetune expects a multitask loss (ssl_mt, lmfb_mt, or asr_mt)");
  fs::create_directories(cfg.paths.workdir);
  tcfg.log_path = (fs::path(cfg.paths.workdir) / "finetune_log.jsonl").string();

  AdapterBundle bundle = BuildContext(cfg, tcfg.loss);
  Checkpoint start = LoadCheckpoint(ckpt_path);
  TrainResult result = Finetune(start, train, dev, tcfg, bundle.ctx);

  const std::string best =
      (fs::path(cfg.paths.workdir) / "finetune_best.ckpt").string();
  const std::string last =
      (fs::path(cfg.paths.workdir) / "finetune_last.ckpt").string();
  SaveCheckpoint(result.best, best);
  SaveCheckpoint(result.last, last);
  std::printf("finetune (%s, alpha=%g) done: %zu epochs, dev %.4f -> %.4f\n",
              LossKindName(tcfg.loss).c_str(), tcfg.mt.alpha,
              result.logs.size(), result.initial_dev_loss,
              result.logs.empty() ? result.initial_dev_loss
                                  : result.logs.back().dev_total);
  std::printf("best checkpoint: %s\nlast checkpoint: %s\n", best.c_str(),
              last.c_str());
  return 0;
}

int CmdEnhance(const GlobalConfig& cfg, const std::string& in,
               const std::string& checkpoint_flag, double beta,
               const std::string& out_dir) {
  const std::string ckpt_path =
      !checkpoint_flag.empty() ? checkpoint_flag : cfg.paths.checkpoint;
  if (ckpt_path.empty() || !fs::exists(ckpt_path))
    throw InvalidConfig("enhance needs an existing checkpoint");
  Checkpoint ckpt = LoadCheckpoint(ckpt_path);
  fs::create_directories(out_dir);

  std::vector<std::pair<std::string, Waveform>> inputs;
  if (in.size() >= 6 && in.substr(in.size() - 6) == ".jsonl") {
    SnrRange range{cfg.signal.snr_lo_db, cfg.signal.snr_hi_db};
    auto set = LoadSet(in, range, MixSeed(cfg.seed, 3), "enhance");
    for (auto& ex : set) inputs.emplace_back(ex.id, ex.noisy);
  } else {
    inputs.emplace_back(fs::path(in).stem().string(), ReadWav(in));
  }

  for (const auto& [stem, noisy] : inputs) {
    Waveform enhanced = Enhance(ckpt.model, noisy);
    Waveform post = ObservationAdd(noisy, enhanced, beta);
    const std::string out =
        (fs::path(out_dir) / (stem + "_enhanced.wav")).string();
    WriteWav(out, post);
  }
  std::printf("enhanced %zu input(s) with beta=%g into %s\n", inputs.size(),
              beta, out_dir.c_str());
  return 0;
}

int CmdEvaluate(const GlobalConfig& cfg, const std::string& checkpoint_flag,
                std::vector<double> betas, const std::string& report_path) {
  const std::string ckpt_path =
      !checkpoint_flag.empty() ? checkpoint_flag : cfg.paths.checkpoint;
  if (ckpt_path.empty() || !fs::exists(ckpt_path))
    throw InvalidConfig("evaluate needs an existing checkpoint");
  Checkpoint ckpt = LoadCheckpoint(ckpt_path);

  SnrRange range{cfg.evaluation.snr_lo_db, cfg.evaluation.snr_hi_db};
  auto eval_set =
      LoadSet(cfg.paths.eval_manifest, range, MixSeed(cfg.seed, 4), "eval");

  auto encoder = BuildEncoder(cfg);
  LayerWeights weights = BuildWeights(cfg, encoder->n_layers());
  EvalOptions opts;
  opts.betas = betas.empty() ? cfg.evaluation.betas : betas;
  opts.cap_db = cfg.evaluation.cap_db;

  auto rows = EvaluateSystem(ckpt.model, LossKindName(ckpt.loss), *encoder,
                             weights, eval_set, opts);
  PrintRows(rows);

  const std::string report =
      !report_path.empty()
          ? report_path
          : (fs::path(cfg.paths.workdir) / "evaluate_report.csv").string();
  fs::create_directories(fs::path(report).parent_path().empty()
                             ? "."
                             : fs::path(report).parent_path().string());
  EmitReport(rows, report, FormatFromPath(report));
  auto plots =
      EmitPlots(rows, (fs::path(cfg.paths.workdir) / "plots").string());
  std::printf("report: %s (+%zu plot files)\n", report.c_str(), plots.size());
  return 0;
}

int CmdSweep(const GlobalConfig& cfg, const std::string& checkpoint_flag,
             std::vector<double> alphas, std::vector<double> betas,
             const std::string& report_path, std::optional<int> epochs) {
  const std::string ckpt_path =
      !checkpoint_flag.empty() ? checkpoint_flag : cfg.paths.checkpoint;
  if (ckpt_path.empty() || !fs::exists(ckpt_path))
    throw InvalidConfig("sweep needs an existing pretrained checkpoint");
  Checkpoint ckpt = LoadCheckpoint(ckpt_path);

  SnrRange train_range{cfg.signal.snr_lo_db, cfg.signal.snr_hi_db};
  SnrRange eval_range{cfg.evaluation.snr_lo_db, cfg.evaluation.snr_hi_db};
  auto train = LoadSet(cfg.paths.train_manifest, train_range,
                       MixSeed(cfg.seed, 1), "train");
  auto dev =
      LoadSet(cfg.paths.dev_manifest, train_range, MixSeed(cfg.seed, 2), "dev");
  auto eval_set = LoadSet(cfg.paths.eval_manifest, eval_range,
                          MixSeed(cfg.seed, 4), "eval");

  SweepSpec spec;
  if (!alphas.empty()) spec.alphas = alphas;
  else spec.alphas = cfg.evaluation.alphas;
  if (!betas.empty()) spec.betas = betas;
  else spec.betas = cfg.evaluation.betas;

  GlobalConfig ft = cfg;
  ft.loss.kind = "ssl_mt";
  TrainConfig tcfg = MakeTrainConfig(ft, TrainStage::kFinetune);
  if (epochs) tcfg.max_epochs = *epochs;

  AdapterBundle bundle = BuildContext(ft, LossKind::kSslMt);
  SweepReport report = SweepAlpha(ckpt, spec, train, dev, eval_set, tcfg,
                                  bundle.ctx, cfg.paths.workdir);
  PrintRows(report.rows);
  for (const auto& [alpha, path] : report.checkpoints)
    std::printf("alpha %-8g -> %s\n", alpha, path.c_str());

  const std::string out =
      !report_path.empty()
          ? report_path
          : (fs::path(cfg.paths.workdir) / "sweep_report.csv").string();
  EmitReport(report.rows, out, FormatFromPath(out));
  auto plots =
      EmitPlots(report.rows, (fs::path(cfg.paths.workdir) / "plots").string());
  std::printf("report: %s (+%zu plot files)\n", out.c_str(), plots.size());
  return 0;
}

int CmdReport(const GlobalConfig& cfg, const std::string& in,
              const std::string& out, const std::string& plots_dir) {
  auto rows = ParseReport(in, FormatFromPath(in));
  if (!out.empty()) EmitReport(rows, out, FormatFromPath(out));
  if (!plots_dir.empty()) EmitPlots(rows, plots_dir);
  if (out.empty() && plots_dir.empty()) PrintRows(rows);
  (void)cfg;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "sefx: speech enhancement trained with feature-space losses "
      "(time-domain masking enhancer, encoder-space and LMFB criteria, "
      "observation adding, evaluation harness)"};
  app.require_subcommand(1);

  GlobalFlags flags;
  app.add_option("--config", flags.config_path, "JSON config file");
  app.add_option("--seed", flags.seed, "Master seed override");
  app.add_option("--workdir", flags.workdir, "Working directory override");
  app.add_option("--workers", flags.workers,
                 "Worker count (1 = fully deterministic)");
  app.add_option("--dump-config", flags.dump_config_path,
                 "Write the effective configuration to this path");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  int sim_count = 100;
  double sim_lo = -3.0, sim_hi = 20.0;
  std::string sim_out = "data";
  sim->add_option("--count", sim_count, "Number of mixtures");
  sim->add_option("--snr-lo", sim_lo, "Lower SNR bound in dB");
  sim->add_option("--snr-hi", sim_hi, "Upper SNR bound in dB");
  sim->add_option("--out", sim_out, "Output directory");

  // train
  auto* train = app.add_subcommand("train", "SNR-loss pretraining");
  std::string train_resume;
  std::optional<int> train_epochs;
  train->add_option("--resume", train_resume, "Resume from a checkpoint");
  train->add_option("--epochs", train_epochs, "Override max epochs");

  // finetune
  auto* ft = app.add_subcommand("finetune", "Multitask fine-tuning");
  std::string ft_from, ft_loss;
  std::optional<double> ft_alpha;
  std::optional<int> ft_epochs;
  ft->add_option("--from", ft_from, "Starting checkpoint");
  ft->add_option("--loss", ft_loss, "Loss kind: ssl_mt, lmfb_mt, asr_mt");
  ft->add_option("--alpha", ft_alpha, "Multitask SNR weight");
  ft->add_option("--epochs", ft_epochs, "Override max epochs");

  // enhance
  auto* enh = app.add_subcommand("enhance", "Enhance WAVs or a manifest");
  std::string enh_in, enh_ckpt, enh_out = "enhanced";
  double enh_beta = 0.0;
  enh->add_option("--in", enh_in, "Input WAV or .jsonl manifest")->required();
  enh->add_option("--checkpoint", enh_ckpt, "Checkpoint path");
  enh->add_option("--beta", enh_beta, "Observation-adding ratio in [0,1]");
  enh->add_option("--out", enh_out, "Output directory");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Metric evaluation + report");
  std::string ev_ckpt, ev_report;
  std::vector<double> ev_betas;
  ev->add_option("--checkpoint", ev_ckpt, "Checkpoint path");
  ev->add_option("--betas", ev_betas, "OA ratios to evaluate");
  ev->add_option("--report", ev_report, "Report path (.csv or .json)");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Fine-tune and evaluate per alpha");
  std::string sw_ckpt, sw_report;
  std::vector<double> sw_alphas, sw_betas;
  std::optional<int> sw_epochs;
  sw->add_option("--checkpoint", sw_ckpt, "Pretrained checkpoint path");
  sw->add_option("--alphas", sw_alphas, "Alpha grid");
  sw->add_option("--betas", sw_betas, "OA ratios");
  sw->add_option("--report", sw_report, "Report path (.csv or .json)");
  sw->add_option("--epochs", sw_epochs, "Fine-tune epochs per alpha");

  // report
  auto* rep = app.add_subcommand("report", "Convert or re-plot a report");
  std::string rep_in, rep_out, rep_plots;
  rep->add_option("--in", rep_in, "Existing report (.csv or .json)")
      ->required();
  rep->add_option("--out", rep_out, "Converted report path");
  rep->add_option("--plots", rep_plots, "Plot output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    GlobalConfig cfg = ResolveConfig(flags);

    if (sim->parsed()) return CmdSimulate(cfg, sim_count, sim_lo, sim_hi, sim_out);
    if (train->parsed()) return CmdTrain(cfg, train_resume, train_epochs);
    if (ft->parsed()) {
      if (!ft_loss.empty()) cfg.loss.kind = ft_loss;
      if (ft_alpha) cfg.loss.alpha = *ft_alpha;
      cfg.Validate();
      return CmdFinetune(cfg, ft_from, ft_epochs);
    }
    if (enh->parsed()) return CmdEnhance(cfg, enh_in, enh_ckpt, enh_beta, enh_out);
    if (ev->parsed()) return CmdEvaluate(cfg, ev_ckpt, ev_betas, ev_report);
    if (sw->parsed())
      return CmdSweep(cfg, sw_ckpt, sw_alphas, sw_betas, sw_report, sw_epochs);
    if (rep->parsed()) return CmdReport(cfg, rep_in, rep_out, rep_plots);
    std::fprintf(stderr, "no subcommand selected\n");
    return 2;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return 1;
  }
}
