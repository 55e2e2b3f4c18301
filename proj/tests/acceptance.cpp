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

// Acceptance suite. Runs the ten release criteria end to end at their
// stated tolerances and prints one PASS/FAIL line per criterion. Exits
// nonzero if any criterion fails.

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "sefx/convtasnet.hpp"
#include "sefx/encoder.hpp"
#include "sefx/evaluate.hpp"
#include "sefx/losses.hpp"
#include "sefx/mixer.hpp"
#include "sefx/recognizer.hpp"
#include "sefx/train.hpp"
#include "sefx/util.hpp"

namespace fs = std::filesystem;
using namespace sefx;

namespace {

int g_failures = 0;

void Report(int criterion, const std::string& name, bool pass,
            const std::string& detail) {
  std::printf("[%s] criterion %2d: %-28s %s\n", pass ? "PASS" : "FAIL",
              criterion, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string Fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

std::vector<double> FdGrad(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double RelErr(const std::vector<double>& got, const std::vector<double>& want) {
  double diff = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    diff += (got[i] - want[i]) * (got[i] - want[i]);
    ref += want[i] * want[i];
  }
  return ref == 0.0 ? std::sqrt(diff) : std::sqrt(diff / ref);
}

std::vector<double> RandomSamples(std::uint64_t seed, int n, double lo,
                                  double hi) {
  RandomStream rng(seed);
  std::vector<double> v(n);
  for (double& s : v) s = rng.Uniform(lo, hi);
  return v;
}

// ---------------------------------------------------------------------------

void Criterion1_GradientSuite() {
  const int n = 16;
  const int rate = 16000;
  LmfbConfig tiny;
  tiny.n_mels = 4;
  tiny.win_length = 8;
  tiny.hop_length = 4;
  tiny.fft_size = 16;
  auto enc = MakeToyEncoder(63, 2, 4, 8, 4);
  LayerWeights w = MakeLayerWeights(2, LayerScheme::kLatterHalfUniform);
  auto rec = MakeToyRecognizer(64, 9, tiny);
  const std::vector<int> tokens = {2};

  const std::vector<double> ref = RandomSamples(61, n, 0.1, 0.8);
  const std::vector<double> est = RandomSamples(62, n, 0.1, 0.8);
  const Tensor ref_row(1, n, ref);

  struct Case {
    const char* name;
    std::function<ad::Var(ad::Tape&, ad::Var)> build;
  };
  MultitaskConfig asr_mt;
  asr_mt.alpha = 0.1;
  asr_mt.lambda = 0.3;
  std::vector<Case> cases = {
      {"snr",
       [&](ad::Tape& t, ad::Var v) { return SnrLossOnTape(t, v, ref_row); }},
      {"lmfb",
       [&](ad::Tape& t, ad::Var v) {
         return LmfbMtOnTape(t, v, ref_row, rate, tiny, 0.0).total;
       }},
      {"ssl_mse",
       [&](ad::Tape& t, ad::Var v) {
         return SslMtOnTape(t, v, ref_row, rate, *enc, w, 0.0).total;
       }},
      {"ssl_mt(0.1)",
       [&](ad::Tape& t, ad::Var v) {
         return SslMtOnTape(t, v, ref_row, rate, *enc, w, 0.1).total;
       }},
      {"asr_mt(0.3)",
       [&](ad::Tape& t, ad::Var v) {
         return AsrMtOnTape(t, v, ref_row, rate, tokens, *rec, asr_mt).total;
       }},
  };

  double worst = 0.0;
  std::string worst_name;
  for (const Case& c : cases) {
    ad::Tape tape;
    ad::Var leaf = tape.Leaf(Tensor(1, n, est), true);
    ad::Var loss = c.build(tape, leaf);
    tape.Backward(loss);
    std::vector<double> analytic = tape.grad(leaf).v;
    auto scalar = [&](const std::vector<double>& xs) {
      ad::Tape t2;
      ad::Var l2 = t2.Leaf(Tensor(1, n, xs), false);
      return t2.val(c.build(t2, l2)).v[0];
    };
    const double err = RelErr(analytic, FdGrad(scalar, est));
    if (err > worst) {
      worst = err;
      worst_name = c.name;
    }
  }
  Report(1, "gradient suite", worst <= 1e-4,
         Fmt("max rel err %.3g (%s), tolerance 1e-4", worst,
             worst_name.c_str()));
}

void Criterion2_IdentityZero() {
  bool pass = true;
  std::ostringstream detail;

  Waveform x(RandomSamples(71, 2000, -0.5, 0.5), 16000);
  auto enc = MakeToyEncoder(72);
  LayerWeights w = MakeLayerWeights(4, LayerScheme::kLatterHalfUniform);
  const double ssl_self = SslMseLoss(x, x, *enc, w);
  pass &= ssl_self <= 1e-12;
  detail << "ssl_mse(x,x)=" << ssl_self;

  LmfbConfig lmfb;
  const double lmfb_self =
      LmfbMtLoss(x, x, lmfb, 0.0).components.at("lmfb");
  pass &= lmfb_self <= 1e-12;
  detail << " lmfb(x,x)=" << lmfb_self;

  Waveform y(RandomSamples(73, 2000, -0.5, 0.5), 16000);
  Waveform oa0 = ObservationAdd(y, x, 0.0);
  Waveform oa1 = ObservationAdd(y, x, 1.0);
  const bool endpoints = oa0.samples == x.samples && oa1.samples == y.samples;
  pass &= endpoints;
  detail << " oa_endpoints=" << (endpoints ? "exact" : "bad");

  FeatureSeries fs = enc->EncodeLayers(x);
  LayerWeights oh = MakeLayerWeights(4, LayerScheme::kOneHot, 2);
  const bool selector = WeightedSum(fs, oh).v == fs.layers[2].v;
  pass &= selector;
  detail << " one_hot=" << (selector ? "exact" : "bad");

  Report(2, "identity/zero suite", pass, detail.str());
}

void Criterion3_LayerWeights() {
  bool pass = true;
  std::string bad;
  for (int n = 2; n <= 64; ++n) {
    LayerWeights w = MakeLayerWeights(n, LayerScheme::kLatterHalfUniform);
    const int cut = n / 2;
    double sum = 0.0;
    bool ok = true;
    for (int i = 0; i < n; ++i) {
      if (i < cut) ok &= w.weights[i] == 0.0;
      else ok &= std::fabs(w.weights[i] - 1.0 / (n - cut)) <= 1e-15;
      sum += w.weights[i];
    }
    ok &= std::fabs(sum - 1.0) <= 1e-12;
    if (!ok) {
      pass = false;
      bad = Fmt("first failure at N=%d", n);
      break;
    }
  }
  Report(3, "layer-weight suite", pass,
         pass ? "N in 2..64: floor(N/2) leading zeros, equal tail, sum 1"
              : bad);
}

void Criterion4_Mixing() {
  SyntheticSpec spec;
  spec.n_samples = 2000;
  auto data = SimulateDataset(spec, {-3.0, 20.0}, 100, 0xace);
  double worst = 0.0;
  for (const MixtureExample& ex : data) {
    const double measured = MeasureSnr(ex.clean, ex.noise);
    worst = std::max(worst, std::fabs(measured - ex.snr_db));
  }
  Report(4, "mixing suite", worst <= 0.01,
         Fmt("100 mixtures in [-3,20] dB, worst SNR error %.3g dB", worst));
}

void Criterion5_CombinerExactness() {
  const std::vector<double> alphas = {0.0, 1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0};
  LmfbConfig tiny;
  tiny.n_mels = 4;
  tiny.win_length = 8;
  tiny.hop_length = 4;
  tiny.fft_size = 16;
  auto enc = MakeToyEncoder(82, 2, 4, 8, 4);
  LayerWeights w = MakeLayerWeights(2, LayerScheme::kLatterHalfUniform);
  auto rec = MakeToyRecognizer(83, 9, tiny);

  Waveform x(RandomSamples(84, 64, 0.05, 0.6), 16000);
  Waveform xhat(RandomSamples(85, 64, 0.05, 0.6), 16000);

  double worst = 0.0;
  for (double alpha : alphas) {
    LossValue lv1 = LmfbMtLoss(xhat, x, tiny, alpha);
    worst = std::max(worst, std::fabs(lv1.total - lv1.components.at("lmfb") -
                                      alpha * lv1.components.at("snr")));
    LossValue lv2 = SslMtLoss(xhat, x, *enc, w, alpha);
    worst = std::max(worst, std::fabs(lv2.total - lv2.components.at("ssl_mse") -
                                      alpha * lv2.components.at("snr")));
    MultitaskConfig mt;
    mt.alpha = alpha;
    LossValue lv3 = AsrMtLoss(xhat, x, {2, 4}, *rec, mt);
    worst = std::max(worst, std::fabs(lv3.total - lv3.components.at("asr") -
                                      alpha * lv3.components.at("snr")));
  }
  Report(5, "combiner exactness", worst <= 1e-9,
         Fmt("default alpha grid, worst |total-primary-alpha*snr| = %.3g",
             worst));
}

struct DeskRun {
  std::vector<MixtureExample> train, dev, eval;
  TrainResult pretrain;
  std::unique_ptr<EncoderAdapter> encoder;
  LayerWeights weights;
  double noisy_si_sdr = 0.0;
  double snr_si_sdr = 0.0;
  double snr_sd_snr = 0.0;
  double snr_featmse = 0.0;
};

TrainConfig DeskTrainConfig() {
  TrainConfig cfg = TrainConfig::PretrainDefaults();
  cfg.enhancer = ConvTasNetConfig::DeskPreset();
  cfg.batch_size = 8;
  cfg.seed = 2026;
  return cfg;
}

void Criterion6_PretrainTrend(DeskRun* run) {
  SyntheticSpec spec;
  spec.n_samples = 4000;
  run->train = SimulateDataset(spec, {0.0, 10.0}, 500, 0x6001);
  run->dev = SimulateDataset(spec, {0.0, 10.0}, 50, 0x6002);
  run->eval = SimulateDataset(spec, {0.0, 10.0}, 60, 0x6003);
  run->encoder = MakeToyEncoder(0x6004);
  run->weights = MakeLayerWeights(4, LayerScheme::kLatterHalfUniform);

  TrainConfig cfg = DeskTrainConfig();
  cfg.max_epochs = 20;  // the stated epoch budget
  run->pretrain = Pretrain(run->train, run->dev, cfg);

  EvalOptions opts;
  opts.betas = {0.0};
  auto rows = EvaluateSystem(run->pretrain.best.model, "snr", *run->encoder,
                             run->weights, run->eval, opts);
  run->noisy_si_sdr = rows[0].si_sdr_db;
  run->snr_si_sdr = rows[1].si_sdr_db;
  run->snr_sd_snr = rows[1].sd_snr_db;
  run->snr_featmse = rows[1].ssl_feature_mse;

  const double gain = run->snr_si_sdr - run->noisy_si_sdr;
  Report(6, "desk pretraining trend", gain >= 3.0,
         Fmt("held-out SI-SDR %.2f dB vs noisy %.2f dB (gain %.2f, need "
             ">= 3.00)",
             run->snr_si_sdr, run->noisy_si_sdr, gain));
}

void Criterion7_FinetuneTrend(DeskRun* run) {
  LossContext ctx;
  ctx.encoder = run->encoder.get();
  ctx.layer_weights = run->weights;

  TrainConfig cfg = TrainConfig::FinetuneDefaults();
  cfg.enhancer = ConvTasNetConfig::DeskPreset();
  cfg.loss = LossKind::kSslMt;
  cfg.mt.alpha = 0.1;
  cfg.max_epochs = 10;  // the full epoch budget
  cfg.batch_size = 4;
  cfg.seed = 2027;

  TrainResult ft = Finetune(run->pretrain.best, run->train, run->dev, cfg, ctx);

  EvalOptions opts;
  opts.betas = {0.0};
  auto rows = EvaluateSystem(ft.best.model, "ssl_mt", *run->encoder,
                             run->weights, run->eval, opts);
  const double ft_featmse = rows[1].ssl_feature_mse;
  const double ft_si_sdr = rows[1].si_sdr_db;

  const double rel_drop = (run->snr_featmse - ft_featmse) / run->snr_featmse;
  const double sdr_drop = run->snr_si_sdr - ft_si_sdr;
  const bool pass = rel_drop >= 0.10 && sdr_drop <= 2.0;
  Report(7, "ssl-mse fine-tuning trend", pass,
         Fmt("feat-mse %.3g -> %.3g (rel drop %.1f%%, need >= 10%%), SI-SDR "
             "%.2f -> %.2f (drop %.2f dB, allow <= 2)",
             run->snr_featmse, ft_featmse, 100.0 * rel_drop, run->snr_si_sdr,
             ft_si_sdr, sdr_drop));
}

void Criterion8_AlphaSweepShape(DeskRun* run) {
  LossContext ctx;
  ctx.encoder = run->encoder.get();
  ctx.layer_weights = run->weights;

  // The sweep fine-tunes from an SNR-converged starting point, so the
  // baseline SNR training is first extended until its plateau.
  TrainConfig pre_cfg = DeskTrainConfig();
  pre_cfg.max_epochs = 45;
  TrainResult extended =
      ResumeTraining(run->pretrain.best, run->train, run->dev, pre_cfg, {});

  TrainConfig cfg = TrainConfig::FinetuneDefaults();
  cfg.enhancer = ConvTasNetConfig::DeskPreset();
  cfg.loss = LossKind::kSslMt;
  cfg.max_epochs = 6;
  cfg.batch_size = 4;
  cfg.seed = 2028;

  SweepSpec spec;
  spec.alphas = {1e-4, 10.0};

  const fs::path workdir = fs::temp_directory_path() / "sefx_acc_sweep";
  fs::remove_all(workdir);
  SweepReport report = SweepAlpha(extended.best, spec, run->train,
                                  run->dev, run->eval, cfg, ctx,
                                  workdir.string());

  double base_sd_snr = 0.0, sd_snr_10 = 0.0;
  double featmse_small = -1.0, featmse_10 = -1.0;
  for (const MetricsRow& r : report.rows) {
    if (r.system == "snr_baseline") base_sd_snr = r.sd_snr_db;
    if (r.alpha && *r.alpha == 10.0) {
      sd_snr_10 = r.sd_snr_db;
      featmse_10 = r.ssl_feature_mse;
    }
    if (r.alpha && *r.alpha == 1e-4) featmse_small = r.ssl_feature_mse;
  }
  const bool ckpts = report.checkpoints.size() == 2;
  const double gap = std::fabs(sd_snr_10 - base_sd_snr);
  const bool pass =
      ckpts && gap <= 1.0 && featmse_small >= 0.0 && featmse_small <= featmse_10;
  Report(8, "alpha-sweep shape", pass,
         Fmt("sd_snr(a=10)=%.2f vs baseline %.2f (gap %.2f, allow <= 1); "
             "featmse(1e-4)=%.3g <= featmse(10)=%.3g; %zu checkpoints",
             sd_snr_10, base_sd_snr, gap, featmse_small, featmse_10,
             report.checkpoints.size()));
  fs::remove_all(workdir);
}

void Criterion9_OaEndpoints(DeskRun* run) {
  EvalOptions opts;
  opts.betas = {0.0, 0.1, 0.5, 1.0};
  auto rows = EvaluateSystem(
      [](const MixtureExample& ex) { return ex.clean; }, "oracle",
      *run->encoder, run->weights, run->eval, opts);

  const MetricsRow& noisy = rows[0];
  const MetricsRow& b0 = rows[1];
  const MetricsRow& b01 = rows[2];
  const MetricsRow& b05 = rows[3];
  const MetricsRow& b1 = rows[4];

  const bool exact = b1.si_sdr_db == noisy.si_sdr_db &&
                     b1.sd_snr_db == noisy.sd_snr_db &&
                     b1.ssl_feature_mse == noisy.ssl_feature_mse;
  const bool between = b01.si_sdr_db > b1.si_sdr_db &&
                       b01.si_sdr_db < b0.si_sdr_db &&
                       b05.si_sdr_db > b1.si_sdr_db &&
                       b05.si_sdr_db < b0.si_sdr_db;
  Report(9, "OA endpoint equivalence", exact && between,
         Fmt("beta=1 row %s noisy row; si_sdr beta 0.1/0.5 = %.2f/%.2f in "
             "(%.2f, %.2f)",
             exact ? "equals" : "DIFFERS FROM", b01.si_sdr_db, b05.si_sdr_db,
             b1.si_sdr_db, b0.si_sdr_db));
}

void Criterion10_Determinism(const std::string& cli) {
  const fs::path root = fs::temp_directory_path() / "sefx_acc_det";
  fs::remove_all(root);
  fs::create_directories(root);

  auto run_once = [&](const std::string& tag) -> bool {
    const fs::path dir = root / tag;
    fs::create_directories(dir);
    auto sh = [&](const std::string& args) {
      const std::string cmd =
          cli + " " + args + " >> " + (dir / "log.txt").string() + " 2>&1";
      return WEXITSTATUS(std::system(cmd.c_str())) == 0;
    };
    bool ok = true;
    ok &= sh("--seed 424 simulate --count 10 --snr-lo 0 --snr-hi 10 --out " +
             (dir / "train").string());
    ok &= sh("--seed 425 simulate --count 4 --snr-lo 0 --snr-hi 10 --out " +
             (dir / "dev").string());
    const std::string cfg = (dir / "cfg.json").string();
    {
      std::ofstream out(cfg);
      out << "{\"paths\": {\"workdir\": \"" << (dir / "work").string()
          << "\", \"train_manifest\": \"" << (dir / "train/manifest.jsonl").string()
          << "\", \"dev_manifest\": \"" << (dir / "dev/manifest.jsonl").string()
          << "\", \"eval_manifest\": \"" << (dir / "dev/manifest.jsonl").string()
          << "\"}, \"signal\": {\"snr_lo_db\": 0, \"snr_hi_db\": 10}, "
          << "\"training\": {\"batch_size\": 4}}";
    }
    ok &= sh("--config " + cfg + " --workers 1 train --epochs 2");
    ok &= sh("--config " + cfg + " --workers 1 evaluate --checkpoint " +
             (dir / "work/pretrain_best.ckpt").string() + " --report " +
             (dir / "report.csv").string());
    return ok;
  };

  bool pass = run_once("a") && run_once("b");
  std::string detail = "CLI runs failed";
  if (pass) {
    const bool best = FileChecksum((root / "a/work/pretrain_best.ckpt").string()) ==
                      FileChecksum((root / "b/work/pretrain_best.ckpt").string());
    const bool last = FileChecksum((root / "a/work/pretrain_last.ckpt").string()) ==
                      FileChecksum((root / "b/work/pretrain_last.ckpt").string());
    const bool report = FileChecksum((root / "a/report.csv").string()) ==
                        FileChecksum((root / "b/report.csv").string());
    pass = best && last && report;
    detail = Fmt("checkpoints %s/%s, report %s (checksum equality)",
                 best ? "equal" : "DIFFER", last ? "equal" : "DIFFER",
                 report ? "equal" : "DIFFER");
  }
  Report(10, "determinism", pass, detail);
  fs::remove_all(root);
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  if (const char* env = std::getenv("SEFX_CLI")) cli = env;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--cli" && i + 1 < argc) cli = argv[++i];
  }

  std::printf("sefx acceptance suite\n");

  Criterion1_GradientSuite();
  Criterion2_IdentityZero();
  Criterion3_LayerWeights();
  Criterion4_Mixing();
  Criterion5_CombinerExactness();

  DeskRun run;
  Criterion6_PretrainTrend(&run);
  Criterion7_FinetuneTrend(&run);
  Criterion8_AlphaSweepShape(&run);
  Criterion9_OaEndpoints(&run);

  if (cli.empty()) {
    Report(10, "determinism", false,
           "sefx binary path missing (set SEFX_CLI or pass --cli)");
  } else {
    Criterion10_Determinism(cli);
  }

  std::printf("%d of 10 criteria passed\n", 10 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
