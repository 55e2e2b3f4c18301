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

#include "sefx/evaluate.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "sefx/errors.hpp"
#include "test_support.hpp"

using namespace sefx;
using sefx_test::RandomWave;

namespace {
std::vector<MixtureExample> SmallEvalSet(int count, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n_samples = 800;
  return SimulateDataset(spec, {0.0, 10.0}, count, seed);
}
}  // namespace

TEST_CASE("si_sdr on the spec examples") {
  SUBCASE("scaled copies hit the cap") {
    Waveform x = RandomWave(1, 128);
    Waveform doubled = x;
    for (double& s : doubled.samples) s *= 2.0;
    CHECK(SiSdr(doubled, x) == 60.0);
  }

  SUBCASE("orthogonal unit error gives 0 dB") {
    Waveform x({1.0, 0.0}, 16000);
    Waveform xhat({1.0, 1.0}, 16000);
    CHECK(SiSdr(xhat, x) == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("zero reference is rejected") {
    Waveform zeros(std::vector<double>(8, 0.0), 16000);
    Waveform est = RandomWave(2, 8);
    CHECK_THROWS_AS(SiSdr(est, zeros), ZeroReference);
  }

  SUBCASE("scaling the estimate leaves the value unchanged") {
    // x_hat = x + e with e orthogonal to x; scale invariance on the
    // estimate within 1e-9 dB.
    Waveform x({1.0, 0.0, 0.0, 0.0}, 16000);
    Waveform base({1.0, 0.3, -0.2, 0.1}, 16000);
    const double v1 = SiSdr(base, x);
    for (double c : {0.5, 2.0, 10.0}) {
      Waveform scaled = base;
      for (double& s : scaled.samples) s *= c;
      CHECK(std::fabs(SiSdr(scaled, x) - v1) <= 1e-9);
    }
  }
}

TEST_CASE("evaluate_system endpoints") {
  auto eval_set = SmallEvalSet(6, 17);
  auto enc = MakeToyEncoder(3, 4, 8, 160, 80);
  LayerWeights w = MakeLayerWeights(4, LayerScheme::kLatterHalfUniform);
  EvalOptions opts;
  opts.betas = {0.0, 0.1, 0.5, 1.0};

  SUBCASE("identity enhancer reproduces the noisy baseline at every beta") {
    auto rows = EvaluateSystem(
        [](const MixtureExample& ex) { return ex.noisy; }, "identity", *enc, w,
        eval_set, opts);
    REQUIRE(rows.size() == 5);
    const MetricsRow& noisy = rows[0];
    CHECK(noisy.system == "noisy");
    // interior betas mix y with itself, which re-rounds; beta = 1 is exact
    for (std::size_t i = 1; i < rows.size(); ++i) {
      CHECK(rows[i].si_sdr_db == doctest::Approx(noisy.si_sdr_db).epsilon(1e-9));
      CHECK(rows[i].sd_snr_db == doctest::Approx(noisy.sd_snr_db).epsilon(1e-9));
      CHECK(rows[i].ssl_feature_mse ==
            doctest::Approx(noisy.ssl_feature_mse).epsilon(1e-9));
    }
    const MetricsRow& beta1 = rows[4];
    CHECK(beta1.si_sdr_db == noisy.si_sdr_db);
    CHECK(beta1.sd_snr_db == noisy.sd_snr_db);
    CHECK(beta1.ssl_feature_mse == noisy.ssl_feature_mse);
  }

  SUBCASE("oracle enhancer: cap at beta 0, noisy row at beta 1, monotone") {
    auto rows = EvaluateSystem(
        [](const MixtureExample& ex) { return ex.clean; }, "oracle", *enc, w,
        eval_set, opts);
    const MetricsRow& noisy = rows[0];
    const MetricsRow& beta0 = rows[1];
    const MetricsRow& beta01 = rows[2];
    const MetricsRow& beta05 = rows[3];
    const MetricsRow& beta1 = rows[4];

    CHECK(beta0.si_sdr_db == 60.0);
    CHECK(beta0.ssl_feature_mse <= 1e-12);

    // beta = 1 is bit-equal to the noisy baseline
    CHECK(beta1.si_sdr_db == noisy.si_sdr_db);
    CHECK(beta1.sd_snr_db == noisy.sd_snr_db);
    CHECK(beta1.ssl_feature_mse == noisy.ssl_feature_mse);

    // intermediate betas fall between the endpoints
    CHECK(beta01.si_sdr_db < beta0.si_sdr_db);
    CHECK(beta01.si_sdr_db > beta1.si_sdr_db);
    CHECK(beta05.si_sdr_db < beta01.si_sdr_db);
    CHECK(beta05.si_sdr_db > beta1.si_sdr_db);
  }

  SUBCASE("mean metrics are permutation invariant") {
    auto rows = EvaluateSystem(
        [](const MixtureExample& ex) { return ex.noisy; }, "identity", *enc, w,
        eval_set, opts);
    auto shuffled = eval_set;
    std::rotate(shuffled.begin(), shuffled.begin() + 3, shuffled.end());
    auto rows2 = EvaluateSystem(
        [](const MixtureExample& ex) { return ex.noisy; }, "identity", *enc, w,
        shuffled, opts);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(std::fabs(rows[i].si_sdr_db - rows2[i].si_sdr_db) <= 1e-12);
      CHECK(std::fabs(rows[i].sd_snr_db - rows2[i].sd_snr_db) <= 1e-12);
      CHECK(std::fabs(rows[i].ssl_feature_mse - rows2[i].ssl_feature_mse) <=
            1e-12);
    }
  }
}

TEST_CASE("report round trips") {
  namespace fs = std::filesystem;
  std::vector<MetricsRow> rows;
  MetricsRow a;
  a.system = "noisy";
  a.si_sdr_db = 4.25;
  a.sd_snr_db = 4.5;
  a.ssl_feature_mse = 0.012345678901234567;
  a.n_utterances = 60;
  rows.push_back(a);
  MetricsRow b;
  b.system = "ssl_mt";
  b.beta = 0.1;
  b.alpha = 1e-4;
  b.si_sdr_db = 11.125;
  b.sd_snr_db = 10.75;
  b.ssl_feature_mse = 3.5e-4;
  b.n_utterances = 60;
  rows.push_back(b);

  SUBCASE("csv") {
    const std::string path = (fs::temp_directory_path() / "sefx_r.csv").string();
    EmitReport(rows, path, ReportFormat::kCsv);
    {
      std::ifstream in(path);
      std::string header;
      std::getline(in, header);
      CHECK(header ==
            "system,beta,alpha,si_sdr_db,sd_snr_db,ssl_feature_mse,"
            "n_utterances");
      int lines = 0;
      std::string line;
      while (std::getline(in, line))
        if (!line.empty()) ++lines;
      CHECK(lines == 2);
    }
    auto back = ParseReport(path, ReportFormat::kCsv);
    REQUIRE(back.size() == 2);
    CHECK(back[0].system == "noisy");
    CHECK_FALSE(back[0].beta.has_value());
    CHECK(back[1].beta.value() == 0.1);
    CHECK(back[1].alpha.value() == 1e-4);
    CHECK(std::fabs(back[0].ssl_feature_mse - a.ssl_feature_mse) <= 1e-12);
    std::remove(path.c_str());
  }

  SUBCASE("json") {
    const std::string path = (fs::temp_directory_path() / "sefx_r.json").string();
    EmitReport(rows, path, ReportFormat::kJson);
    auto back = ParseReport(path, ReportFormat::kJson);
    REQUIRE(back.size() == 2);
    CHECK(back[1].si_sdr_db == rows[1].si_sdr_db);
    CHECK(back[0].ssl_feature_mse == rows[0].ssl_feature_mse);
    CHECK_FALSE(back[0].alpha.has_value());
    std::remove(path.c_str());
  }

  SUBCASE("empty reports are rejected") {
    CHECK_THROWS_AS(EmitReport({}, "/tmp/na.csv", ReportFormat::kCsv),
                    EmptyReport);
  }
}

TEST_CASE("plots carry one x tick per distinct alpha") {
  namespace fs = std::filesystem;
  std::vector<MetricsRow> rows;
  const std::vector<double> alphas = {0.0, 1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0};
  for (double alpha : alphas) {
    MetricsRow r;
    r.system = "ssl_mt";
    r.alpha = alpha;
    r.beta = 0.0;
    r.si_sdr_db = 10.0 + alpha;
    r.sd_snr_db = 9.0 + alpha;
    r.ssl_feature_mse = 0.1 / (1.0 + alpha);
    r.n_utterances = 10;
    rows.push_back(r);
  }

  const fs::path dir = fs::temp_directory_path() / "sefx_plots";
  fs::remove_all(dir);
  auto files = EmitPlots(rows, dir.string());
  CHECK(files.size() == 6);  // 3 metrics x {alpha, beta}

  // count x ticks in the alpha chart
  std::ifstream in(dir / "si_sdr_db_vs_alpha.svg");
  REQUIRE(in.good());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  std::size_t ticks = 0, pos = 0;
  while ((pos = text.find("class=\"xtick\"", pos)) != std::string::npos) {
    ++ticks;
    pos += 10;
  }
  CHECK(ticks == alphas.size());
  fs::remove_all(dir);
}

TEST_CASE("sweep over a single alpha: one fine-tuned row plus baselines") {
  namespace fs = std::filesystem;
  ConvTasNetConfig tiny;
  tiny.n_filters = 16;
  tiny.kernel_len = 8;
  tiny.bottleneck_dim = 8;
  tiny.n_repeats = 1;
  tiny.blocks_per_repeat = 2;
  tiny.hidden_dim = 12;
  tiny.dconv_kernel = 3;

  SyntheticSpec spec;
  spec.n_samples = 400;
  auto train = SimulateDataset(spec, {0.0, 10.0}, 6, 900);
  auto dev = SimulateDataset(spec, {0.0, 10.0}, 3, 901);
  auto eval_set = SimulateDataset(spec, {0.0, 10.0}, 3, 902);

  TrainConfig pre_cfg = TrainConfig::PretrainDefaults();
  pre_cfg.enhancer = tiny;
  pre_cfg.max_epochs = 1;
  pre_cfg.batch_size = 3;
  TrainResult pre = Pretrain(train, dev, pre_cfg);

  auto enc = MakeToyEncoder(91, 2, 4, 40, 20);
  LossContext ctx;
  ctx.encoder = enc.get();
  ctx.layer_weights = MakeLayerWeights(2, LayerScheme::kLatterHalfUniform);

  TrainConfig ft_cfg = TrainConfig::FinetuneDefaults();
  ft_cfg.enhancer = tiny;
  ft_cfg.loss = LossKind::kSslMt;
  ft_cfg.max_epochs = 1;
  ft_cfg.batch_size = 3;

  SweepSpec sweep;
  sweep.alphas = {0.1};

  const fs::path dir = fs::temp_directory_path() / "sefx_sweep_unit";
  fs::remove_all(dir);
  SweepReport report = SweepAlpha(pre.best, sweep, train, dev, eval_set,
                                  ft_cfg, ctx, dir.string());

  // one noisy row, one snr baseline row, one fine-tuned row
  REQUIRE(report.rows.size() == 3);
  CHECK(report.rows[0].system == "noisy");
  CHECK(report.rows[1].system == "snr_baseline");
  CHECK_FALSE(report.rows[1].alpha.has_value());
  CHECK(report.rows[2].alpha.value() == 0.1);

  // one checkpoint path per alpha, and the file exists
  REQUIRE(report.checkpoints.size() == 1);
  CHECK(report.checkpoints[0].first == 0.1);
  CHECK(fs::exists(report.checkpoints[0].second));
  fs::remove_all(dir);
}

TEST_CASE("external scorer subprocess contract") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "sefx_scorer";
  fs::create_directories(dir);

  // A scorer that echoes the basename of the ref path with a fixed score.
  const std::string scorer = "awk -F'\\t' '{n=split($1,p,\"/\"); print p[n] \"\\t\" 1.5}'";
  std::vector<std::pair<std::string, std::string>> pairs = {
      {"/a/ref1.wav", "/a/est1.wav"}, {"/b/ref2.wav", "/b/est2.wav"}};
  auto scores = RunExternalScorer(scorer, pairs, dir.string());
  REQUIRE(scores.size() == 2);
  CHECK(scores[0].first == "ref1.wav");
  CHECK(scores[0].second == 1.5);
  CHECK(scores[1].first == "ref2.wav");
  fs::remove_all(dir);
}
