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

#include <doctest.h>

#include "sefx/errors.hpp"

using namespace sefx;

TEST_CASE("defaults validate and carry the documented values") {
  GlobalConfig cfg;
  cfg.Validate();
  CHECK(cfg.lmfb.n_mels == 80);
  CHECK(cfg.lmfb.win_length == 400);
  CHECK(cfg.lmfb.hop_length == 200);
  CHECK(cfg.loss.lambda == 0.3);
  CHECK(cfg.training.pretrain_lr == 5e-4);
  CHECK(cfg.training.finetune_lr == 1e-4);
  CHECK(cfg.training.lr_factor == 0.75);
  CHECK(cfg.training.patience_epochs == 2);
  CHECK(cfg.training.pretrain_epochs == 100);
  CHECK(cfg.training.finetune_epochs == 50);
  CHECK(cfg.evaluation.alphas ==
        std::vector<double>{0.0, 1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0});
  CHECK(cfg.evaluation.betas == std::vector<double>{0.0, 0.1, 0.5});
  CHECK(cfg.evaluation.snr_lo_db == 0.0);
  CHECK(cfg.evaluation.snr_hi_db == 10.0);
  CHECK(cfg.enhancer.Resolve().n_filters == 256);  // desk preset default
}

TEST_CASE("json round trip preserves the effective configuration") {
  GlobalConfig cfg;
  cfg.seed = 1234;
  cfg.loss.kind = "ssl_mt";
  cfg.loss.alpha = 0.01;
  cfg.enhancer.preset = "full";
  cfg.evaluation.betas = {0.0, 0.25};

  const std::string text = GlobalConfigToJson(cfg);
  GlobalConfig back = GlobalConfigFromJson(text);
  CHECK(GlobalConfigToJson(back) == text);
  CHECK(back.seed == 1234);
  CHECK(back.loss.kind == "ssl_mt");
  CHECK(back.enhancer.Resolve().n_filters == 4096);
  CHECK(back.evaluation.betas == std::vector<double>{0.0, 0.25});
}

TEST_CASE("unknown keys are rejected everywhere") {
  CHECK_THROWS_AS(GlobalConfigFromJson(R"({"nope": 1})"), InvalidConfig);
  CHECK_THROWS_AS(GlobalConfigFromJson(R"({"signal": {"nope": 1}})"),
                  InvalidConfig);
  CHECK_THROWS_AS(GlobalConfigFromJson(R"({"loss": {"alpha": 0.1, "x": 2}})"),
                  InvalidConfig);
  CHECK_THROWS_AS(GlobalConfigFromJson("not json"), InvalidConfig);
}

TEST_CASE("section invariants are enforced at load") {
  CHECK_THROWS_AS(GlobalConfigFromJson(R"({"lmfb": {"win_length": 900}})"),
                  InvalidConfig);  // win > fft
  CHECK_THROWS_AS(
      GlobalConfigFromJson(R"({"training": {"lr_factor": 1.5}})"),
      InvalidConfig);
  CHECK_THROWS_AS(
      GlobalConfigFromJson(R"({"signal": {"snr_lo_db": 5, "snr_hi_db": 3}})"),
      InvalidConfig);
  CHECK_THROWS_AS(GlobalConfigFromJson(R"({"loss": {"kind": "bogus"}})"),
                  InvalidConfig);
  CHECK_THROWS_AS(GlobalConfigFromJson(R"({"evaluation": {"betas": [2.0]}})"),
                  InvalidConfig);
  CHECK_THROWS_AS(GlobalConfigFromJson(R"({"enhancer": {"preset": "huge"}})"),
                  InvalidConfig);
}

TEST_CASE("loss section resolves the numerator switch") {
  GlobalConfig cfg;
  cfg.loss.snr_numerator = "reference";
  CHECK(cfg.loss.SnrOptions().numerator == SnrNumerator::kReference);
  cfg.loss.snr_numerator = "estimate";
  CHECK(cfg.loss.SnrOptions().numerator == SnrNumerator::kEstimate);
  cfg.loss.snr_numerator = "wat";
  CHECK_THROWS_AS(cfg.loss.SnrOptions(), InvalidConfig);
}
