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

// End-to-end tests of the sefx binary: flag handling, exit codes, file
// outputs. The binary path arrives via the SEFX_CLI environment variable
// set by CTest.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "sefx/config.hpp"
#include "sefx/errors.hpp"
#include "sefx/util.hpp"

namespace fs = std::filesystem;
using namespace sefx;

namespace {

std::string CliPath() {
  const char* p = std::getenv("SEFX_CLI");
  REQUIRE_MESSAGE(p != nullptr, "SEFX_CLI must point at the sefx binary");
  return p;
}

int Run(const std::string& args, const std::string& log = "/dev/null") {
  const std::string cmd = CliPath() + " " + args + " > " + log + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / name;
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& sub) const {
    return (path / sub).string();
  }
};

}  // namespace

TEST_CASE("help exits 0 and unknown flags exit 2") {
  CHECK(Run("--help") == 0);
  CHECK(Run("simulate --help") == 0);
  CHECK(Run("--definitely-not-a-flag simulate") == 2);
  CHECK(Run("simulate --bogus 4") == 2);
  CHECK(Run("") == 2);  // missing subcommand
}

TEST_CASE("simulate: manifest length, rerun determinism, bad range") {
  TempDir dir("sefx_cli_sim");

  CHECK(Run("--seed 7 simulate --count 10 --snr-lo 0 --snr-hi 5 --out " +
            dir / "a") == 0);
  std::ifstream manifest(dir / "a/manifest.jsonl");
  int lines = 0;
  std::string line;
  while (std::getline(manifest, line))
    if (!line.empty()) ++lines;
  CHECK(lines == 10);

  // rerun into the same out dir: identical manifest and WAV bytes
  const std::uint64_t manifest_sum = FileChecksum(dir / "a/manifest.jsonl");
  const std::uint64_t wav_sum = FileChecksum(dir / "a/synth-0_noisy.wav");
  CHECK(Run("--seed 7 simulate --count 10 --snr-lo 0 --snr-hi 5 --out " +
            dir / "a") == 0);
  CHECK(FileChecksum(dir / "a/manifest.jsonl") == manifest_sum);
  CHECK(FileChecksum(dir / "a/synth-0_noisy.wav") == wav_sum);
  // a different seed produces different audio
  CHECK(Run("--seed 8 simulate --count 10 --snr-lo 0 --snr-hi 5 --out " +
            dir / "b") == 0);
  CHECK(FileChecksum(dir / "b/synth-0_noisy.wav") != wav_sum);

  CHECK(Run("simulate --snr-lo 5 --snr-hi 3 --out " + dir / "c") == 2);
}

TEST_CASE("config handling: dump round trip and unknown keys") {
  TempDir dir("sefx_cli_cfg");

  const std::string dumped = dir / "dumped.json";
  CHECK(Run("--seed 99 --dump-config " + dumped + " simulate --count 2 --out " +
            dir / "d") == 0);
  GlobalConfig cfg = LoadGlobalConfig(dumped);
  CHECK(cfg.seed == 99);

  // dump -> load -> dump is stable
  const std::string dumped2 = dir / "dumped2.json";
  CHECK(Run("--config " + dumped + " --dump-config " + dumped2 +
            " simulate --count 2 --out " + dir / "e") == 0);
  CHECK(FileChecksum(dumped) == FileChecksum(dumped2));

  const std::string bad = dir / "bad.json";
  {
    std::ofstream out(bad);
    out << R"({"unknown_section": 1})";
  }
  CHECK(Run("--config " + bad + " simulate") == 2);

  const std::string bad_key = dir / "bad_key.json";
  {
    std::ofstream out(bad_key);
    out << R"({"training": {"pretrain_lr": 0.1, "bogus": 2}})";
  }
  CHECK(Run("--config " + bad_key + " simulate") == 2);
}

TEST_CASE("train/enhance/evaluate pipeline with exit-code checks") {
  TempDir dir("sefx_cli_pipe");

  REQUIRE(Run("--seed 5 simulate --count 12 --snr-lo 0 --snr-hi 10 --out " +
              dir / "train") == 0);
  REQUIRE(Run("--seed 6 simulate --count 4 --snr-lo 0 --snr-hi 10 --out " +
              dir / "dev") == 0);

  const std::string cfg_path = dir / "cfg.json";
  {
    std::ofstream out(cfg_path);
    out << R"({
      "paths": {"workdir": ")" << dir / "work" << R"(",
                 "train_manifest": ")" << dir / "train/manifest.jsonl" << R"(",
                 "dev_manifest": ")" << dir / "dev/manifest.jsonl" << R"(",
                 "eval_manifest": ")" << dir / "dev/manifest.jsonl" << R"("},
      "signal": {"snr_lo_db": 0, "snr_hi_db": 10},
      "training": {"batch_size": 4}
    })";
  }

  // missing checkpoint -> config error
  CHECK(Run("--config " + cfg_path + " enhance --in " + dir /
            "dev/synth-0_noisy.wav --out " + dir / "enh") == 2);

  REQUIRE(Run("--config " + cfg_path + " train --epochs 1") == 0);
  const std::string ckpt = dir / "work/pretrain_best.ckpt";
  CHECK(fs::exists(ckpt));

  // resume continues and exits cleanly
  CHECK(Run("--config " + cfg_path + " train --resume " + dir /
            "work/pretrain_last.ckpt --epochs 2") == 0);

  // enhance a single wav: beta 1 output equals the input samples
  REQUIRE(Run("--config " + cfg_path + " enhance --in " + dir /
              "dev/synth-0_noisy.wav --checkpoint " + ckpt +
              " --beta 1 --out " + dir / "enh") == 0);
  CHECK(FileChecksum(dir / "enh/synth-0_noisy_enhanced.wav") ==
        FileChecksum(dir / "dev/synth-0_noisy.wav"));

  // beta 0.1 and 0.5 both accepted
  CHECK(Run("--config " + cfg_path + " enhance --in " + dir /
            "dev/synth-0_noisy.wav --checkpoint " + ckpt +
            " --beta 0.1 --out " + dir / "enh01") == 0);
  CHECK(Run("--config " + cfg_path + " enhance --in " + dir /
            "dev/synth-0_noisy.wav --checkpoint " + ckpt +
            " --beta 0.5 --out " + dir / "enh05") == 0);
  // out-of-range beta is a usage error
  CHECK(Run("--config " + cfg_path + " enhance --in " + dir /
            "dev/synth-0_noisy.wav --checkpoint " + ckpt +
            " --beta 1.5 --out " + dir / "enhbad") == 2);

  // evaluate writes the documented CSV header and plots
  REQUIRE(Run("--config " + cfg_path + " evaluate --checkpoint " + ckpt +
              " --report " + dir / "report.csv") == 0);
  {
    std::ifstream in(dir / "report.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "system,beta,alpha,si_sdr_db,sd_snr_db,ssl_feature_mse,"
          "n_utterances");
  }
  CHECK(fs::exists(dir / "work/plots/si_sdr_db_vs_beta.svg"));

  // report conversion round trip
  REQUIRE(Run("--config " + cfg_path + " report --in " + dir /
              "report.csv --out " + dir / "report.json") == 0);
  CHECK(fs::exists(dir / "report.json"));

  // finetune without a checkpoint is a config error
  CHECK(Run("--config " + cfg_path + " finetune --loss ssl_mt") == 2);
  // unknown loss kind is a config error
  CHECK(Run("--config " + cfg_path + " finetune --from " + ckpt +
            " --loss nope") == 2);

  // a real fine-tune logs both loss components per epoch
  REQUIRE(Run("--config " + cfg_path + " finetune --from " + ckpt +
              " --loss ssl_mt --alpha 0.1 --epochs 1") == 0);
  {
    std::ifstream in(dir / "work/finetune_log.jsonl");
    std::string log_line;
    std::getline(in, log_line);
    CHECK(log_line.find("\"ssl_mse\"") != std::string::npos);
    CHECK(log_line.find("\"snr\"") != std::string::npos);
  }

  // empty eval manifest -> config error
  const std::string empty_manifest = dir / "empty.jsonl";
  { std::ofstream out(empty_manifest); }
  const std::string cfg2 = dir / "cfg2.json";
  {
    std::ofstream out(cfg2);
    out << R"({
      "paths": {"workdir": ")" << dir / "work" << R"(",
                 "eval_manifest": ")" << empty_manifest << R"("}
    })";
  }
  CHECK(Run("--config " + cfg2 + " evaluate --checkpoint " + ckpt) == 2);
}

TEST_CASE("environment overrides: SEFX_SEED wins over the file") {
  TempDir dir("sefx_cli_env");
  const std::string cfg_path = dir / "cfg.json";
  {
    std::ofstream out(cfg_path);
    out << R"({"seed": 1})";
  }
  const std::string dumped = dir / "effective.json";
  const std::string cmd = "SEFX_SEED=777 " + CliPath() + " --config " +
                          cfg_path + " --dump-config " + dumped +
                          " simulate --count 2 --out " + dir / "x" +
                          " > /dev/null 2>&1";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  GlobalConfig cfg = LoadGlobalConfig(dumped);
  CHECK(cfg.seed == 777);
}

TEST_CASE("numeric divergence exits 4") {
  TempDir dir("sefx_cli_div");
  REQUIRE(Run("--seed 5 simulate --count 4 --snr-lo 0 --snr-hi 10 --out " +
              dir / "train") == 0);
  const std::string cfg_path = dir / "cfg.json";
  {
    std::ofstream out(cfg_path);
    out << R"({
      "paths": {"workdir": ")" << dir / "work" << R"(",
                 "train_manifest": ")" << dir / "train/manifest.jsonl" << R"(",
                 "dev_manifest": ")" << dir / "train/manifest.jsonl" << R"("},
      "signal": {"snr_lo_db": 0, "snr_hi_db": 10},
      "training": {"pretrain_lr": 1e80, "clip_enabled": false, "batch_size": 1}
    })";
  }
  CHECK(Run("--config " + cfg_path + " train --epochs 3") == 4);
}

TEST_CASE("asr_mt with a misconfigured recognizer is a config error") {
  TempDir dir("sefx_cli_asr");
  const std::string cfg_path = dir / "cfg.json";
  {
    std::ofstream out(cfg_path);
    out << R"({"loss": {"kind": "asr_mt", "recognizer_vocab": 1}})";
  }
  CHECK(Run("--config " + cfg_path + " finetune --from nowhere.ckpt") == 2);
}

TEST_CASE("training rerun with the same seed is checksum-identical") {
  TempDir dir("sefx_cli_det");

  REQUIRE(Run("--seed 5 simulate --count 8 --snr-lo 0 --snr-hi 10 --out " +
              dir / "train") == 0);
  REQUIRE(Run("--seed 6 simulate --count 3 --snr-lo 0 --snr-hi 10 --out " +
              dir / "dev") == 0);

  auto write_cfg = [&](const std::string& work) {
    const std::string path = dir / ("cfg_" + work + ".json");
    std::ofstream out(path);
    out << R"({
      "paths": {"workdir": ")" << dir / work << R"(",
                 "train_manifest": ")" << dir / "train/manifest.jsonl" << R"(",
                 "dev_manifest": ")" << dir / "dev/manifest.jsonl" << R"("},
      "signal": {"snr_lo_db": 0, "snr_hi_db": 10},
      "training": {"batch_size": 4}
    })";
    return path;
  };

  REQUIRE(Run("--config " + write_cfg("w1") + " --workers 1 train --epochs 2") ==
          0);
  REQUIRE(Run("--config " + write_cfg("w2") + " --workers 1 train --epochs 2") ==
          0);
  CHECK(FileChecksum(dir / "w1/pretrain_best.ckpt") ==
        FileChecksum(dir / "w2/pretrain_best.ckpt"));
  CHECK(FileChecksum(dir / "w1/pretrain_last.ckpt") ==
        FileChecksum(dir / "w2/pretrain_last.ckpt"));
}
