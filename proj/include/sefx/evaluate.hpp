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

#ifndef SEFX_EVALUATE_HPP_
#define SEFX_EVALUATE_HPP_

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sefx/encoder.hpp"
#include "sefx/mixer.hpp"
#include "sefx/train.hpp"

namespace sefx {

// Scale-invariant SDR in dB: the estimate is projected onto the reference,
// 10*log10(||s||^2/||e||^2) of the split. Values are capped at +/-cap_db;
// a vanishing error term returns the cap.
double SiSdr(const Waveform& estimate, const Waveform& reference,
             double cap_db = 60.0);

// Scale-dependent SNR metric (the negated training loss, as printed):
// 10*log10(||x_hat||^2 / (||x - x_hat||^2 + eps)), capped at +/-cap_db.
double SdSnrDb(const Waveform& estimate, const Waveform& reference,
               double eps = 1e-8, double cap_db = 60.0);

struct MetricsRow {
  std::string system;
  std::optional<double> beta;
  std::optional<double> alpha;
  double si_sdr_db = 0.0;
  double sd_snr_db = 0.0;
  double ssl_feature_mse = 0.0;
  int n_utterances = 0;
};

struct SweepSpec {
  std::vector<double> alphas = {0.0, 1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0};
  std::vector<double> betas = {0.0, 0.1, 0.5};
};

struct EvalOptions {
  std::vector<double> betas = {0.0, 0.1, 0.5};
  double cap_db = 60.0;
  double snr_eps = 1e-8;
};

using EnhanceFn = std::function<Waveform(const MixtureExample&)>;

// Per-beta mean metrics over the evaluation set, preceded by the
// unprocessed-noisy baseline row. ssl_feature_mse uses the supplied frozen
// adapter with the given layer weights. Per-utterance work runs in
// parallel; aggregation is an ordered reduction.
std::vector<MetricsRow> EvaluateSystem(const EnhanceFn& enhance,
                                       const std::string& system_id,
                                       const EncoderAdapter& adapter,
                                       const LayerWeights& weights,
                                       const std::vector<MixtureExample>& eval_set,
                                       const EvalOptions& opts = {});
std::vector<MetricsRow> EvaluateSystem(const EnhancerModel& model,
                                       const std::string& system_id,
                                       const EncoderAdapter& adapter,
                                       const LayerWeights& weights,
                                       const std::vector<MixtureExample>& eval_set,
                                       const EvalOptions& opts = {});

struct SweepReport {
  std::vector<MetricsRow> rows;
  // One fine-tuned checkpoint per alpha.
  std::vector<std::pair<double, std::string>> checkpoints;
};

// Fine-tunes one model per alpha from the pretrained checkpoint, evaluates
// each at beta = 0 next to the SNR-only baseline row, and records the
// per-alpha checkpoint paths under workdir.
SweepReport SweepAlpha(const Checkpoint& pretrained, const SweepSpec& sweep,
                       const std::vector<MixtureExample>& train,
                       const std::vector<MixtureExample>& dev,
                       const std::vector<MixtureExample>& eval_set,
                       const TrainConfig& finetune_cfg, const LossContext& ctx,
                       const std::string& workdir);

enum class ReportFormat { kCsv, kJson };

// CSV column order: system,beta,alpha,si_sdr_db,sd_snr_db,ssl_feature_mse,
// n_utterances. JSON is a list of row objects.
void EmitReport(const std::vector<MetricsRow>& rows, const std::string& path,
                ReportFormat format);
std::vector<MetricsRow> ParseReport(const std::string& path,
                                    ReportFormat format);

// SVG line charts, one file per metric: <metric>_vs_alpha.svg over rows
// carrying an alpha (log-scaled axis, alpha=0 pinned to the left edge) and
// <metric>_vs_beta.svg over rows carrying a beta. Returns written paths.
std::vector<std::string> EmitPlots(const std::vector<MetricsRow>& rows,
                                   const std::string& dir);

// External scorer hook. The command receives "ref_path<TAB>est_path" lines
// on stdin and must print "id<TAB>score" lines; ids are matched verbatim.
std::vector<std::pair<std::string, double>> RunExternalScorer(
    const std::string& command,
    const std::vector<std::pair<std::string, std::string>>& ref_est_pairs,
    const std::string& tmp_dir);

}  // namespace sefx

#endif  // SEFX_EVALUATE_HPP_
