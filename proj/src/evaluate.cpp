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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sefx/errors.hpp"
#include "sefx/losses.hpp"

namespace sefx {

using nlohmann::json;

namespace {
double Clamp(double v, double cap) {
  if (v > cap) return cap;
  if (v < -cap) return -cap;
  return v;
}
}  // namespace

double SiSdr(const Waveform& estimate, const Waveform& reference,
             double cap_db) {
  if (estimate.size() != reference.size())
    throw LengthMismatch("si_sdr: lengths differ");
  const double ref_energy = Energy(reference);
  if (ref_energy <= 0.0) throw ZeroReference("si_sdr: zero reference");

  double dot = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i)
    dot += estimate.samples[i] * reference.samples[i];
  const double gain = dot / ref_energy;

  double s2 = 0.0, e2 = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const double s = gain * reference.samples[i];
    const double e = estimate.samples[i] - s;
    s2 += s * s;
    e2 += e * e;
  }
  if (e2 <= s2 * 1e-30 || e2 == 0.0) return cap_db;
  if (s2 == 0.0) return -cap_db;
  return Clamp(10.0 * std::log10(s2 / e2), cap_db);
}

double SdSnrDb(const Waveform& estimate, const Waveform& reference,
               double eps, double cap_db) {
  if (estimate.size() != reference.size())
    throw LengthMismatch("sd_snr: lengths differ");
  const double est_energy = Energy(estimate);
  double err = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const double d = reference.samples[i] - estimate.samples[i];
    err += d * d;
  }
  if (est_energy <= 0.0) return -cap_db;
  return Clamp(10.0 * std::log10(est_energy / (err + eps)), cap_db);
}

std::vector<MetricsRow> EvaluateSystem(const EnhanceFn& enhance,
                                       const std::string& system_id,
                                       const EncoderAdapter& adapter,
                                       const LayerWeights& weights,
                                       const std::vector<MixtureExample>& eval_set,
                                       const EvalOptions& opts) {
  if (eval_set.empty()) throw EmptyDataset("evaluation set is empty");
  const int n = static_cast<int>(eval_set.size());

  std::vector<Waveform> enhanced(n);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int i = 0; i < n; ++i) enhanced[i] = enhance(eval_set[i]);

  struct Acc {
    double si_sdr = 0.0, sd_snr = 0.0, ssl = 0.0;
  };
  auto metrics_of = [&](const Waveform& est, const MixtureExample& ex) {
    Acc a;
    a.si_sdr = SiSdr(est, ex.clean, opts.cap_db);
    a.sd_snr = SdSnrDb(est, ex.clean, opts.snr_eps, opts.cap_db);
    a.ssl = SslMseLoss(est, ex.clean, adapter, weights);
    return a;
  };

  std::vector<MetricsRow> rows;

  // Unprocessed-noisy baseline.
  {
    std::vector<Acc> per(n);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int i = 0; i < n; ++i) per[i] = metrics_of(eval_set[i].noisy, eval_set[i]);
    MetricsRow row;
    row.system = "noisy";
    row.n_utterances = n;
    for (const Acc& a : per) {
      row.si_sdr_db += a.si_sdr;
      row.sd_snr_db += a.sd_snr;
      row.ssl_feature_mse += a.ssl;
    }
    row.si_sdr_db /= n;
    row.sd_snr_db /= n;
    row.ssl_feature_mse /= n;
    rows.push_back(row);
  }

  for (double beta : opts.betas) {
    std::vector<Acc> per(n);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int i = 0; i < n; ++i) {
      Waveform post = ObservationAdd(eval_set[i].noisy, enhanced[i], beta);
      per[i] = metrics_of(post, eval_set[i]);
    }
    MetricsRow row;
    row.system = system_id;
    row.beta = beta;
    row.n_utterances = n;
    for (const Acc& a : per) {
      row.si_sdr_db += a.si_sdr;
      row.sd_snr_db += a.sd_snr;
      row.ssl_feature_mse += a.ssl;
    }
    row.si_sdr_db /= n;
    row.sd_snr_db /= n;
    row.ssl_feature_mse /= n;
    rows.push_back(row);
  }
  return rows;
}

std::vector<MetricsRow> EvaluateSystem(const EnhancerModel& model,
                                       const std::string& system_id,
                                       const EncoderAdapter& adapter,
                                       const LayerWeights& weights,
                                       const std::vector<MixtureExample>& eval_set,
                                       const EvalOptions& opts) {
  return EvaluateSystem(
      [&model](const MixtureExample& ex) { return Enhance(model, ex.noisy); },
      system_id, adapter, weights, eval_set, opts);
}

SweepReport SweepAlpha(const Checkpoint& pretrained, const SweepSpec& sweep,
                       const std::vector<MixtureExample>& train,
                       const std::vector<MixtureExample>& dev,
                       const std::vector<MixtureExample>& eval_set,
                       const TrainConfig& finetune_cfg, const LossContext& ctx,
                       const std::string& workdir) {
  if (sweep.alphas.empty()) throw InvalidConfig("sweep: empty alpha grid");
  std::filesystem::create_directories(workdir);

  EvalOptions eopts;
  eopts.betas = {0.0};

  SweepReport report;

  if (!ctx.encoder) throw InvalidConfig("sweep requires an encoder adapter");
  const EncoderAdapter& adapter = *ctx.encoder;

  // Baseline: the pretrained SNR-only model as-is.
  {
    std::vector<MetricsRow> rows = EvaluateSystem(
        pretrained.model, "snr_baseline", adapter, ctx.layer_weights, eval_set,
        eopts);
    for (MetricsRow& r : rows)
      if (r.system != "noisy") report.rows.push_back(r);
      else if (report.rows.empty())
        report.rows.push_back(r);  // keep one noisy row up front
  }

  for (double alpha : sweep.alphas) {
    TrainConfig cfg = finetune_cfg;
    cfg.stage = TrainStage::kFinetune;
    cfg.mt.alpha = alpha;
    TrainResult result = Finetune(pretrained, train, dev, cfg, ctx);

    std::ostringstream name;
    name << "finetune_alpha_" << alpha << ".ckpt";
    const std::string path =
        (std::filesystem::path(workdir) / name.str()).string();
    SaveCheckpoint(result.best, path);
    report.checkpoints.emplace_back(alpha, path);

    std::vector<MetricsRow> rows =
        EvaluateSystem(result.best.model, LossKindName(cfg.loss), adapter,
                       ctx.layer_weights, eval_set, eopts);
    for (MetricsRow& r : rows) {
      if (r.system == "noisy") continue;
      r.alpha = alpha;
      report.rows.push_back(r);
    }
  }
  return report;
}

namespace {

std::string FormatDouble(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json RowToJson(const MetricsRow& r) {
  json j;
  j["system"] = r.system;
  j["beta"] = r.beta.has_value() ? json(*r.beta) : json(nullptr);
  j["alpha"] = r.alpha.has_value() ? json(*r.alpha) : json(nullptr);
  j["si_sdr_db"] = r.si_sdr_db;
  j["sd_snr_db"] = r.sd_snr_db;
  j["ssl_feature_mse"] = r.ssl_feature_mse;
  j["n_utterances"] = r.n_utterances;
  return j;
}

MetricsRow RowFromJson(const json& j) {
  MetricsRow r;
  r.system = j.at("system").get<std::string>();
  if (!j.at("beta").is_null()) r.beta = j.at("beta").get<double>();
  if (!j.at("alpha").is_null()) r.alpha = j.at("alpha").get<double>();
  r.si_sdr_db = j.at("si_sdr_db").get<double>();
  r.sd_snr_db = j.at("sd_snr_db").get<double>();
  r.ssl_feature_mse = j.at("ssl_feature_mse").get<double>();
  r.n_utterances = j.at("n_utterances").get<int>();
  return r;
}

}  // namespace

void EmitReport(const std::vector<MetricsRow>& rows, const std::string& path,
                ReportFormat format) {
  if (rows.empty()) throw EmptyReport("no rows to report");
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot open report for writing: " + path);

  if (format == ReportFormat::kCsv) {
    out << "system,beta,alpha,si_sdr_db,sd_snr_db,ssl_feature_mse,"
           "n_utterances\n";
    for (const MetricsRow& r : rows) {
      out << r.system << ",";
      if (r.beta.has_value()) out << FormatDouble(*r.beta);
      out << ",";
      if (r.alpha.has_value()) out << FormatDouble(*r.alpha);
      out << "," << FormatDouble(r.si_sdr_db) << ","
          << FormatDouble(r.sd_snr_db) << ","
          << FormatDouble(r.ssl_feature_mse) << "," << r.n_utterances << "\n";
    }
  } else {
    json arr = json::array();
    for (const MetricsRow& r : rows) arr.push_back(RowToJson(r));
    out << arr.dump(2) << "\n";
  }
  if (!out) throw IoFailure("failed writing report: " + path);
}

std::vector<MetricsRow> ParseReport(const std::string& path,
                                    ReportFormat format) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open report: " + path);
  std::vector<MetricsRow> rows;

  if (format == ReportFormat::kJson) {
    json arr;
    try {
      in >> arr;
    } catch (const json::exception& e) {
      throw InvalidConfig(std::string("bad report JSON: ") + e.what());
    }
    for (const json& j : arr) rows.push_back(RowFromJson(j));
    return rows;
  }

  std::string line;
  if (!std::getline(in, line)) throw EmptyReport("empty CSV report");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (cells.size() < 7) cells.push_back("");
    MetricsRow r;
    r.system = cells[0];
    if (!cells[1].empty()) r.beta = std::stod(cells[1]);
    if (!cells[2].empty()) r.alpha = std::stod(cells[2]);
    r.si_sdr_db = std::stod(cells[3]);
    r.sd_snr_db = std::stod(cells[4]);
    r.ssl_feature_mse = std::stod(cells[5]);
    r.n_utterances = std::stoi(cells[6]);
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// SVG plots. Minimal hand-rolled line charts; one file per metric and axis.

namespace {

struct Series {
  std::vector<std::pair<double, double>> points;  // x, y
};

constexpr int kWidth = 640, kHeight = 420;
constexpr int kMarginL = 70, kMarginR = 20, kMarginT = 30, kMarginB = 60;

// alpha = 0 sits one slot left of the smallest positive alpha on the log
// axis.
double LogAxisPos(double alpha, double min_pos) {
  return alpha > 0.0 ? std::log10(alpha) : std::log10(min_pos) - 1.0;
}

void WriteSvgChart(const std::string& path, const std::string& title,
                   const std::string& x_label, const Series& series,
                   const std::vector<double>& tick_values,
                   const std::vector<double>& tick_positions) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot open plot file: " + path);

  double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
  for (const auto& [x, y] : series.points) {
    x_lo = std::min(x_lo, x);
    x_hi = std::max(x_hi, x);
    y_lo = std::min(y_lo, y);
    y_hi = std::max(y_hi, y);
  }
  if (x_hi <= x_lo) x_hi = x_lo + 1.0;
  if (y_hi <= y_lo) y_hi = y_lo + 1.0;
  const double y_pad = 0.08 * (y_hi - y_lo);
  y_lo -= y_pad;
  y_hi += y_pad;

  auto px = [&](double x) {
    return kMarginL + (x - x_lo) / (x_hi - x_lo) * (kWidth - kMarginL - kMarginR);
  };
  auto py = [&](double y) {
    return kHeight - kMarginB -
           (y - y_lo) / (y_hi - y_lo) * (kHeight - kMarginT - kMarginB);
  };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"18\" text-anchor=\"middle\" "
         "font-size=\"14\">" << title << "</text>\n";
  // axes
  out << "<line x1=\"" << kMarginL << "\" y1=\"" << kHeight - kMarginB
      << "\" x2=\"" << kWidth - kMarginR << "\" y2=\"" << kHeight - kMarginB
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kMarginL << "\" y1=\"" << kMarginT << "\" x2=\""
      << kMarginL << "\" y2=\"" << kHeight - kMarginB
      << "\" stroke=\"black\"/>\n";

  for (std::size_t i = 0; i < tick_values.size(); ++i) {
    const double x = px(tick_positions[i]);
    out << "<g class=\"xtick\"><line x1=\"" << x << "\" y1=\""
        << kHeight - kMarginB << "\" x2=\"" << x << "\" y2=\""
        << kHeight - kMarginB + 6 << "\" stroke=\"black\"/>"
        << "<text x=\"" << x << "\" y=\"" << kHeight - kMarginB + 22
        << "\" text-anchor=\"middle\" font-size=\"11\">" << tick_values[i]
        << "</text></g>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double yv = y_lo + (y_hi - y_lo) * i / 4.0;
    const double y = py(yv);
    std::ostringstream lbl;
    lbl.precision(4);
    lbl << yv;
    out << "<g class=\"ytick\"><line x1=\"" << kMarginL - 6 << "\" y1=\"" << y
        << "\" x2=\"" << kMarginL << "\" y2=\"" << y
        << "\" stroke=\"black\"/><text x=\"" << kMarginL - 10 << "\" y=\""
        << y + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << lbl.str()
        << "</text></g>\n";
  }
  out << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 16
      << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label
      << "</text>\n";

  out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" "
         "points=\"";
  for (const auto& [x, y] : series.points) out << px(x) << "," << py(y) << " ";
  out << "\"/>\n";
  for (const auto& [x, y] : series.points)
    out << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y)
        << "\" r=\"3\" fill=\"steelblue\"/>\n";
  out << "</svg>\n";
}

double MetricOf(const MetricsRow& r, int which) {
  switch (which) {
    case 0: return r.si_sdr_db;
    case 1: return r.sd_snr_db;
    default: return r.ssl_feature_mse;
  }
}

const char* MetricName(int which) {
  switch (which) {
    case 0: return "si_sdr_db";
    case 1: return "sd_snr_db";
    default: return "ssl_feature_mse";
  }
}

}  // namespace

std::vector<std::string> EmitPlots(const std::vector<MetricsRow>& rows,
                                   const std::string& dir) {
  if (rows.empty()) throw EmptyReport("no rows to plot");
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;

  // alpha-axis charts
  std::vector<const MetricsRow*> alpha_rows;
  for (const MetricsRow& r : rows)
    if (r.alpha.has_value()) alpha_rows.push_back(&r);
  if (!alpha_rows.empty()) {
    std::sort(alpha_rows.begin(), alpha_rows.end(),
              [](const MetricsRow* a, const MetricsRow* b) {
                return *a->alpha < *b->alpha;
              });
    double min_pos = 1e300;
    for (const MetricsRow* r : alpha_rows)
      if (*r->alpha > 0.0) min_pos = std::min(min_pos, *r->alpha);
    if (min_pos == 1e300) min_pos = 1.0;

    std::set<double> distinct;
    for (const MetricsRow* r : alpha_rows) distinct.insert(*r->alpha);
    std::vector<double> tick_vals(distinct.begin(), distinct.end());
    std::vector<double> tick_pos;
    for (double a : tick_vals) tick_pos.push_back(LogAxisPos(a, min_pos));

    for (int metric = 0; metric < 3; ++metric) {
      Series s;
      for (const MetricsRow* r : alpha_rows)
        s.points.emplace_back(LogAxisPos(*r->alpha, min_pos),
                              MetricOf(*r, metric));
      const std::string path =
          (std::filesystem::path(dir) /
           (std::string(MetricName(metric)) + "_vs_alpha.svg"))
              .string();
      WriteSvgChart(path, std::string(MetricName(metric)) + " vs alpha",
                    "alpha (log scale)", s, tick_vals, tick_pos);
      written.push_back(path);
    }
  }

  // beta-axis charts
  std::vector<const MetricsRow*> beta_rows;
  for (const MetricsRow& r : rows)
    if (r.beta.has_value()) beta_rows.push_back(&r);
  if (!beta_rows.empty()) {
    std::sort(beta_rows.begin(), beta_rows.end(),
              [](const MetricsRow* a, const MetricsRow* b) {
                return *a->beta < *b->beta;
              });
    std::set<double> distinct;
    for (const MetricsRow* r : beta_rows) distinct.insert(*r->beta);
    std::vector<double> ticks(distinct.begin(), distinct.end());

    for (int metric = 0; metric < 3; ++metric) {
      Series s;
      for (const MetricsRow* r : beta_rows)
        s.points.emplace_back(*r->beta, MetricOf(*r, metric));
      const std::string path =
          (std::filesystem::path(dir) /
           (std::string(MetricName(metric)) + "_vs_beta.svg"))
              .string();
      WriteSvgChart(path, std::string(MetricName(metric)) + " vs beta",
                    "OA ratio beta", s, ticks, ticks);
      written.push_back(path);
    }
  }
  return written;
}

std::vector<std::pair<std::string, double>> RunExternalScorer(
    const std::string& command,
    const std::vector<std::pair<std::string, std::string>>& ref_est_pairs,
    const std::string& tmp_dir) {
  if (ref_est_pairs.empty()) throw EmptyReport("no pairs for external scorer");
  std::filesystem::create_directories(tmp_dir);
  const std::string pairs_path =
      (std::filesystem::path(tmp_dir) / "scorer_pairs.txt").string();
  {
    std::ofstream out(pairs_path);
    if (!out) throw IoFailure("cannot write scorer pair list");
    for (const auto& [ref, est] : ref_est_pairs) out << ref << "\t" << est << "\n";
  }

  const std::string full = command + " < " + pairs_path;
  FILE* pipe = popen(full.c_str(), "r");
  if (!pipe) throw IoFailure("cannot launch external scorer: " + command);

  std::string output;
  char buf[4096];
  while (std::fgets(buf, sizeof(buf), pipe)) output += buf;
  const int rc = pclose(pipe);
  if (rc != 0) throw IoFailure("external scorer exited with a failure code");

  std::vector<std::pair<std::string, double>> scores;
  std::istringstream is(output);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw IoFailure("external scorer line without a tab: " + line);
    scores.emplace_back(line.substr(0, tab), std::stod(line.substr(tab + 1)));
  }
  return scores;
}

}  // namespace sefx
