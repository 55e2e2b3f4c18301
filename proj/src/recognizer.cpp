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

#include "sefx/recognizer.hpp"

#include <cmath>

#include "sefx/errors.hpp"
#include "sefx/util.hpp"

namespace sefx {

std::pair<double, double> RecognizerAdapter::Losses(
    const Waveform& wave, const std::vector<int>& tokens) const {
  ad::Tape tape;
  ad::Var samples = tape.Leaf(
      Tensor(1, static_cast<int>(wave.size()), wave.samples), false);
  TapeLosses l = LossesOnTape(tape, samples, wave.sample_rate, tokens);
  return {tape.val(l.ctc).v[0], tape.val(l.attention).v[0]};
}

namespace {

constexpr int kBlank = 0;
constexpr int kAttnDim = 16;
constexpr int kHiddenDim = 16;

class ToyRecognizer : public RecognizerAdapter {
 public:
  ToyRecognizer(std::uint64_t seed, int vocab, const LmfbConfig& lmfb)
      : vocab_(vocab), lmfb_(lmfb) {
    if (vocab < 2)
      throw InvalidConfig("toy recognizer needs blank plus >= 1 symbol");
    lmfb_.Validate();
    RandomStream rng(MixSeed(seed, 0xa52));
    auto init = [&rng](int r, int c, double scale) {
      Tensor t(r, c);
      for (double& x : t.v) x = rng.Uniform(-scale, scale);
      return t;
    };
    const double hs = 1.0 / std::sqrt(static_cast<double>(lmfb_.n_mels));
    w_h_ = init(lmfb_.n_mels, kHiddenDim, hs);
    b_h_ = init(1, kHiddenDim, 0.1);
    const double ks = 1.0 / std::sqrt(static_cast<double>(kHiddenDim));
    w_ctc_ = init(kHiddenDim, vocab, ks);
    b_ctc_ = init(1, vocab, 0.1);
    w_key_ = init(kHiddenDim, kAttnDim, ks);
    w_val_ = init(kHiddenDim, kAttnDim, ks);
    // Rows: BOS followed by one query embedding per symbol id.
    embed_ = init(vocab + 1, kAttnDim, 0.5);
    const double os = 1.0 / std::sqrt(static_cast<double>(kAttnDim));
    w_out_ = init(kAttnDim, vocab, os);
    b_out_ = init(1, vocab, 0.1);
  }

  int vocab_size() const override { return vocab_; }
  bool differentiable() const override { return true; }

  TapeLosses LossesOnTape(ad::Tape& tape, ad::Var samples, int sample_rate,
                          const std::vector<int>& tokens) const override {
    if (tokens.empty())
      throw VocabularyError("recognizer target sequence is empty");
    for (int tok : tokens)
      if (tok <= 0 || tok >= vocab_)
        throw VocabularyError("recognizer target token out of vocabulary");

    ad::Var feats = LmfbOnTape(tape, samples, sample_rate, lmfb_);  // [F,mel]
    ad::Var h = ad::Tanh(
        tape, ad::AddBias(tape, ad::MatMul(tape, feats, tape.Leaf(w_h_, false)),
                          tape.Leaf(b_h_, false)));  // [F,H]

    // CTC branch.
    ad::Var logits_ctc =
        ad::AddBias(tape, ad::MatMul(tape, h, tape.Leaf(w_ctc_, false)),
                    tape.Leaf(b_ctc_, false));  // [F,V]
    ad::Var ctc = ad::CtcLoss(tape, logits_ctc, tokens, kBlank);

    // Attention branch with teacher forcing: the query for position u is
    // the embedding of the previous target token (BOS at u = 0).
    const int u = static_cast<int>(tokens.size());
    Tensor queries(u, kAttnDim);
    for (int i = 0; i < u; ++i) {
      const int prev = i == 0 ? 0 : tokens[i - 1] + 1;  // row 0 is BOS
      for (int d = 0; d < kAttnDim; ++d)
        queries.at(i, d) = embed_.at(prev, d);
    }
    ad::Var q = tape.Leaf(std::move(queries), false);
    ad::Var keys = ad::MatMul(tape, h, tape.Leaf(w_key_, false));    // [F,A]
    ad::Var values = ad::MatMul(tape, h, tape.Leaf(w_val_, false));  // [F,A]
    ad::Var scores = ad::Scale(tape, ad::MatMulNT(tape, q, keys),
                               1.0 / std::sqrt(double(kAttnDim)));  // [U,F]
    ad::Var attn = ad::SoftmaxRows(tape, scores);
    ad::Var context = ad::MatMul(tape, attn, values);  // [U,A]
    ad::Var logits_att =
        ad::AddBias(tape, ad::MatMul(tape, context, tape.Leaf(w_out_, false)),
                    tape.Leaf(b_out_, false));  // [U,V]
    ad::Var att =
        ad::NllRows(tape, ad::LogSoftmaxRows(tape, logits_att), tokens);

    return TapeLosses{ctc, att};
  }

  std::vector<int> GreedyCtc(const Waveform& wave) const override {
    ad::Tape tape;
    ad::Var samples = tape.Leaf(
        Tensor(1, static_cast<int>(wave.size()), wave.samples), false);
    ad::Var feats = LmfbOnTape(tape, samples, wave.sample_rate, lmfb_);
    ad::Var h = ad::Tanh(
        tape, ad::AddBias(tape, ad::MatMul(tape, feats, tape.Leaf(w_h_, false)),
                          tape.Leaf(b_h_, false)));
    ad::Var logits =
        ad::AddBias(tape, ad::MatMul(tape, h, tape.Leaf(w_ctc_, false)),
                    tape.Leaf(b_ctc_, false));
    const Tensor& lg = tape.val(logits);
    std::vector<int> out;
    int prev = kBlank;
    for (int f = 0; f < lg.rows; ++f) {
      int best = 0;
      for (int c = 1; c < lg.cols; ++c)
        if (lg.at(f, c) > lg.at(f, best)) best = c;
      if (best != kBlank && best != prev) out.push_back(best);
      prev = best;
    }
    return out;
  }

  std::uint64_t ParamChecksum() const override {
    std::uint64_t h = 1469598103934665603ull;
    for (const Tensor* t : {&w_h_, &b_h_, &w_ctc_, &b_ctc_, &w_key_, &w_val_,
                            &embed_, &w_out_, &b_out_})
      h = Fnv1a64(t->v, h);
    return h;
  }

 private:
  int vocab_;
  LmfbConfig lmfb_;
  Tensor w_h_, b_h_;
  Tensor w_ctc_, b_ctc_;
  Tensor w_key_, w_val_, embed_, w_out_, b_out_;
};

}  // namespace

std::unique_ptr<RecognizerAdapter> MakeToyRecognizer(std::uint64_t seed,
                                                     int vocab,
                                                     const LmfbConfig& lmfb) {
  return std::make_unique<ToyRecognizer>(seed, vocab, lmfb);
}

}  // namespace sefx
