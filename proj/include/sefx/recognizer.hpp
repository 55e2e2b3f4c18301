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

#ifndef SEFX_RECOGNIZER_HPP_
#define SEFX_RECOGNIZER_HPP_

#include <cstdint>
#include <memory>
#include <vector>

#include "sefx/autodiff.hpp"
#include "sefx/lmfb.hpp"
#include "sefx/wave.hpp"

namespace sefx {

// Frozen recognizer boundary used by the ASR loss. Returns a CTC branch and
// a teacher-forced attention cross-entropy branch, both differentiable down
// to the input samples.
class RecognizerAdapter {
 public:
  virtual ~RecognizerAdapter() = default;

  virtual int vocab_size() const = 0;
  virtual bool differentiable() const = 0;

  struct TapeLosses {
    ad::Var ctc;
    ad::Var attention;
  };

  // tokens are symbol ids in [1, vocab-1]; 0 is the CTC blank. Throws
  // VocabularyError for empty or out-of-range targets.
  virtual TapeLosses LossesOnTape(ad::Tape& tape, ad::Var samples,
                                  int sample_rate,
                                  const std::vector<int>& tokens) const = 0;

  // Value-only convenience (builds a private tape).
  std::pair<double, double> Losses(const Waveform& wave,
                                   const std::vector<int>& tokens) const;

  // Greedy CTC decode: per-frame argmax with blank/repeat collapsing.
  virtual std::vector<int> GreedyCtc(const Waveform& wave) const = 0;

  virtual std::uint64_t ParamChecksum() const = 0;
};

// Seeded frozen toy model: LMFB front-end, affine frame encoder, CTC head
// over (vocab-1) symbols plus blank, and a dot-product attention decoder
// with teacher forcing.
std::unique_ptr<RecognizerAdapter> MakeToyRecognizer(
    std::uint64_t seed, int vocab = 9, const LmfbConfig& lmfb = LmfbConfig{});

}  // namespace sefx

#endif  // SEFX_RECOGNIZER_HPP_
