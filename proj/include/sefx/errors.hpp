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

#ifndef SEFX_ERRORS_HPP_
#define SEFX_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace sefx {

// Base of all library errors. The CLI maps categories to exit codes:
// ConfigError -> 2, IoError -> 3, DivergenceError -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

#define SEFX_DEFINE_ERROR(Name, Base)   \
  class Name : public Base {            \
   public:                              \
    using Base::Base;                   \
  }

SEFX_DEFINE_ERROR(ZeroEnergySignal, ConfigError);
SEFX_DEFINE_ERROR(SampleRateMismatch, ConfigError);
SEFX_DEFINE_ERROR(LengthMismatch, ConfigError);
SEFX_DEFINE_ERROR(InputTooShort, ConfigError);
SEFX_DEFINE_ERROR(RatioOutOfRange, ConfigError);
SEFX_DEFINE_ERROR(InvalidScheme, ConfigError);
SEFX_DEFINE_ERROR(IndexOutOfRange, ConfigError);
SEFX_DEFINE_ERROR(InvalidConfig, ConfigError);
SEFX_DEFINE_ERROR(EmptyManifest, ConfigError);
SEFX_DEFINE_ERROR(EmptyDataset, ConfigError);
SEFX_DEFINE_ERROR(EmptyReport, ConfigError);
SEFX_DEFINE_ERROR(VocabularyError, ConfigError);
SEFX_DEFINE_ERROR(UnsupportedModel, ConfigError);
SEFX_DEFINE_ERROR(ContractViolation, ConfigError);
SEFX_DEFINE_ERROR(ZeroReference, ConfigError);
SEFX_DEFINE_ERROR(ZeroEnergyEstimate, ConfigError);

SEFX_DEFINE_ERROR(IoFailure, IoError);
SEFX_DEFINE_ERROR(UnsupportedFormat, IoError);
SEFX_DEFINE_ERROR(CheckpointFormatError, IoError);

SEFX_DEFINE_ERROR(DivergenceDetected, DivergenceError);
SEFX_DEFINE_ERROR(NonFiniteDevLoss, DivergenceError);

#undef SEFX_DEFINE_ERROR

}  // namespace sefx

#endif  // SEFX_ERRORS_HPP_
