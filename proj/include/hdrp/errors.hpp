/* Copyright 2026 The HDRP-SNN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <stdexcept>
#include <string>

namespace hdrp {

// Failure categories. The C API maps each one onto a stable status code.
enum class ErrorKind {
  kShape,       // dimension / broadcast mismatch
  kParameter,   // out-of-domain scalar argument
  kConfig,      // invalid configuration or network spec
  kFormat,      // malformed file contents
  kData,        // invalid dataset contents (e.g. label index)
  kContract,    // caller violated a precondition (e.g. missing trace)
  kNumeric,     // NaN/Inf produced by a kernel
  kIo,          // filesystem failure
  kValidation,  // an oracle or invariant check failed
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define HDRP_DEFINE_ERROR(Name, Kind)                                 \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(Kind, what) {}     \
  };

HDRP_DEFINE_ERROR(ShapeError, ErrorKind::kShape)
HDRP_DEFINE_ERROR(ParameterError, ErrorKind::kParameter)
HDRP_DEFINE_ERROR(ConfigError, ErrorKind::kConfig)
HDRP_DEFINE_ERROR(FormatError, ErrorKind::kFormat)
HDRP_DEFINE_ERROR(DataError, ErrorKind::kData)
HDRP_DEFINE_ERROR(ContractError, ErrorKind::kContract)
HDRP_DEFINE_ERROR(NumericError, ErrorKind::kNumeric)
HDRP_DEFINE_ERROR(IoError, ErrorKind::kIo)
HDRP_DEFINE_ERROR(ValidationError, ErrorKind::kValidation)

#undef HDRP_DEFINE_ERROR

}  // namespace hdrp
