// Copyright 2026 The mlsb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace mlsb {

// Every failure surfaced by the library derives from Error. kind() is a
// stable, greppable class name used by the CLI's one-line error output.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define MLSB_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                    \
   public:                                                       \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  }

MLSB_DEFINE_ERROR(ShapeError);
MLSB_DEFINE_ERROR(ValueError);
MLSB_DEFINE_ERROR(TapeError);
MLSB_DEFINE_ERROR(NumericError);
MLSB_DEFINE_ERROR(FormatError);
MLSB_DEFINE_ERROR(VersionError);
MLSB_DEFINE_ERROR(DigestMismatchError);
MLSB_DEFINE_ERROR(ConsistencyError);
MLSB_DEFINE_ERROR(TruncationError);
MLSB_DEFINE_ERROR(IoError);
MLSB_DEFINE_ERROR(ConfigError);
MLSB_DEFINE_ERROR(TrainingDivergedError);
MLSB_DEFINE_ERROR(UndefinedCorrelationError);

#undef MLSB_DEFINE_ERROR

}  // namespace mlsb
