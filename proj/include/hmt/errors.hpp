// Copyright 2026 The HybridMT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace hmt {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand shapes disagree. Messages carry both shapes.
struct DimensionError : Error {
  using Error::Error;
};

// A precondition on values (not shapes) was violated.
struct ContractError : Error {
  using Error::Error;
};

// Token or row index outside its valid range.
struct IndexError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// NaN or infinity produced by an operation, or a diverged training loss.
struct NumericError : Error {
  using Error::Error;
};

// Unreadable or malformed input files.
struct DataError : Error {
  using Error::Error;
};

struct CheckpointError : DataError {
  using DataError::DataError;
};
struct CheckpointVersionError : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct CheckpointChecksumError : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct CheckpointTruncatedError : CheckpointError {
  using CheckpointError::CheckpointError;
};

}  // namespace hmt
