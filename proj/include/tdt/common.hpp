// Copyright 2026 The TDT Authors
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

namespace tdt {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameters or missing inputs required by a configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// API misuse (e.g. non-scalar loss passed to backward).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Bad user data: out-of-range ids, over-long sequences.
class InputError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint or data file could not be parsed.
class LoadError : public Error {
 public:
  using Error::Error;
};

}  // namespace tdt
