// Copyright 2026 The sqt Authors.
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

#ifndef SQT_ERROR_H_
#define SQT_ERROR_H_

#include <stdexcept>
#include <string>

namespace sqt {

// Error taxonomy used across the library.  Each class corresponds to one
// failure family so callers (and tests) can distinguish a bad shape from a
// bad file without parsing messages.

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor extents do not line up for the requested operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value (non-positive stride, bad probability, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Caller handed in data that violates an input precondition.
class InputError : public Error {
 public:
  using Error::Error;
};

// Object is in the wrong state for the call (backward twice, infer before
// any statistics were accumulated, ...).
class StateError : public Error {
 public:
  using Error::Error;
};

// API misuse that is independent of data values.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Non-finite values showed up where finite arithmetic was required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Serialized data failed validation (bad magic, short file, index overflow).
class CorruptionError : public Error {
 public:
  using Error::Error;
};

}  // namespace sqt

#endif  // SQT_ERROR_H_
