/* Copyright 2026 The ladapt Authors. All Rights Reserved.

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

#ifndef LADAPT_ERRORS_HPP_
#define LADAPT_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace ladapt {

/// Base class for all errors thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Tensor rank or dimension mismatch. Messages name the operation and the
/// offending extents.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A computation produced (or was handed) a NaN or infinity.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Attempt to differentiate through an operation whose gradient is not
/// itself differentiable (outside the double-backprop subset).
class UnsupportedOpError : public Error {
 public:
  using Error::Error;
};

/// Tensor-file I/O failure, with a machine-checkable failure kind.
class IoError : public Error {
 public:
  enum class Kind {
    kOpenFailed,
    kBadMagic,
    kBadVersion,
    kTruncatedHeader,
    kTruncatedPayload,
    kBadShape,
  };

  IoError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Invalid configuration (CLI flags, config files, hyperparameters).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ladapt

#endif  // LADAPT_ERRORS_HPP_
