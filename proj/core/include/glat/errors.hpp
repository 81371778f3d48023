/*
 * Copyright 2026 The GL-AT Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace glat {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration values (class counts, rates, window sizes, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// API misuse: backward on a non-scalar, Adam step without gradients, ...
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Incompatible tensor or signal shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Files that cannot be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed container data (RIFF header, checkpoint index, manifest line).
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

/// Well-formed data in an encoding we do not decode.
class UnsupportedError : public IoError {
 public:
  using IoError::IoError;
};

/// NaN or Inf produced during a computation.
class NumericalFault : public Error {
 public:
  using Error::Error;
};

}  // namespace glat
