/* Copyright 2026 The CLFD Authors. All Rights Reserved.

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

namespace clfd {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A spatial dimension violates an evenness or size requirement.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Operands disagree in shape or length.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A precondition on arguments or call order was not met.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// A file on disk does not match its expected framing.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Configuration failed validation; `line` is 0 when not tied to a line.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line = 0, const std::string& origin = "")
      : Error(format(what, line, origin)), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& what, int line, const std::string& origin) {
    if (line <= 0) return origin.empty() ? what : origin + ": " + what;
    if (origin.empty()) return "line " + std::to_string(line) + ": " + what;
    return origin + ":" + std::to_string(line) + ": " + what;
  }
  int line_;
};

// Training diverged (non-finite loss).
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace clfd
