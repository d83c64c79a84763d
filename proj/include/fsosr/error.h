/*
 * Copyright 2026 The fsosr Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FSOSR_ERROR_H_
#define FSOSR_ERROR_H_

#include <stdexcept>
#include <string>

namespace fsosr {

// Broad failure classes. The CLI maps them onto process exit codes.
enum class ErrorKind {
  kConfig,      // exit 2
  kData,        // exit 3
  kDivergence,  // exit 4
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorKind::kConfig, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what)
      : Error(ErrorKind::kData, what) {}
};

// Raised when an optimization produces a non-finite loss or gradient.
class DivergenceError : public Error {
 public:
  DivergenceError(int step, const std::string& what)
      : Error(ErrorKind::kDivergence, what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

inline int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
      return 2;
    case ErrorKind::kData:
      return 3;
    case ErrorKind::kDivergence:
      return 4;
  }
  return 1;
}

}  // namespace fsosr

#endif  // FSOSR_ERROR_H_
