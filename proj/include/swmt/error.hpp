/*
 * Copyright 2026 The swmt Authors.
 *
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

#pragma once

#include <stdexcept>
#include <string>

namespace swmt {

/// Failure categories. The CLI maps these onto its stable exit codes.
enum class ErrorKind {
  dimension,
  zero_frequency,
  parse,
  io,
  config,
  divergence,
  version,
  corruption,
  mismatch,
  numeric,
  invalid_argument,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::zero_frequency: return "zero-frequency";
    case ErrorKind::parse: return "parse";
    case ErrorKind::io: return "io";
    case ErrorKind::config: return "config";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::version: return "version";
    case ErrorKind::corruption: return "corruption";
    case ErrorKind::mismatch: return "mismatch";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::invalid_argument: return "invalid-argument";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require_dims(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    fail(ErrorKind::dimension, std::string(what) + ": expected " +
                                   std::to_string(want) + ", got " +
                                   std::to_string(got));
  }
}

}  // namespace swmt
