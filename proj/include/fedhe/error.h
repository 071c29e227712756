// Copyright 2026 The FedHe Simulator Authors
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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace fedhe {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor / vector shapes that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Malformed binary input (IDX files). Carries the byte offset where parsing
// stopped making sense.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Operation called on an object in the wrong state: stale forward trace,
// double finalize, combined step before any server logits arrived.
class StateError : public Error {
 public:
  using Error::Error;
};

// Invalid argument to a protocol or accounting routine.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Experiment configuration that fails validation. `field` names the offending
// key so the CLI can report it.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& constraint)
      : Error(field + ": " + constraint), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace fedhe
