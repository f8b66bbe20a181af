// Copyright 2026 The llearn Authors
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

#ifndef LLEARN_ERRORS_HPP_
#define LLEARN_ERRORS_HPP_

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace llearn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension mismatches, empty batches, out-of-range times.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class TrainingDivergence : public Error {
 public:
  TrainingDivergence(const std::string& what, long batch_index)
      : Error(what + " (batch " + std::to_string(batch_index) + ")"),
        batch_index_(batch_index) {}
  long batch_index() const { return batch_index_; }

 private:
  long batch_index_;
};

class SingularInertia : public Error {
 public:
  using Error::Error;
};

class SimulationBlowUp : public Error {
 public:
  SimulationBlowUp(const std::string& what, long step)
      : Error(what + " at step " + std::to_string(step)), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

class GimbalProximity : public Error {
 public:
  using Error::Error;
};

// Carries every problem found, not just the first.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string out = "invalid configuration:";
    for (const auto& s : p) out += "\n  - " + s;
    return out;
  }
  std::vector<std::string> problems_;
};

class SchemaError : public Error {
 public:
  SchemaError(std::string column, const std::string& what)
      : Error("column '" + column + "': " + what), column_(std::move(column)) {}
  const std::string& column() const { return column_; }

 private:
  std::string column_;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidInput(what);
}

}  // namespace llearn

#endif  // LLEARN_ERRORS_HPP_
