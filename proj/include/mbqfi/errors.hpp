// Copyright 2026 The mbqfi Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace mbqfi {

/// Raised when a dense operation would exceed the configured site limit.
class CapacityError : public std::length_error {
 public:
  CapacityError(int requested, int limit)
      : std::length_error("requested " + std::to_string(requested) +
                          " sites exceeds the dense limit of " +
                          std::to_string(limit)),
        requested_(requested),
        limit_(limit) {}
  CapacityError(const std::string& what, int requested, int limit)
      : std::length_error(what), requested_(requested), limit_(limit) {}

  int requested() const noexcept { return requested_; }
  int limit() const noexcept { return limit_; }

 private:
  int requested_;
  int limit_;
};

/// A closed form was evaluated outside the range where it holds.
class DomainError : public std::domain_error {
  using std::domain_error::domain_error;
};

/// The probe has no energy spread to work with (E_m == E_M, zero variance).
class DegenerateProbeError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Requested combination of operators and probe is not covered.
class UnsupportedConfiguration : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical integration drifted beyond its accuracy gate.
class AccuracyError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Not enough independent samples to fit a model.
class SamplingError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mbqfi
