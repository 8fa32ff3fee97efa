// Copyright 2026 The sepo-cpp Authors
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

#ifndef SEPO_ERRORS_HPP
#define SEPO_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace sepo {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration (maps to CLI exit status 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Dense state space larger than the oracle capacity.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Time arguments given in the wrong order.
class OrderingError : public Error {
 public:
  using Error::Error;
};

/// A tau-leaping step produced a negative probability; the caller must shrink dt.
class StepSizeError : public Error {
 public:
  using Error::Error;
};

/// Two sequences expected to be Hamming-1 neighbours are not.
class AdjacencyError : public Error {
 public:
  using Error::Error;
};

/// Near-singular rank-one system.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Internal bookkeeping is missing something it should have computed earlier.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Not enough data for a statistic (e.g. a trend fit over too few iterations).
class LengthError : public Error {
 public:
  using Error::Error;
};

}  // namespace sepo

#endif  // SEPO_ERRORS_HPP
