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

#ifndef SEPO_STATE_SPACE_HPP
#define SEPO_STATE_SPACE_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "sepo/ctmc.hpp"

namespace sepo {

/// Bijection between sequences and [0, m^n); position 0 is the most significant digit.
class IndexCodec {
 public:
  explicit IndexCodec(SequenceSpec spec);

  [[nodiscard]] const SequenceSpec& spec() const { return spec_; }
  [[nodiscard]] std::uint64_t size() const { return size_; }

  [[nodiscard]] std::uint64_t encode(std::span<const Token> x) const;
  [[nodiscard]] Sequence decode(std::uint64_t index) const;
  void decode_into(std::uint64_t index, std::span<Token> out) const;

  /// Stride of position `pos` in the index, m^(n-1-pos).
  [[nodiscard]] std::uint64_t stride(int pos) const { return strides_[pos]; }

 private:
  SequenceSpec spec_;
  std::uint64_t size_ = 0;
  std::vector<std::uint64_t> strides_;
};

/// Dense probability vector over the whole sequence space (oracle-sized spaces only).
class SimplexDist {
 public:
  /// Validates: entries nonnegative and summing to one within `tol`.
  SimplexDist(SequenceSpec spec, std::vector<double> probs, double tol = 1e-9);

  static SimplexDist uniform(const SequenceSpec& spec);
  static SimplexDist point_mass(const SequenceSpec& spec, std::span<const Token> x);
  /// Normalizes nonnegative weights; throws DomainError if they sum to zero.
  static SimplexDist from_weights(const SequenceSpec& spec, std::vector<double> weights);
  /// Softmax of logits (entries may be -inf).
  static SimplexDist from_logits(const SequenceSpec& spec, std::span<const double> logits);

  [[nodiscard]] const SequenceSpec& spec() const { return spec_; }
  [[nodiscard]] std::span<const double> probs() const { return probs_; }
  [[nodiscard]] std::size_t size() const { return probs_.size(); }
  [[nodiscard]] double operator[](std::size_t i) const { return probs_[i]; }
  [[nodiscard]] double prob(std::span<const Token> x) const;

 private:
  SequenceSpec spec_;
  std::vector<double> probs_;
};

/// Applies the same token kernel independently at every position: the law of x_tau given law of x_0.
std::vector<double> propagate_factorized(const SequenceSpec& spec, std::span<const double> probs,
                                         const TokenMatrix& kernel);

double total_variation(std::span<const double> p, std::span<const double> q);

/// KL(p || q); +inf when p puts mass where q has none.
double kl_divergence(std::span<const double> p, std::span<const double> q);

}  // namespace sepo

#endif  // SEPO_STATE_SPACE_HPP
