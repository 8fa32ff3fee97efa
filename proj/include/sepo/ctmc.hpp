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

#ifndef SEPO_CTMC_HPP
#define SEPO_CTMC_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

/**
 * \file
 * \brief Token-level rate generators, noise schedules and reverse-rate assembly.
 *
 * Conventions used throughout the library:
 *  - Generators follow the column convention: entry (target, source) is the rate of
 *    jumping from `source` to `target`, every column sums to zero and dp/dt = Q p.
 *  - Sequence-level rates are token-factorized: positions are noised independently and
 *    only Hamming-1 moves have non-zero rate.
 *  - Every function in this header takes *forward* (noising) time `tau`. The samplers
 *    work in reverse time `t` and evaluate forward quantities at `tau = T - t`.
 */

namespace sepo {

using Token = int;
using Sequence = std::vector<Token>;

inline constexpr std::uint64_t kDefaultOracleCap = 4096;

/// Token alphabet of size m, optionally reserving one index as the absorbing mask.
struct Vocab {
  int size = 2;
  std::optional<Token> mask;

  /// Validating constructor; throws ConfigError on m < 2 or mask out of range.
  static Vocab make(int size, std::optional<Token> mask = std::nullopt);

  [[nodiscard]] bool is_mask(Token a) const { return mask && *mask == a; }
};

/// Length-n sequences over a vocabulary; the state space has d = m^n elements.
class SequenceSpec {
 public:
  SequenceSpec() = default;
  SequenceSpec(int length, Vocab vocab);

  [[nodiscard]] int length() const { return length_; }
  [[nodiscard]] const Vocab& vocab() const { return vocab_; }
  [[nodiscard]] int vocab_size() const { return vocab_.size; }

  /// Number of states m^n. Throws CapacityError if it does not fit in 63 bits.
  [[nodiscard]] std::uint64_t state_count() const;

  /// Throws CapacityError when m^n exceeds `cap`.
  void require_oracle_size(std::uint64_t cap = kDefaultOracleCap) const;

  /// Throws DomainError unless `x` has length n and tokens in [0, m).
  void validate(std::span<const Token> x) const;

  friend bool operator==(const SequenceSpec&, const SequenceSpec&) = default;

 private:
  int length_ = 1;
  Vocab vocab_{};
};

inline bool operator==(const Vocab& a, const Vocab& b) { return a.size == b.size && a.mask == b.mask; }

enum class ScheduleKind { linear, geometric };

/**
 * Scalar noise rate sigma(tau) on [0, T] together with its closed-form integral.
 *
 * linear:    sigma(tau) = sigma_min + (sigma_max - sigma_min) tau / T
 * geometric: sigma(tau) = sigma_min^(1 - tau/T) * sigma_max^(tau/T)
 */
class NoiseSchedule {
 public:
  NoiseSchedule() = default;
  NoiseSchedule(ScheduleKind kind, double sigma_min, double sigma_max, double horizon);

  /// Defaults: linear, sigma_min = 0.001, sigma_max = 5, T = 1.
  static NoiseSchedule standard() { return {ScheduleKind::linear, 0.001, 5.0, 1.0}; }

  [[nodiscard]] double rate(double tau) const;
  [[nodiscard]] double cumulative(double tau) const;
  [[nodiscard]] double horizon() const { return horizon_; }
  [[nodiscard]] ScheduleKind kind() const { return kind_; }
  [[nodiscard]] double sigma_min() const { return sigma_min_; }
  [[nodiscard]] double sigma_max() const { return sigma_max_; }

  /// Stable 64-bit fingerprint of the schedule parameters (used in checkpoint headers).
  [[nodiscard]] std::uint64_t fingerprint() const;

 private:
  ScheduleKind kind_ = ScheduleKind::linear;
  double sigma_min_ = 0.001;
  double sigma_max_ = 5.0;
  double horizon_ = 1.0;
};

/// Small dense m x m matrix indexed (target, source).
class TokenMatrix {
 public:
  TokenMatrix() = default;
  explicit TokenMatrix(int m, double fill = 0.0) : m_(m), data_(static_cast<std::size_t>(m) * m, fill) {}

  [[nodiscard]] int size() const { return m_; }
  double& operator()(int target, int source) { return data_[static_cast<std::size_t>(target) * m_ + source]; }
  double operator()(int target, int source) const { return data_[static_cast<std::size_t>(target) * m_ + source]; }

  [[nodiscard]] TokenMatrix operator*(const TokenMatrix& rhs) const;

 private:
  int m_ = 0;
  std::vector<double> data_;
};

enum class GeneratorKind { uniform, absorbing };

/// Per-token base generator; the rate at time tau is sigma(tau) * base.
class TokenGenerator {
 public:
  [[nodiscard]] GeneratorKind kind() const { return kind_; }
  [[nodiscard]] const Vocab& vocab() const { return vocab_; }
  [[nodiscard]] const TokenMatrix& base() const { return base_; }

  /// Unscaled forward rate from `source` to `target` (target != source).
  [[nodiscard]] double rate(Token target, Token source) const { return base_(target, source); }

  friend TokenGenerator build_generator(GeneratorKind kind, const Vocab& vocab);

 private:
  GeneratorKind kind_ = GeneratorKind::uniform;
  Vocab vocab_{};
  TokenMatrix base_;
};

/**
 * Builds the base generator.
 *
 * uniform:   off-diagonal 1/m, diagonal -(m-1)/m.
 * absorbing: every non-mask token jumps to the mask at unit rate; the mask column is zero.
 *
 * Throws ConfigError for the absorbing kind without a mask index.
 */
TokenGenerator build_generator(GeneratorKind kind, const Vocab& vocab);

/// Closed-form kernel P(token at tau_end = target | token at tau_start = source).
TokenMatrix transition_kernel(const TokenGenerator& g, const NoiseSchedule& sched, double tau_start,
                              double tau_end);

/**
 * Values attached to the Hamming-1 neighbours of an anchor sequence.
 *
 * Stored as an n x m table; the entry at (i, x_i) is unused and kept at zero. A zero
 * entry elsewhere marks a transition excluded from the model (e.g. masked-diffusion
 * transitions other than unmasking).
 */
class NeighborTable {
 public:
  NeighborTable() = default;
  NeighborTable(Sequence anchor, int vocab_size, double tau);

  [[nodiscard]] const Sequence& anchor() const { return anchor_; }
  [[nodiscard]] double time() const { return tau_; }
  [[nodiscard]] int length() const { return static_cast<int>(anchor_.size()); }
  [[nodiscard]] int vocab_size() const { return m_; }

  double& at(int pos, Token token) { return values_[static_cast<std::size_t>(pos) * m_ + token]; }
  [[nodiscard]] double at(int pos, Token token) const { return values_[static_cast<std::size_t>(pos) * m_ + token]; }

  [[nodiscard]] std::span<const double> values() const { return values_; }

 private:
  Sequence anchor_;
  int m_ = 0;
  double tau_ = 0.0;
  std::vector<double> values_;
};

/// Jump rates out of one sequence, one per Hamming-1 neighbour.
class RateTable {
 public:
  explicit RateTable(NeighborTable rates) : rates_(std::move(rates)) {}

  [[nodiscard]] double rate(int pos, Token token) const { return rates_.at(pos, token); }
  [[nodiscard]] const NeighborTable& table() const { return rates_; }

  /// Total rate of leaving position `pos`.
  [[nodiscard]] double exit_rate(int pos) const;
  /// Total rate of leaving the anchor sequence.
  [[nodiscard]] double exit_rate() const;
  /// Diagonal generator entry, minus the total exit rate.
  [[nodiscard]] double diagonal() const { return -exit_rate(); }

 private:
  NeighborTable rates_;
};

/// Forward rates sigma(tau) * base(y_i, x_i) out of `x`.
RateTable forward_rates(const TokenGenerator& g, const NoiseSchedule& sched, double tau, std::span<const Token> x);

/**
 * Reverse rates out of `x`: the jump x -> y (y_i = a) has rate
 * ratios(i, a) * sigma(tau) * base(x_i, a), i.e. the ratio times the forward rate of y -> x.
 *
 * Throws DomainError on a negative ratio.
 */
RateTable reverse_rates(const TokenGenerator& g, const NoiseSchedule& sched, double tau, std::span<const Token> x,
                        const NeighborTable& ratios);

/// Forward plus reverse rates: the time-homogeneous corrector generator at fixed tau.
RateTable corrector_rates(const TokenGenerator& g, const NoiseSchedule& sched, double tau, std::span<const Token> x,
                          const NeighborTable& ratios);

/// Hamming distance; both sequences must have equal length.
int hamming_distance(std::span<const Token> a, std::span<const Token> b);

/// Position where two Hamming-1 neighbours differ; throws AdjacencyError otherwise.
int differing_position(std::span<const Token> x, std::span<const Token> y);

}  // namespace sepo

#endif  // SEPO_CTMC_HPP
