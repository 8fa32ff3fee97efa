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

#ifndef SEPO_SCORE_HPP
#define SEPO_SCORE_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sepo/ctmc.hpp"
#include "sepo/state_space.hpp"

namespace sepo {

/// Sparse parameter-gradient vector, (index, value) pairs.
struct SparseGradient {
  std::vector<std::pair<std::size_t, double>> entries;

  [[nodiscard]] std::vector<double> to_dense(std::size_t size) const;
};

/**
 * A concrete-score model s(x, tau)_y ~ p_tau(y) / p_tau(x) with differentiable parameters.
 *
 * `tau` is forward time. Implementations are immutable after construction and safe to
 * read from several threads.
 */
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;

  [[nodiscard]] virtual const SequenceSpec& spec() const = 0;
  [[nodiscard]] virtual double horizon() const = 0;

  /// Ratios for every Hamming-1 neighbour of `x`; excluded transitions read as 0.
  [[nodiscard]] virtual NeighborTable eval(std::span<const Token> x, double tau) const = 0;

  /// s(x, tau)_y. Tabular models only answer for Hamming-1 neighbours.
  [[nodiscard]] virtual double ratio(std::span<const Token> x, std::span<const Token> y, double tau) const;

  /// True when `ratio` and `accumulate_grad_log` accept any y != x, not only neighbours.
  [[nodiscard]] virtual bool full_support() const { return false; }

  /// False for transitions the model pins to zero (their log-score carries no gradient).
  [[nodiscard]] virtual bool is_free(std::span<const Token> x, std::span<const Token> y, double tau) const;

  [[nodiscard]] virtual std::size_t parameter_count() const = 0;
  [[nodiscard]] virtual std::vector<double> parameters() const = 0;
  [[nodiscard]] virtual std::unique_ptr<ScoreModel> with_parameters(std::span<const double> params) const = 0;
  [[nodiscard]] virtual std::unique_ptr<ScoreModel> clone() const = 0;

  /// out += coeff * grad_theta log s(x, tau)_y.
  virtual void accumulate_grad_log(std::span<const Token> x, std::span<const Token> y, double tau, double coeff,
                                   std::span<double> out) const = 0;
};

/**
 * Tabular log-score parameters indexed by (time bucket, position, current token, proposed token).
 *
 * Entries for transitions the generator forbids in reverse (everything except unmasking,
 * for the absorbing kind) hold -inf and never receive gradient.
 */
class ScoreParams final : public ScoreModel {
 public:
  struct Layout {
    int buckets = 16;
    bool shared_positions = false;
  };

  ScoreParams(SequenceSpec spec, GeneratorKind kind, double horizon, Layout layout);
  ScoreParams(SequenceSpec spec, GeneratorKind kind, double horizon) : ScoreParams(std::move(spec), kind, horizon, Layout{}) {}

  [[nodiscard]] const SequenceSpec& spec() const override { return spec_; }
  [[nodiscard]] double horizon() const override { return horizon_; }
  [[nodiscard]] GeneratorKind kind() const { return kind_; }
  [[nodiscard]] const Layout& layout() const { return layout_; }

  [[nodiscard]] int bucket(double tau) const;
  [[nodiscard]] std::size_t index(int bucket, int pos, Token current, Token proposed) const;
  /// Whether (current -> proposed) is a learnable reverse transition for this generator kind.
  [[nodiscard]] bool allowed(Token current, Token proposed) const;

  [[nodiscard]] double log_value(int bucket, int pos, Token current, Token proposed) const {
    return table_[index(bucket, pos, current, proposed)];
  }
  void set_log_value(int bucket, int pos, Token current, Token proposed, double value);

  [[nodiscard]] std::span<const double> table() const { return table_; }

  [[nodiscard]] NeighborTable eval(std::span<const Token> x, double tau) const override;
  [[nodiscard]] bool is_free(std::span<const Token> x, std::span<const Token> y, double tau) const override;
  [[nodiscard]] std::size_t parameter_count() const override { return table_.size(); }
  [[nodiscard]] std::vector<double> parameters() const override { return table_; }
  [[nodiscard]] std::unique_ptr<ScoreModel> with_parameters(std::span<const double> params) const override;
  [[nodiscard]] std::unique_ptr<ScoreModel> clone() const override { return std::make_unique<ScoreParams>(*this); }
  void accumulate_grad_log(std::span<const Token> x, std::span<const Token> y, double tau, double coeff,
                           std::span<double> out) const override;

  /// Adds `step[k]` to every free entry (sentinels stay pinned).
  void apply_update(std::span<const double> step);

  /// 64-bit FNV-1a hash of the raw table bits; used to detect parameter changes.
  [[nodiscard]] std::uint64_t content_hash() const;

  /// Text checkpoint: one header line plus one hex-float per entry. Round trips bit-exactly.
  void save(std::ostream& out, std::uint64_t schedule_fingerprint) const;
  static ScoreParams load(std::istream& in, std::uint64_t* schedule_fingerprint = nullptr);
  void save_file(const std::string& path, std::uint64_t schedule_fingerprint) const;
  static ScoreParams load_file(const std::string& path, std::uint64_t* schedule_fingerprint = nullptr);

  friend bool operator==(const ScoreParams& a, const ScoreParams& b);

 private:
  SequenceSpec spec_;
  GeneratorKind kind_;
  double horizon_;
  Layout layout_;
  std::vector<double> table_;
};

/// exp(table[bucket(tau), i, x_i, a]) for every neighbour; throws DomainError for tau outside [0, T].
NeighborTable eval_score(const ScoreParams& params, std::span<const Token> x, double tau);

/// One-hot gradient of log s(x, tau)_y; throws AdjacencyError unless y is a Hamming-1 neighbour.
SparseGradient grad_log_score(const ScoreParams& params, std::span<const Token> x, double tau,
                              std::span<const Token> y);

/**
 * Exact ("teacher") concrete score of a forward process started from p0 = softmax(logits).
 *
 * s(x, tau)_y = p_tau(y) / p_tau(x) for every pair x != y, with p_tau the exact forward
 * marginal. The parameters are the data logits, so the score is the exact ratio of its own
 * reverse-process marginals for every parameter value. Oracle-sized spaces only.
 */
class TeacherScore final : public ScoreModel {
 public:
  TeacherScore(TokenGenerator generator, NoiseSchedule schedule, SequenceSpec spec, std::vector<double> logits,
               std::uint64_t cap = kDefaultOracleCap);

  [[nodiscard]] const SequenceSpec& spec() const override { return spec_; }
  [[nodiscard]] double horizon() const override { return schedule_.horizon(); }
  [[nodiscard]] const TokenGenerator& generator() const { return generator_; }
  [[nodiscard]] const NoiseSchedule& schedule() const { return schedule_; }

  /// Exact forward marginal p_tau.
  [[nodiscard]] SimplexDist marginal(double tau) const;
  [[nodiscard]] SimplexDist data_distribution() const { return SimplexDist(spec_, p0_); }

  [[nodiscard]] NeighborTable eval(std::span<const Token> x, double tau) const override;
  [[nodiscard]] double ratio(std::span<const Token> x, std::span<const Token> y, double tau) const override;
  [[nodiscard]] bool full_support() const override { return true; }
  [[nodiscard]] bool is_free(std::span<const Token>, std::span<const Token>, double) const override { return true; }
  [[nodiscard]] std::size_t parameter_count() const override { return logits_.size(); }
  [[nodiscard]] std::vector<double> parameters() const override { return logits_; }
  [[nodiscard]] std::unique_ptr<ScoreModel> with_parameters(std::span<const double> params) const override;
  [[nodiscard]] std::unique_ptr<ScoreModel> clone() const override;
  void accumulate_grad_log(std::span<const Token> x, std::span<const Token> y, double tau, double coeff,
                           std::span<double> out) const override;

 private:
  std::shared_ptr<const std::vector<double>> marginal_cached(double tau) const;
  double kernel_product(const TokenMatrix& kernel, std::span<const Token> target, std::uint64_t source) const;

  TokenGenerator generator_;
  NoiseSchedule schedule_;
  SequenceSpec spec_;
  IndexCodec codec_;
  std::vector<double> logits_;
  std::vector<double> p0_;

  struct MarginalCache {
    std::mutex mutex;
    std::map<double, std::shared_ptr<const std::vector<double>>> entries;
  };
  // Shared between copies, which always hold the same logits.
  std::shared_ptr<MarginalCache> cache_ = std::make_shared<MarginalCache>();
};

/// Teacher score for a given data distribution (zero-probability states get -inf logits).
TeacherScore teacher_score(const TokenGenerator& g, const NoiseSchedule& sched, const SimplexDist& p0);

}  // namespace sepo

#endif  // SEPO_SCORE_HPP
