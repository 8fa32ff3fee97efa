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

#ifndef SEPO_SAMPLER_HPP
#define SEPO_SAMPLER_HPP

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "sepo/ctmc.hpp"
#include "sepo/score.hpp"

/**
 * \file
 * \brief Tau-leaping predictor, corrector and gradient-flow samplers.
 *
 * Samplers run in reverse time t in [0, T0] and evaluate the score and rates at forward
 * time tau = T - t. Rates are frozen at the start of each step, so the last predictor
 * step uses tau = T - T0 + dt.
 */

namespace sepo {

using Rng = std::mt19937_64;

/// Uniform draw in [0, 1) from the top 53 bits of one engine output.
double uniform01(Rng& rng);

/// Independent engine for stream `stream` of a run seeded with `seed`.
Rng make_stream(std::uint64_t seed, std::uint64_t stream);

struct SamplerConfig {
  double T = 1.0;
  double T0 = 1.0;
  int n_steps = 128;
  /// Corrector iterations after every predictor step.
  int n_corrector = 0;
  /// Time-homogeneous corrector iterations at tau = T - T0 once the predictor is done.
  int corrector_after_T0 = 0;
  /// Corrector step in reverse time; 0 reuses the predictor step.
  double corrector_dt = 0.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError unless 0 < T0 <= T, n_steps >= 1 and the counts are nonnegative.
  void validate() const;
  [[nodiscard]] double dt() const { return T0 / n_steps; }
};

struct Trajectory {
  /// states[k] is the state at times[k]; states[0] is the draw from p_ref.
  std::vector<Sequence> states;
  std::vector<double> times;
  Sequence terminal;
};

/**
 * Per-position one-step probabilities delta_{x_i} + dt * rates(i, .), stored n x m.
 *
 * Throws StepSizeError when any stay probability drops below zero.
 */
class StepKernel {
 public:
  StepKernel(const RateTable& rates, double dt);

  [[nodiscard]] const Sequence& anchor() const { return anchor_; }
  [[nodiscard]] double prob(int pos, Token token) const { return probs_[static_cast<std::size_t>(pos) * m_ + token]; }

  /// Probability of landing on `y` (product over positions).
  [[nodiscard]] double transition_prob(std::span<const Token> y) const;

  /// Resamples every position independently; positions below `frozen` keep their tokens.
  [[nodiscard]] Sequence sample(Rng& rng, int frozen = 0) const;

 private:
  Sequence anchor_;
  int m_;
  std::vector<double> probs_;
};

/// Predictor kernel at reverse time t.
StepKernel predictor_kernel(std::span<const Token> x, double t, double dt, const ScoreModel& score,
                            const TokenGenerator& g, const NoiseSchedule& sched);

/// Corrector kernel (forward plus reverse rates) at forward time tau.
StepKernel corrector_kernel(std::span<const Token> x, double tau, double dt, const ScoreModel& score,
                            const TokenGenerator& g, const NoiseSchedule& sched);

/// One tau-leap predictor step at reverse time t.
Sequence tau_leap_step(std::span<const Token> x, double t, double dt, const ScoreModel& score, const TokenGenerator& g,
                       const NoiseSchedule& sched, Rng& rng);

/// One corrector step under Q + Qbar, frozen at reverse time t.
Sequence corrector_step(std::span<const Token> x, double t, double dt, const ScoreModel& score,
                        const TokenGenerator& g, const NoiseSchedule& sched, Rng& rng);

/// A draw from p_ref: uniform tokens, or all-mask for the absorbing kind.
Sequence sample_reference(const SequenceSpec& spec, const TokenGenerator& g, Rng& rng);

/**
 * Predictor (plus optional per-step corrector) trajectory from p_ref to reverse time T0.
 *
 * `prefix` tokens are clamped at every step. With `record` false only the terminal state
 * is kept.
 */
Trajectory sample_trajectory(const SamplerConfig& cfg, const ScoreModel& score, const TokenGenerator& g,
                             const NoiseSchedule& sched, std::span<const Token> prefix, Rng& rng, bool record = true);

/// sample_trajectory followed by cfg.corrector_after_T0 corrector steps at tau = T - T0.
Sequence gradient_flow_sample(const SamplerConfig& cfg, const ScoreModel& score, const TokenGenerator& g,
                              const NoiseSchedule& sched, Rng& rng, std::span<const Token> prefix = {});

/// N terminal samples, sample k drawn from stream k of cfg.seed (runs on the calling thread).
std::vector<Sequence> sample_batch(const SamplerConfig& cfg, const ScoreModel& score, const TokenGenerator& g,
                                   const NoiseSchedule& sched, int count, bool gradient_flow = false,
                                   std::span<const Token> prefix = {});

}  // namespace sepo

#endif  // SEPO_SAMPLER_HPP
