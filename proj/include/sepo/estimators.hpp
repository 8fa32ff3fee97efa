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

#ifndef SEPO_ESTIMATORS_HPP
#define SEPO_ESTIMATORS_HPP

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "sepo/ctmc.hpp"
#include "sepo/rewards.hpp"
#include "sepo/sampler.hpp"
#include "sepo/score.hpp"
#include "sepo/state_space.hpp"

namespace sepo {

// ---------------------------------------------------------------------------------------------
// Self-normalized importance sampling of policy marginals

struct SnisEstimate {
  double value = 0.0;
  int M = 0;
  std::vector<double> conditionals;
};

/// Harmonic mean of the conditionals. Throws DomainError on an empty or nonpositive input.
SnisEstimate snis_marginal(std::span<const double> conditionals);

struct SnisOptions {
  int M = 4;
  /// Expected jumps at the busiest position of y: dt = step / max_i exit_i(y).
  double step = 0.25;
  int max_retries = 64;
};

/**
 * Proposals z_i ~ K(. | y) for the marginal at y, with K one tau-leap step of the corrector
 * generator Q + Qbar at forward time tau.
 *
 * `kernel_from_y[i]` is K(z_i | y) and `conditionals[i]` is K(y | z_i), both under the
 * score that drew them.
 */
struct SnisProposals {
  Sequence y;
  double tau = 0.0;
  double dt = 0.0;
  std::vector<Sequence> z;
  std::vector<double> kernel_from_y;
  std::vector<double> conditionals;
};

/**
 * Corrector-kernel step used for proposals around y at forward time tau.
 *
 * Scaled by the largest per-position exit rate at y so that the kernel stays valid as the
 * learned rates grow during fine-tuning.
 */
double snis_step_size(std::span<const Token> y, double tau, const ScoreModel& score, const TokenGenerator& g,
                      const NoiseSchedule& sched, const SnisOptions& opts);

/// Draws M proposals. A zero conditional triggers a redraw, up to `max_retries` times in total.
SnisProposals draw_snis_proposals(std::span<const Token> y, double tau, const ScoreModel& score,
                                  const TokenGenerator& g, const NoiseSchedule& sched, const SnisOptions& opts,
                                  Rng& rng);

/// Single "proposal" at the sample itself: the estimate reduces to the one-step conditional K(y | x).
SnisProposals single_sample_proposal(std::span<const Token> y, std::span<const Token> x, double tau,
                                     const ScoreModel& score, const TokenGenerator& g, const NoiseSchedule& sched,
                                     const SnisOptions& opts);

/**
 * Marginal estimate at y under `score`, reusing proposals drawn under another score:
 *   sum_i a_i / sum_i (a_i / K(y | z_i)),  a_i = K(z_i | y) / K_draw(z_i | y).
 * With the drawing score this is the harmonic mean of the stored conditionals.
 */
double reweighted_marginal(const SnisProposals& proposals, const ScoreModel& score, const TokenGenerator& g,
                           const NoiseSchedule& sched);

// ---------------------------------------------------------------------------------------------
// Rollout batches

struct NeighborTerm {
  Sequence y;
  /// Marginal estimate under the sampling (old) parameters.
  double q_old = 0.0;
  /// Marginal estimate under the current parameters.
  double q_hat = 0.0;
  SnisProposals proposals;
  bool has_proposals = false;
};

enum class MarginalMode { snis, single_sample, exact };

struct RolloutBatch {
  std::vector<Sequence> samples;
  std::vector<double> rewards;
  std::vector<double> advantages;
  /// 1 for samples excluded from the surrogate (degenerate GRPO groups).
  std::vector<char> skip;
  /// Frozen parameters that produced the samples.
  std::shared_ptr<const ScoreModel> old_score;
  /// Forward time at which scores are evaluated, T - T0.
  double tau = 0.0;
  /// Per-sample neighbour terms; empty until a populate call.
  std::vector<std::vector<NeighborTerm>> terms;

  [[nodiscard]] std::size_t size() const { return samples.size(); }
  /// Throws StateError unless every per-sample array has one entry per sample.
  void validate(bool need_terms = true) const;
};

/// The y != x summed over: every state when `full` and the score supports it, else the free Hamming-1 neighbours.
std::vector<Sequence> neighborhood(std::span<const Token> x, const ScoreModel& score, double tau, bool full);

/// Fills batch.terms with SNIS (or single-sample) estimates under batch.old_score; q_hat = q_old.
void populate_marginals(RolloutBatch& batch, const TokenGenerator& g, const NoiseSchedule& sched, MarginalMode mode,
                        const SnisOptions& opts, std::uint64_t seed, bool full_neighborhood = false);

/// Fills batch.terms with exact marginals of `policy` (oracle-sized spaces).
void populate_exact_marginals(RolloutBatch& batch, const SimplexDist& policy, bool full_neighborhood);

/// Recomputes q_hat under `score` from the cached proposals (exact terms are left alone).
void refresh_marginals(RolloutBatch& batch, const ScoreModel& score, const TokenGenerator& g,
                       const NoiseSchedule& sched);

// ---------------------------------------------------------------------------------------------
// Gradient estimators

/// mean_x R(x) sum_y q_hat(y) grad log s(x, tau)_y.
std::vector<double> reinforce_gradient(const RolloutBatch& batch, const ScoreModel& score);

/// Per-sample terms of reinforce_gradient, row-major N x p (for standard errors).
std::vector<double> reinforce_terms(const RolloutBatch& batch, const ScoreModel& score);

enum class IsForm { as_printed, single_factor };

/**
 * (q_new(y) / q_old(y)) * (s_old(x)_y / s_new(x)_y); the single-factor form drops the
 * marginal quotient. Throws DomainError on a nonpositive input.
 */
double is_ratio(std::span<const Token> x, std::span<const Token> y, const ScoreModel& score_new,
                const ScoreModel& score_old, double snis_new_y, double snis_old_y, double tau,
                IsForm form = IsForm::as_printed);

/// mean_x R(x) sum_y q_hat(y) u_{x,y} grad log s(x, tau)_y, with x drawn from the old policy.
std::vector<double> is_gradient(const RolloutBatch& batch, const ScoreModel& score, IsForm form = IsForm::as_printed);
std::vector<double> is_terms(const RolloutBatch& batch, const ScoreModel& score, IsForm form = IsForm::as_printed);

/// min(clip(u, 1 - eps, 1 + eps) A, u A).
double clipped_weight_ppo(double u, double A, double eps);

struct GroupAdvantages {
  std::vector<double> values;
  bool degenerate = false;
};

/// (r - mean) / std with the population std; a zero-std group gets zeros and the degenerate flag.
GroupAdvantages grpo_advantages(std::span<const double> rewards);

/// Exponential-moving-average scalar baseline for PPO advantages.
class EmaBaseline {
 public:
  explicit EmaBaseline(double decay = 0.99) : decay_(decay) {}
  /// Advantages r - b against the current baseline, then folds the batch mean into it.
  std::vector<double> advantages(std::span<const double> rewards);
  [[nodiscard]] double value() const { return value_; }
  [[nodiscard]] bool initialized() const { return initialized_; }

 private:
  double decay_;
  double value_ = 0.0;
  bool initialized_ = false;
};

enum class Variant { ppo, grpo };

struct SurrogateResult {
  double loss = 0.0;
  std::vector<double> gradient;
  /// Fraction of (x, y) terms with |u - 1| > eps.
  double clip_fraction = 0.0;
  std::size_t terms = 0;
};

/**
 * Clipped surrogate: mean_x sum_y w_{x,y} log s_new(x, tau)_y with
 * w = q_hat(y) * min(clip(u) A, u A) held constant. Minimizing it ascends the reward.
 */
SurrogateResult surrogate_loss(const RolloutBatch& batch, const ScoreModel& score_new, double eps, Variant variant,
                               IsForm form = IsForm::as_printed);

// ---------------------------------------------------------------------------------------------
// Path KL and first variations

struct PathKl {
  double value = 0.0;
  bool infinite = false;
};

/// Bregman integrand a - b + b log(b / a) for pre rate a and current rate b.
double path_kl_integrand(double rate_pre, double rate);

/**
 * Discretized path KL between the reverse processes of `score` and `score_pre` along the
 * trajectories: mean over trajectories of sum_k dt_k sum_y integrand at x_{t_k}, tau = T - t_k.
 */
PathKl path_kl(const ScoreModel& score, const ScoreModel& score_pre, std::span<const Trajectory> trajectories,
               const TokenGenerator& g, const NoiseSchedule& sched);

/// Gradient of path_kl with respect to the parameters of `score` (trajectories held fixed).
std::vector<double> path_kl_gradient(const ScoreModel& score, const ScoreModel& score_pre,
                                     std::span<const Trajectory> trajectories, const TokenGenerator& g,
                                     const NoiseSchedule& sched);

enum class Functional { expected_reward, kl_vs_ref };

/**
 * First variation f of a functional at p.
 * expected_reward: f(x) = R(x). kl_vs_ref: f(x) = log(p(x) / q(x)) + 1 (-inf where p(x) = 0).
 */
std::vector<double> first_variation(Functional functional, const SimplexDist& p, const RewardFn* reward,
                                    const SimplexDist* ref);

}  // namespace sepo

#endif  // SEPO_ESTIMATORS_HPP
