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

#ifndef SEPO_ORACLE_HPP
#define SEPO_ORACLE_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sepo/ctmc.hpp"
#include "sepo/rewards.hpp"
#include "sepo/score.hpp"
#include "sepo/state_space.hpp"

/**
 * \file
 * \brief Brute-force ground truth on spaces small enough to enumerate.
 *
 * Everything here works on dense length-d vectors and is limited to d <= oracle cap.
 * The full d x d generators are never materialized; they are applied as matvecs built
 * from the token-factorized rates.
 */

namespace sepo {

enum class Integrator { euler, rk4 };

struct OdeOptions {
  int steps = 512;
  Integrator integrator = Integrator::rk4;
  std::uint64_t cap = kDefaultOracleCap;
};

/// Ratio table for the neighbours of a sequence.
using RatioProvider = std::function<NeighborTable(std::span<const Token> x)>;

/// out = Q_tau p for the full-space forward generator.
void apply_forward_generator(const SequenceSpec& spec, const TokenGenerator& g, const NoiseSchedule& sched, double tau,
                             std::span<const double> p, std::span<double> out);

/// out = Qbar_tau q for the reverse generator assembled from `ratios` (forward time tau).
void apply_reverse_generator(const SequenceSpec& spec, const TokenGenerator& g, const NoiseSchedule& sched, double tau,
                             const RatioProvider& ratios, std::span<const double> q, std::span<double> out);

/// Same, with the ratios taken from a score model.
void apply_reverse_generator(const ScoreModel& score, const TokenGenerator& g, const NoiseSchedule& sched, double tau,
                             std::span<const double> q, std::span<double> out);

/// Law at forward time t of the forward process started from p0, by ODE integration.
SimplexDist exact_forward_marginals(const SimplexDist& p0, const TokenGenerator& g, const NoiseSchedule& sched,
                                    double t, const OdeOptions& opts = {});

/// p(y)/p(x) for every Hamming-1 neighbour y of x. Throws DomainError if p(x) = 0.
NeighborTable exact_ratios(const SimplexDist& p, std::span<const Token> x);

/// Reference distribution of the reverse process: uniform, or all-mask for the absorbing kind.
SimplexDist reference_distribution(const SequenceSpec& spec, const TokenGenerator& g);

/// Law q_{T0} of the reverse process driven by `score`, started from the reference at reverse time 0.
SimplexDist exact_policy_dist(const ScoreModel& score, const TokenGenerator& g, const NoiseSchedule& sched, double T0,
                              const OdeOptions& opts = {});

/// Central-difference gradient of -E_{x ~ q_T0}[R(x)] with respect to the score parameters.
std::vector<double> exact_loss_gradient_fd(const ScoreModel& score, const RewardFn& reward, const TokenGenerator& g,
                                           const NoiseSchedule& sched, double T0, double h = 1e-4,
                                           const OdeOptions& opts = {});

/// Jacobian of q_T0 with respect to the parameters by central differences; row-major d x p.
std::vector<double> policy_jacobian_fd(const ScoreModel& score, const TokenGenerator& g, const NoiseSchedule& sched,
                                       double T0, double h = 1e-4, const OdeOptions& opts = {});

/**
 * One explicit Euler step q + dt (Q_tau + Qbar_tau) q of the corrector dynamics at fixed tau.
 *
 * Throws StepSizeError when dt is large enough to produce negative mass.
 */
SimplexDist corrector_evolve(const SimplexDist& q, const ScoreModel& score, const TokenGenerator& g,
                             const NoiseSchedule& sched, double tau, double dt);

}  // namespace sepo

#endif  // SEPO_ORACLE_HPP
