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

#ifndef SEPO_IMPLICIT_GRAD_HPP
#define SEPO_IMPLICIT_GRAD_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

/**
 * \file
 * \brief Implicit differentiation of the sparsemax fixed point behind gradient-flow fine-tuning.
 *
 * Matrices are dense, row-major, with `cols` columns.
 */

namespace sepo {

struct SparsemaxResult {
  std::vector<double> projection;
  /// Indices with positive projection, ascending.
  std::vector<std::size_t> support;
  double tau = 0.0;
};

/// Euclidean projection onto the probability simplex.
SparsemaxResult sparsemax(std::span<const double> z);

/// max{k : 1 + k z_(k) > sum_{j<=k} z_(j)} over the coordinates sorted in decreasing order.
std::size_t support_size(std::span<const double> z);

/// (diag + u v^T) X = rhs with rhs of shape d x cols.
struct RankOneSystem {
  std::vector<double> diag;
  std::vector<double> u;
  std::vector<double> v;
  std::vector<double> rhs;
  std::size_t cols = 1;
};

/// Closed-form solve. Throws SingularityError when |1 + v^T diag^-1 u| < 1e-10 or a diagonal entry is below 1e-12.
std::vector<double> sherman_morrison_solve(const RankOneSystem& sys);

/// Indices of the k largest entries of pi (ties by index), in decreasing order of pi.
std::vector<std::size_t> top_support(std::span<const double> pi, std::size_t k);

/**
 * The fixed-point system A X = B at pi for step eta, written as (-A) X = -B so that -A is a
 * positive diagonal plus a rank-one term:
 *   diag = eta / pi on the support, 1 elsewhere;  u = 1_S / k;  v = 1_S - eta / pi on S;
 *   rhs  = eta D (grad_pi / pi),  D = diag(1_S) - 1_S 1_S^T / k.
 */
RankOneSystem assemble_implicit_system(std::span<const double> pi, std::span<const double> grad_pi,
                                       std::size_t cols, double eta, std::size_t k_h);

/// z_i = k pi_i / sum_S pi on the top-k support, 0 elsewhere (in original state order).
std::vector<double> weight_vector(std::span<const double> pi, std::size_t k_h);

/**
 * Solution of the implicit system on the top-k_h support of pi:
 *   X_S = G_S - pi_S (1^T G_S) / sum_S pi,  X = 0 off the support.
 * It does not depend on eta. Throws DomainError when the support carries no mass.
 */
std::vector<double> corrected_gradient(std::span<const double> pi, std::span<const double> grad_pi, std::size_t cols,
                                       std::size_t k_h);

/// Log-spaced grid of 32 step sizes in [1e-6, 1].
std::vector<double> eta_grid();

/// Smallest grid eta with support_size(pi - eta 1) == target, if any.
std::optional<double> select_eta(std::span<const double> pi, std::size_t target);

}  // namespace sepo

#endif  // SEPO_IMPLICIT_GRAD_HPP
