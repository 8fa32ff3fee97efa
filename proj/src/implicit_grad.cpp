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

#include "sepo/implicit_grad.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sepo/errors.hpp"

namespace sepo {

namespace {

std::vector<std::size_t> sorted_desc(std::span<const double> z) {
  std::vector<std::size_t> order(z.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&z](std::size_t a, std::size_t b) { return z[a] > z[b]; });
  return order;
}

void require_finite(std::span<const double> z) {
  if (z.empty()) {
    throw DomainError("empty vector");
  }
  for (const double v : z) {
    if (!std::isfinite(v)) {
      throw DomainError("non-finite input");
    }
  }
}

}  // namespace

std::size_t support_size(std::span<const double> z) {
  require_finite(z);
  const auto order = sorted_desc(z);
  double cum = 0.0;
  std::size_t k_h = 1;
  for (std::size_t k = 1; k <= order.size(); ++k) {
    const double zk = z[order[k - 1]];
    cum += zk;
    if (1.0 + static_cast<double>(k) * zk > cum) {
      k_h = k;
    }
  }
  return k_h;
}

SparsemaxResult sparsemax(std::span<const double> z) {
  const std::size_t k = support_size(z);
  const auto order = sorted_desc(z);
  double cum = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    cum += z[order[j]];
  }
  SparsemaxResult out;
  out.tau = (cum - 1.0) / static_cast<double>(k);
  out.projection.resize(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) {
    const double v = z[j] - out.tau;
    out.projection[j] = v > 0.0 ? v : 0.0;
    if (v > 0.0) {
      out.support.push_back(j);
    }
  }
  return out;
}

std::vector<double> sherman_morrison_solve(const RankOneSystem& sys) {
  const std::size_t d = sys.diag.size();
  const std::size_t p = sys.cols;
  if (sys.u.size() != d || sys.v.size() != d || sys.rhs.size() != d * p || p == 0) {
    throw DomainError("rank-one system has inconsistent shapes");
  }
  for (const double m : sys.diag) {
    if (!(std::abs(m) >= 1e-12)) {
      throw SingularityError("diagonal entry below the invertibility floor");
    }
  }
  double denom = 1.0;
  for (std::size_t i = 0; i < d; ++i) {
    denom += sys.v[i] * sys.u[i] / sys.diag[i];
  }
  if (std::abs(denom) < 1e-10) {
    throw SingularityError("Sherman-Morrison denominator vanishes");
  }
  // X = M^-1 R - M^-1 u (v^T M^-1 R) / denom
  std::vector<double> x(d * p);
  std::vector<double> vt_minv_r(p, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t c = 0; c < p; ++c) {
      x[i * p + c] = sys.rhs[i * p + c] / sys.diag[i];
      vt_minv_r[c] += sys.v[i] * x[i * p + c];
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    const double coef = sys.u[i] / sys.diag[i] / denom;
    if (coef == 0.0) {
      continue;
    }
    for (std::size_t c = 0; c < p; ++c) {
      x[i * p + c] -= coef * vt_minv_r[c];
    }
  }
  return x;
}

std::vector<std::size_t> top_support(std::span<const double> pi, std::size_t k) {
  if (k < 1 || k > pi.size()) {
    throw DomainError("support size must lie in [1, d]");
  }
  auto order = sorted_desc(pi);
  order.resize(k);
  return order;
}

RankOneSystem assemble_implicit_system(std::span<const double> pi, std::span<const double> grad_pi,
                                       std::size_t cols, double eta, std::size_t k_h) {
  const std::size_t d = pi.size();
  if (grad_pi.size() != d * cols) {
    throw DomainError("gradient matrix has the wrong shape");
  }
  if (!(eta > 0.0)) {
    throw DomainError("eta must be positive");
  }
  const auto support = top_support(pi, k_h);
  const double k = static_cast<double>(k_h);
  RankOneSystem sys;
  sys.cols = cols;
  sys.diag.assign(d, 1.0);
  sys.u.assign(d, 0.0);
  sys.v.assign(d, 0.0);
  sys.rhs.assign(d * cols, 0.0);
  std::vector<double> mean(cols, 0.0);
  for (const auto i : support) {
    if (!(pi[i] > 0.0)) {
      throw DomainError("implicit system needs positive mass on the support");
    }
    sys.diag[i] = eta / pi[i];
    sys.u[i] = 1.0 / k;
    sys.v[i] = 1.0 - eta / pi[i];
    for (std::size_t c = 0; c < cols; ++c) {
      mean[c] += grad_pi[i * cols + c] / pi[i] / k;
    }
  }
  for (const auto i : support) {
    for (std::size_t c = 0; c < cols; ++c) {
      sys.rhs[i * cols + c] = eta * (grad_pi[i * cols + c] / pi[i] - mean[c]);
    }
  }
  return sys;
}

std::vector<double> weight_vector(std::span<const double> pi, std::size_t k_h) {
  const auto support = top_support(pi, k_h);
  double mass = 0.0;
  for (const auto i : support) {
    mass += pi[i];
  }
  if (!(mass > 0.0)) {
    throw DomainError("support carries no probability mass");
  }
  std::vector<double> z(pi.size(), 0.0);
  for (const auto i : support) {
    z[i] = static_cast<double>(k_h) * pi[i] / mass;
  }
  return z;
}

std::vector<double> corrected_gradient(std::span<const double> pi, std::span<const double> grad_pi, std::size_t cols,
                                       std::size_t k_h) {
  const std::size_t d = pi.size();
  if (grad_pi.size() != d * cols) {
    throw DomainError("gradient matrix has the wrong shape");
  }
  const auto support = top_support(pi, k_h);
  double mass = 0.0;
  std::vector<double> col_sum(cols, 0.0);
  for (const auto i : support) {
    mass += pi[i];
    for (std::size_t c = 0; c < cols; ++c) {
      col_sum[c] += grad_pi[i * cols + c];
    }
  }
  if (!(mass > 0.0)) {
    throw DomainError("support carries no probability mass");
  }
  std::vector<double> x(d * cols, 0.0);
  for (const auto i : support) {
    for (std::size_t c = 0; c < cols; ++c) {
      x[i * cols + c] = grad_pi[i * cols + c] - pi[i] * col_sum[c] / mass;
    }
  }
  return x;
}

std::vector<double> eta_grid() {
  std::vector<double> grid(32);
  for (int i = 0; i < 32; ++i) {
    grid[i] = std::pow(10.0, -6.0 + 6.0 * i / 31.0);
  }
  return grid;
}

std::optional<double> select_eta(std::span<const double> pi, std::size_t target) {
  std::vector<double> shifted(pi.size());
  for (const double eta : eta_grid()) {
    for (std::size_t i = 0; i < pi.size(); ++i) {
      shifted[i] = pi[i] - eta;
    }
    if (support_size(shifted) == target) {
      return eta;
    }
  }
  return std::nullopt;
}

}  // namespace sepo
