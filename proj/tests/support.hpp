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

#ifndef SEPO_TESTS_SUPPORT_HPP
#define SEPO_TESTS_SUPPORT_HPP

// Independent reference implementations shared by the unit tests and the acceptance run.
// Nothing here calls into the library code it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "sepo/ctmc.hpp"

namespace sepo::testing {

inline std::vector<double> random_simplex(std::size_t d, std::mt19937_64& rng, double floor = 0.05) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(d);
  double s = 0.0;
  for (auto& v : w) {
    v = floor + u(rng);
    s += v;
  }
  for (auto& v : w) {
    v /= s;
  }
  return w;
}

// Euclidean projection onto the simplex by bisection on the threshold of the KKT system.
inline std::vector<double> simplex_projection_qp(std::span<const double> z) {
  double lo = *std::min_element(z.begin(), z.end()) - 1.0;
  double hi = *std::max_element(z.begin(), z.end());
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    double mass = 0.0;
    for (const double v : z) {
      mass += std::max(v - mid, 0.0);
    }
    (mass > 1.0 ? lo : hi) = mid;
  }
  const double tau = 0.5 * (lo + hi);
  std::vector<double> p(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::max(z[i] - tau, 0.0);
  }
  return p;
}

// Least-squares slope of y against x.
inline double ls_slope(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

// Toy data for the fine-tuning runs: even positions lean to token 0, odd ones to token 1,
// each with probability one half; otherwise one of the remaining tokens uniformly.
inline std::vector<Sequence> alternating_dataset(int n, int m, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> other(0, m - 2);
  std::vector<Sequence> data;
  data.reserve(count);
  for (int k = 0; k < count; ++k) {
    Sequence x(n);
    for (int i = 0; i < n; ++i) {
      const Token want = i % 2 == 0 ? 0 : 1;
      if (u(rng) < 0.5) {
        x[i] = want;
      } else {
        const int o = other(rng);
        x[i] = o >= want ? o + 1 : o;
      }
    }
    data.push_back(std::move(x));
  }
  return data;
}

}  // namespace sepo::testing

#endif  // SEPO_TESTS_SUPPORT_HPP
