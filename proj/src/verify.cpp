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

#include "sepo/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <fmt/format.h>

#include "sepo/errors.hpp"
#include "sepo/estimators.hpp"
#include "sepo/implicit_grad.hpp"
#include "sepo/oracle.hpp"
#include "sepo/sampler.hpp"

namespace sepo {

namespace {

std::vector<double> random_simplex(std::size_t d, Rng& rng, double floor = 0.05) {
  std::vector<double> w(d);
  for (auto& v : w) {
    v = floor + uniform01(rng);
  }
  double s = 0.0;
  for (const double v : w) {
    s += v;
  }
  for (auto& v : w) {
    v /= s;
  }
  return w;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (const double x : v) {
    m = std::max(m, std::abs(x));
  }
  return m;
}

CheckResult check(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
  try {
    auto [pass, detail] = body();
    return {name, pass, detail};
  } catch (const std::exception& e) {
    return {name, false, std::string("threw: ") + e.what()};
  }
}

}  // namespace

std::vector<CheckResult> run_oracle_suite(unsigned long long seed) {
  std::vector<CheckResult> out;
  Rng rng = make_stream(seed, 0);

  out.push_back(check("codec round trip", [] {
    const SequenceSpec spec(3, Vocab::make(3));
    const IndexCodec codec(spec);
    for (std::uint64_t k = 0; k < codec.size(); ++k) {
      if (codec.encode(codec.decode(k)) != k) {
        return std::pair{false, fmt::format("index {}", k)};
      }
    }
    return std::pair{true, std::string("27 states")};
  }));

  out.push_back(check("generator column sums", [] {
    double worst = 0.0;
    for (const auto kind : {GeneratorKind::uniform, GeneratorKind::absorbing}) {
      const auto g = build_generator(kind, Vocab::make(4, 3));
      for (int c = 0; c < 4; ++c) {
        double s = 0.0;
        for (int r = 0; r < 4; ++r) {
          s += g.base()(r, c);
        }
        worst = std::max(worst, std::abs(s));
      }
    }
    return std::pair{worst < 1e-12, fmt::format("max |col sum| = {:.2e}", worst)};
  }));

  out.push_back(check("forward marginal closed form", [] {
    const SequenceSpec spec(1, Vocab::make(2));
    const auto g = build_generator(GeneratorKind::uniform, spec.vocab());
    // A constant unit rate makes the elapsed noise equal to t.
    const NoiseSchedule sched(ScheduleKind::linear, 1.0, 1.0, 2.0);
    const auto p0 = SimplexDist::point_mass(spec, Sequence{0});
    double worst = 0.0;
    for (const double t : {0.1, 0.5, 1.0, 2.0}) {
      const auto pt = exact_forward_marginals(p0, g, sched, t);
      worst = std::max(worst, std::abs(pt[0] - 0.5 * (1.0 + std::exp(-t))));
      worst = std::max(worst, std::abs(pt[1] - 0.5 * (1.0 - std::exp(-t))));
    }
    return std::pair{worst < 1e-6, fmt::format("max error {:.2e}", worst)};
  }));

  out.push_back(check("Chapman-Kolmogorov", [&rng] {
    const auto sched = NoiseSchedule::standard();
    double worst = 0.0;
    for (const auto kind : {GeneratorKind::uniform, GeneratorKind::absorbing}) {
      const auto g = build_generator(kind, Vocab::make(3, 2));
      for (int rep = 0; rep < 8; ++rep) {
        double a = uniform01(rng), b = uniform01(rng), c = uniform01(rng);
        if (a > b) std::swap(a, b);
        if (b > c) std::swap(b, c);
        if (a > b) std::swap(a, b);
        const auto lhs = transition_kernel(g, sched, b, c) * transition_kernel(g, sched, a, b);
        const auto rhs = transition_kernel(g, sched, a, c);
        for (int i = 0; i < 3; ++i) {
          for (int j = 0; j < 3; ++j) {
            worst = std::max(worst, std::abs(lhs(i, j) - rhs(i, j)));
          }
        }
      }
    }
    return std::pair{worst < 1e-10, fmt::format("max deviation {:.2e}", worst)};
  }));

  out.push_back(check("time-reversal stationarity", [&rng] {
    const auto sched = NoiseSchedule::standard();
    double worst = 0.0;
    for (const auto kind : {GeneratorKind::uniform, GeneratorKind::absorbing}) {
      const SequenceSpec spec(3, Vocab::make(3, 2));
      const auto g = build_generator(kind, spec.vocab());
      const SimplexDist p0(spec, random_simplex(spec.state_count(), rng));
      const auto teacher = teacher_score(g, sched, p0);
      for (int rep = 0; rep < 4; ++rep) {
        const double tau = 0.05 + 0.9 * uniform01(rng);
        const auto pt = teacher.marginal(tau);
        std::vector<double> a(pt.size()), b(pt.size());
        apply_forward_generator(spec, g, sched, tau, pt.probs(), a);
        apply_reverse_generator(
            spec, g, sched, tau, [&pt](std::span<const Token> x) { return exact_ratios(pt, x); }, pt.probs(), b);
        for (std::size_t k = 0; k < a.size(); ++k) {
          worst = std::max(worst, std::abs(a[k] + b[k]));
        }
      }
    }
    return std::pair{worst < 1e-8, fmt::format("max |(Q + Qbar) p| = {:.2e}", worst)};
  }));

  out.push_back(check("teacher reverse round trip", [&rng] {
    const SequenceSpec spec(2, Vocab::make(2));
    const auto g = build_generator(GeneratorKind::uniform, spec.vocab());
    const NoiseSchedule sched(ScheduleKind::linear, 0.001, 40.0, 1.0);
    const SimplexDist p0(spec, random_simplex(spec.state_count(), rng));
    const auto teacher = teacher_score(g, sched, p0);
    const auto q = exact_policy_dist(teacher, g, sched, 1.0);
    const double tv = total_variation(q.probs(), p0.probs());
    return std::pair{tv < 1e-4, fmt::format("TV = {:.2e}", tv)};
  }));

  out.push_back(check("corrector KL monotone", [&rng] {
    const SequenceSpec spec(2, Vocab::make(3));
    const auto g = build_generator(GeneratorKind::uniform, spec.vocab());
    const auto sched = NoiseSchedule::standard();
    const SimplexDist p0(spec, random_simplex(spec.state_count(), rng));
    const auto teacher = teacher_score(g, sched, p0);
    const double tau = 0.5;
    const auto target = teacher.marginal(tau);
    SimplexDist q(spec, random_simplex(spec.state_count(), rng));
    double prev = kl_divergence(q.probs(), target.probs());
    for (int step = 0; step < 50; ++step) {
      q = corrector_evolve(q, teacher, g, sched, tau, 0.05);
      const double kl = kl_divergence(q.probs(), target.probs());
      if (kl > prev + 1e-14) {
        return std::pair{false, fmt::format("KL rose at step {}", step)};
      }
      prev = kl;
    }
    return std::pair{true, fmt::format("final KL {:.2e}", prev)};
  }));

  out.push_back(check("SNIS harmonic identity", [&rng] {
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      std::vector<double> c(1 + rep % 16);
      double inv = 0.0;
      for (auto& v : c) {
        v = 0.01 + uniform01(rng);
        inv += 1.0 / v;
      }
      const double ref = static_cast<double>(c.size()) / inv;
      worst = std::max(worst, std::abs(snis_marginal(c).value - ref) / ref);
    }
    return std::pair{worst < 1e-14, fmt::format("max rel error {:.2e}", worst)};
  }));

  out.push_back(check("sparsemax fixed points", [&rng] {
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      const auto p = random_simplex(8, rng);
      std::vector<double> shifted(p);
      const double eta = uniform01(rng);
      for (auto& v : shifted) {
        v -= eta;
      }
      const auto proj = sparsemax(shifted);
      for (std::size_t k = 0; k < p.size(); ++k) {
        worst = std::max(worst, std::abs(proj.projection[k] - p[k]));
      }
    }
    return std::pair{worst < 1e-12, fmt::format("max deviation {:.2e}", worst)};
  }));

  out.push_back(check("corrected gradient solves the implicit system", [&rng] {
    const std::size_t d = 8, p = 3;
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      const auto pi = random_simplex(d, rng);
      std::vector<double> grad(d * p);
      for (auto& v : grad) {
        v = uniform01(rng) - 0.5;
      }
      const std::size_t k = 1 + rep % d;
      const auto sys = assemble_implicit_system(pi, grad, p, 0.01, k);
      const auto a = sherman_morrison_solve(sys);
      const auto b = corrected_gradient(pi, grad, p, k);
      for (std::size_t j = 0; j < a.size(); ++j) {
        worst = std::max(worst, std::abs(a[j] - b[j]));
      }
    }
    return std::pair{worst < 1e-8, fmt::format("max deviation {:.2e}", worst)};
  }));

  out.push_back(check("path KL nonnegative", [&rng] {
    double worst = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
      const double a = 5.0 * uniform01(rng), b = 5.0 * uniform01(rng);
      worst = std::min(worst, path_kl_integrand(a, b));
    }
    return std::pair{worst >= 0.0, fmt::format("min integrand {:.2e}", worst)};
  }));

  out.push_back(check("constant reward has zero loss gradient", [&rng] {
    const SequenceSpec spec(2, Vocab::make(2));
    const auto g = build_generator(GeneratorKind::uniform, spec.vocab());
    const auto sched = NoiseSchedule::standard();
    const auto teacher = teacher_score(g, sched, SimplexDist(spec, random_simplex(4, rng)));
    const auto grad = exact_loss_gradient_fd(teacher, constant_reward(3.0), g, sched, 0.8, 1e-4, {128});
    const double m = max_abs(grad);
    return std::pair{m < 1e-6, fmt::format("max |grad| = {:.2e}", m)};
  }));

  return out;
}

}  // namespace sepo
