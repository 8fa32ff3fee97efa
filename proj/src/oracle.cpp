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

#include "sepo/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "sepo/errors.hpp"

namespace sepo {

namespace {

using Field = std::function<void(double, std::span<const double>, std::span<double>)>;

std::vector<double> integrate(std::vector<double> v, double t0, double t1, const OdeOptions& opts, const Field& f) {
  if (opts.steps < 1) {
    throw ConfigError("ODE integration needs at least one step");
  }
  const std::size_t d = v.size();
  const double h = (t1 - t0) / opts.steps;
  std::vector<double> k1(d), k2(d), k3(d), k4(d), tmp(d);
  for (int s = 0; s < opts.steps; ++s) {
    const double t = t0 + s * h;
    f(t, v, k1);
    if (opts.integrator == Integrator::euler) {
      for (std::size_t j = 0; j < d; ++j) {
        v[j] += h * k1[j];
      }
      continue;
    }
    for (std::size_t j = 0; j < d; ++j) {
      tmp[j] = v[j] + 0.5 * h * k1[j];
    }
    f(t + 0.5 * h, tmp, k2);
    for (std::size_t j = 0; j < d; ++j) {
      tmp[j] = v[j] + 0.5 * h * k2[j];
    }
    f(t + 0.5 * h, tmp, k3);
    for (std::size_t j = 0; j < d; ++j) {
      tmp[j] = v[j] + h * k3[j];
    }
    f(t + h, tmp, k4);
    for (std::size_t j = 0; j < d; ++j) {
      v[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
  }
  return v;
}

// Integration leaves round-off sized negatives; anything larger means the step was too coarse.
SimplexDist to_simplex(const SequenceSpec& spec, std::vector<double> v) {
  for (double& x : v) {
    if (x < -1e-9) {
      throw StepSizeError("oracle integration produced negative mass; increase the step count");
    }
    x = std::max(x, 0.0);
  }
  return SimplexDist(spec, std::move(v));
}

double clamp_tau(double tau, double horizon) { return std::clamp(tau, 0.0, horizon); }

}  // namespace

void apply_forward_generator(const SequenceSpec& spec, const TokenGenerator& g, const NoiseSchedule& sched, double tau,
                             std::span<const double> p, std::span<double> out) {
  const IndexCodec codec(spec);
  const int n = spec.length();
  const int m = spec.vocab_size();
  const double sigma = sched.rate(tau);
  std::fill(out.begin(), out.end(), 0.0);
  Sequence x(n);
  for (std::uint64_t ix = 0; ix < codec.size(); ++ix) {
    if (p[ix] == 0.0) {
      continue;
    }
    codec.decode_into(ix, x);
    for (int i = 0; i < n; ++i) {
      const auto stride = codec.stride(i);
      for (Token a = 0; a < m; ++a) {
        if (a == x[i]) {
          continue;
        }
        const double flow = sigma * g.rate(a, x[i]) * p[ix];
        out[ix + (static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(x[i])) * stride] += flow;
        out[ix] -= flow;
      }
    }
  }
}

void apply_reverse_generator(const SequenceSpec& spec, const TokenGenerator& g, const NoiseSchedule& sched, double tau,
                             const RatioProvider& ratios, std::span<const double> q, std::span<double> out) {
  const IndexCodec codec(spec);
  const int n = spec.length();
  const int m = spec.vocab_size();
  std::fill(out.begin(), out.end(), 0.0);
  Sequence x(n);
  for (std::uint64_t ix = 0; ix < codec.size(); ++ix) {
    if (q[ix] == 0.0) {
      continue;
    }
    codec.decode_into(ix, x);
    const auto rates = reverse_rates(g, sched, tau, x, ratios(x));
    for (int i = 0; i < n; ++i) {
      const auto stride = codec.stride(i);
      for (Token a = 0; a < m; ++a) {
        if (a == x[i]) {
          continue;
        }
        const double flow = rates.rate(i, a) * q[ix];
        out[ix + (static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(x[i])) * stride] += flow;
        out[ix] -= flow;
      }
    }
  }
}

void apply_reverse_generator(const ScoreModel& score, const TokenGenerator& g, const NoiseSchedule& sched, double tau,
                             std::span<const double> q, std::span<double> out) {
  apply_reverse_generator(
      score.spec(), g, sched, tau, [&score, tau](std::span<const Token> x) { return score.eval(x, tau); }, q, out);
}

SimplexDist exact_forward_marginals(const SimplexDist& p0, const TokenGenerator& g, const NoiseSchedule& sched,
                                    double t, const OdeOptions& opts) {
  const auto& spec = p0.spec();
  spec.require_oracle_size(opts.cap);
  if (t < 0.0 || t > sched.horizon() * (1.0 + 1e-12)) {
    throw DomainError("forward marginal time outside [0, T]");
  }
  std::vector<double> v(p0.probs().begin(), p0.probs().end());
  if (t == 0.0) {
    return p0;
  }
  v = integrate(std::move(v), 0.0, t, opts, [&](double tau, std::span<const double> p, std::span<double> out) {
    apply_forward_generator(spec, g, sched, clamp_tau(tau, sched.horizon()), p, out);
  });
  return to_simplex(spec, std::move(v));
}

NeighborTable exact_ratios(const SimplexDist& p, std::span<const Token> x) {
  const auto& spec = p.spec();
  const IndexCodec codec(spec);
  const auto ix = codec.encode(x);
  const double px = p[ix];
  if (!(px > 0.0)) {
    throw DomainError("exact ratio undefined: p(x) = 0");
  }
  const int m = spec.vocab_size();
  NeighborTable out(Sequence(x.begin(), x.end()), m, 0.0);
  for (int i = 0; i < spec.length(); ++i) {
    const auto stride = codec.stride(i);
    for (Token a = 0; a < m; ++a) {
      if (a != x[i]) {
        out.at(i, a) = p[ix + (static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(x[i])) * stride] / px;
      }
    }
  }
  return out;
}

SimplexDist reference_distribution(const SequenceSpec& spec, const TokenGenerator& g) {
  if (g.kind() == GeneratorKind::absorbing) {
    return SimplexDist::point_mass(spec, Sequence(spec.length(), *spec.vocab().mask));
  }
  return SimplexDist::uniform(spec);
}

SimplexDist exact_policy_dist(const ScoreModel& score, const TokenGenerator& g, const NoiseSchedule& sched, double T0,
                              const OdeOptions& opts) {
  const auto& spec = score.spec();
  spec.require_oracle_size(opts.cap);
  const double T = sched.horizon();
  if (T0 < 0.0 || T0 > T * (1.0 + 1e-12)) {
    throw DomainError("T0 outside [0, T]");
  }
  const auto ref = reference_distribution(spec, g);
  if (T0 == 0.0) {
    return ref;
  }
  std::vector<double> v(ref.probs().begin(), ref.probs().end());
  v = integrate(std::move(v), 0.0, T0, opts, [&](double t, std::span<const double> q, std::span<double> out) {
    apply_reverse_generator(score, g, sched, clamp_tau(T - t, T), q, out);
  });
  return to_simplex(spec, std::move(v));
}

std::vector<double> policy_jacobian_fd(const ScoreModel& score, const TokenGenerator& g, const NoiseSchedule& sched,
                                       double T0, double h, const OdeOptions& opts) {
  if (!(h > 0.0)) {
    throw DomainError("finite-difference step must be positive");
  }
  const auto theta = score.parameters();
  const std::size_t p = theta.size();
  const std::size_t d = score.spec().state_count();
  std::vector<double> jac(d * p, 0.0);
  auto shifted = theta;
  for (std::size_t k = 0; k < p; ++k) {
    if (!std::isfinite(theta[k])) {
      continue;
    }
    shifted[k] = theta[k] + h;
    const auto plus = exact_policy_dist(*score.with_parameters(shifted), g, sched, T0, opts);
    shifted[k] = theta[k] - h;
    const auto minus = exact_policy_dist(*score.with_parameters(shifted), g, sched, T0, opts);
    shifted[k] = theta[k];
    for (std::size_t j = 0; j < d; ++j) {
      jac[j * p + k] = (plus[j] - minus[j]) / (2.0 * h);
    }
  }
  return jac;
}

std::vector<double> exact_loss_gradient_fd(const ScoreModel& score, const RewardFn& reward, const TokenGenerator& g,
                                           const NoiseSchedule& sched, double T0, double h, const OdeOptions& opts) {
  const auto table = reward_table(score.spec(), reward);
  const auto jac = policy_jacobian_fd(score, g, sched, T0, h, opts);
  const std::size_t p = score.parameter_count();
  std::vector<double> grad(p, 0.0);
  for (std::size_t j = 0; j < table.size(); ++j) {
    for (std::size_t k = 0; k < p; ++k) {
      grad[k] -= table[j] * jac[j * p + k];
    }
  }
  return grad;
}

SimplexDist corrector_evolve(const SimplexDist& q, const ScoreModel& score, const TokenGenerator& g,
                             const NoiseSchedule& sched, double tau, double dt) {
  if (!(dt > 0.0)) {
    throw StepSizeError("corrector step must be positive");
  }
  const auto& spec = q.spec();
  spec.require_oracle_size();
  std::vector<double> fwd(q.size()), rev(q.size());
  apply_forward_generator(spec, g, sched, tau, q.probs(), fwd);
  apply_reverse_generator(score, g, sched, tau, q.probs(), rev);
  std::vector<double> out(q.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = q[j] + dt * (fwd[j] + rev[j]);
    if (out[j] < -1e-12) {
      throw StepSizeError("corrector step too large: negative mass");
    }
    out[j] = std::max(out[j], 0.0);
  }
  return SimplexDist(spec, std::move(out));
}

}  // namespace sepo
