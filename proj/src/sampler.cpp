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

#include "sepo/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sepo/errors.hpp"

namespace sepo {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void clamp_prefix(std::span<Token> x, std::span<const Token> prefix) {
  std::copy(prefix.begin(), prefix.end(), x.begin());
}

}  // namespace

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  return Rng(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL)));
}

void SamplerConfig::validate() const {
  if (!(T > 0.0)) {
    throw ConfigError("sampler horizon T must be positive");
  }
  if (!(T0 > 0.0) || T0 > T) {
    throw ConfigError("sampler stopping time must satisfy 0 < T0 <= T");
  }
  if (n_steps < 1) {
    throw ConfigError("sampler needs at least one predictor step");
  }
  if (n_corrector < 0 || corrector_after_T0 < 0) {
    throw ConfigError("corrector iteration counts must be nonnegative");
  }
  if (corrector_dt < 0.0) {
    throw ConfigError("corrector step must be nonnegative");
  }
}

StepKernel::StepKernel(const RateTable& rates, double dt)
    : anchor_(rates.table().anchor()), m_(rates.table().vocab_size()) {
  if (!(dt > 0.0)) {
    throw StepSizeError("step size must be positive");
  }
  const int n = static_cast<int>(anchor_.size());
  probs_.assign(static_cast<std::size_t>(n) * m_, 0.0);
  for (int i = 0; i < n; ++i) {
    double leave = 0.0;
    for (Token a = 0; a < m_; ++a) {
      if (a == anchor_[i]) {
        continue;
      }
      const double p = dt * rates.rate(i, a);
      probs_[static_cast<std::size_t>(i) * m_ + a] = p;
      leave += p;
    }
    double stay = 1.0 - leave;
    if (stay < -1e-12) {
      throw StepSizeError("tau-leap step too large: stay probability " + std::to_string(stay) + " at position " +
                          std::to_string(i));
    }
    probs_[static_cast<std::size_t>(i) * m_ + anchor_[i]] = std::max(stay, 0.0);
  }
}

double StepKernel::transition_prob(std::span<const Token> y) const {
  if (y.size() != anchor_.size()) {
    throw DomainError("transition_prob: length mismatch");
  }
  double p = 1.0;
  for (std::size_t i = 0; i < y.size() && p > 0.0; ++i) {
    p *= prob(static_cast<int>(i), y[i]);
  }
  return p;
}

Sequence StepKernel::sample(Rng& rng, int frozen) const {
  Sequence out = anchor_;
  for (int i = frozen; i < static_cast<int>(out.size()); ++i) {
    const double u = uniform01(rng);
    double acc = 0.0;
    for (Token a = 0; a < m_; ++a) {
      acc += prob(i, a);
      if (u < acc) {
        out[i] = a;
        break;
      }
    }
  }
  return out;
}

StepKernel predictor_kernel(std::span<const Token> x, double t, double dt, const ScoreModel& score,
                            const TokenGenerator& g, const NoiseSchedule& sched) {
  const double tau = std::max(sched.horizon() - t, 0.0);
  return StepKernel(reverse_rates(g, sched, tau, x, score.eval(x, tau)), dt);
}

StepKernel corrector_kernel(std::span<const Token> x, double tau, double dt, const ScoreModel& score,
                            const TokenGenerator& g, const NoiseSchedule& sched) {
  return StepKernel(corrector_rates(g, sched, tau, x, score.eval(x, tau)), dt);
}

Sequence tau_leap_step(std::span<const Token> x, double t, double dt, const ScoreModel& score, const TokenGenerator& g,
                       const NoiseSchedule& sched, Rng& rng) {
  return predictor_kernel(x, t, dt, score, g, sched).sample(rng);
}

Sequence corrector_step(std::span<const Token> x, double t, double dt, const ScoreModel& score,
                        const TokenGenerator& g, const NoiseSchedule& sched, Rng& rng) {
  const double tau = std::max(sched.horizon() - t, 0.0);
  return corrector_kernel(x, tau, dt, score, g, sched).sample(rng);
}

Sequence sample_reference(const SequenceSpec& spec, const TokenGenerator& g, Rng& rng) {
  if (g.kind() == GeneratorKind::absorbing) {
    return Sequence(spec.length(), *spec.vocab().mask);
  }
  Sequence x(spec.length());
  for (auto& tok : x) {
    tok = std::min(static_cast<Token>(uniform01(rng) * spec.vocab_size()), spec.vocab_size() - 1);
  }
  return x;
}

Trajectory sample_trajectory(const SamplerConfig& cfg, const ScoreModel& score, const TokenGenerator& g,
                             const NoiseSchedule& sched, std::span<const Token> prefix, Rng& rng, bool record) {
  cfg.validate();
  const auto& spec = score.spec();
  if (std::abs(cfg.T - sched.horizon()) > 1e-12 * sched.horizon()) {
    throw ConfigError("sampler horizon differs from the noise schedule horizon");
  }
  if (prefix.size() > static_cast<std::size_t>(spec.length())) {
    throw DomainError("prefix longer than the sequence");
  }
  const int frozen = static_cast<int>(prefix.size());
  const double dt = cfg.dt();
  const double dt_c = cfg.corrector_dt > 0.0 ? cfg.corrector_dt : dt;

  Trajectory traj;
  Sequence x = sample_reference(spec, g, rng);
  clamp_prefix(x, prefix);
  if (record) {
    traj.states.reserve(cfg.n_steps + 1);
    traj.times.reserve(cfg.n_steps + 1);
    traj.states.push_back(x);
    traj.times.push_back(0.0);
  }
  for (int k = 0; k < cfg.n_steps; ++k) {
    const double t = k * dt;
    x = predictor_kernel(x, t, dt, score, g, sched).sample(rng, frozen);
    const double t_next = k + 1 == cfg.n_steps ? cfg.T0 : (k + 1) * dt;
    for (int c = 0; c < cfg.n_corrector; ++c) {
      const double tau = std::max(cfg.T - t_next, 0.0);
      x = corrector_kernel(x, tau, dt_c, score, g, sched).sample(rng, frozen);
    }
    if (record) {
      traj.states.push_back(x);
      traj.times.push_back(t_next);
    }
  }
  traj.terminal = x;
  return traj;
}

Sequence gradient_flow_sample(const SamplerConfig& cfg, const ScoreModel& score, const TokenGenerator& g,
                              const NoiseSchedule& sched, Rng& rng, std::span<const Token> prefix) {
  Sequence x = sample_trajectory(cfg, score, g, sched, prefix, rng, false).terminal;
  const double dt_c = cfg.corrector_dt > 0.0 ? cfg.corrector_dt : cfg.dt();
  const double tau = std::max(cfg.T - cfg.T0, 0.0);
  const int frozen = static_cast<int>(prefix.size());
  for (int c = 0; c < cfg.corrector_after_T0; ++c) {
    x = corrector_kernel(x, tau, dt_c, score, g, sched).sample(rng, frozen);
  }
  return x;
}

std::vector<Sequence> sample_batch(const SamplerConfig& cfg, const ScoreModel& score, const TokenGenerator& g,
                                   const NoiseSchedule& sched, int count, bool gradient_flow,
                                   std::span<const Token> prefix) {
  std::vector<Sequence> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    Rng rng = make_stream(cfg.seed, static_cast<std::uint64_t>(k));
    out.push_back(gradient_flow ? gradient_flow_sample(cfg, score, g, sched, rng, prefix)
                                : sample_trajectory(cfg, score, g, sched, prefix, rng, false).terminal);
  }
  return out;
}

}  // namespace sepo
