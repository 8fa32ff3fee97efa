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

#include "sepo/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sepo/errors.hpp"

namespace sepo {

namespace {

void require_params(const ScoreModel& a, const ScoreModel& b) {
  if (a.parameter_count() != b.parameter_count() || !(a.spec() == b.spec())) {
    throw DomainError("score models have different shapes");
  }
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// SNIS

SnisEstimate snis_marginal(std::span<const double> conditionals) {
  if (conditionals.empty()) {
    throw DomainError("SNIS needs at least one conditional");
  }
  double inv_sum = 0.0;
  for (const double c : conditionals) {
    if (!(c > 0.0)) {
      throw DomainError("SNIS conditional must be positive");
    }
    inv_sum += 1.0 / c;
  }
  SnisEstimate est;
  est.M = static_cast<int>(conditionals.size());
  est.value = 1.0 / (inv_sum / est.M);
  est.conditionals.assign(conditionals.begin(), conditionals.end());
  return est;
}

double snis_step_size(std::span<const Token> y, double tau, const ScoreModel& score, const TokenGenerator& g,
                      const NoiseSchedule& sched, const SnisOptions& opts) {
  if (!(opts.step > 0.0)) {
    throw ConfigError("SNIS step must be positive");
  }
  const auto rates = corrector_rates(g, sched, tau, y, score.eval(y, tau));
  double busiest = 0.0;
  for (int i = 0; i < static_cast<int>(y.size()); ++i) {
    busiest = std::max(busiest, rates.exit_rate(i));
  }
  if (!(busiest > 0.0)) {
    throw DomainError("SNIS proposals need a positive exit rate at y");
  }
  return opts.step / busiest;
}

namespace {

// A neighbour z can be busier than y; halve the step until every kernel is valid.
constexpr int kMaxHalvings = 16;

}  // namespace

SnisProposals draw_snis_proposals(std::span<const Token> y, double tau, const ScoreModel& score,
                                  const TokenGenerator& g, const NoiseSchedule& sched, const SnisOptions& opts,
                                  Rng& rng) {
  if (opts.M < 1) {
    throw ConfigError("SNIS needs M >= 1");
  }
  double dt = snis_step_size(y, tau, score, g, sched, opts);
  for (int halving = 0;; ++halving, dt *= 0.5) {
    SnisProposals out;
    out.y.assign(y.begin(), y.end());
    out.tau = tau;
    out.dt = dt;
    try {
      const auto from_y = corrector_kernel(y, tau, out.dt, score, g, sched);
      int retries = 0;
      while (static_cast<int>(out.z.size()) < opts.M) {
        Sequence z = from_y.sample(rng);
        const double cond = corrector_kernel(z, tau, out.dt, score, g, sched).transition_prob(y);
        if (!(cond > 0.0)) {
          if (++retries > opts.max_retries) {
            throw DomainError("SNIS proposals keep producing zero conditionals");
          }
          continue;
        }
        out.kernel_from_y.push_back(from_y.transition_prob(z));
        out.conditionals.push_back(cond);
        out.z.push_back(std::move(z));
      }
      return out;
    } catch (const StepSizeError&) {
      if (halving >= kMaxHalvings) {
        throw;
      }
    }
  }
}

SnisProposals single_sample_proposal(std::span<const Token> y, std::span<const Token> x, double tau,
                                     const ScoreModel& score, const TokenGenerator& g, const NoiseSchedule& sched,
                                     const SnisOptions& opts) {
  SnisProposals out;
  out.y.assign(y.begin(), y.end());
  out.tau = tau;
  out.dt = snis_step_size(y, tau, score, g, sched, opts);
  double from_y = 0.0;
  double cond = 0.0;
  for (int halving = 0;; ++halving, out.dt *= 0.5) {
    try {
      from_y = corrector_kernel(y, tau, out.dt, score, g, sched).transition_prob(x);
      cond = corrector_kernel(x, tau, out.dt, score, g, sched).transition_prob(y);
      break;
    } catch (const StepSizeError&) {
      if (halving >= kMaxHalvings) {
        throw;
      }
    }
  }
  if (!(from_y > 0.0) || !(cond > 0.0)) {
    throw DomainError("single-sample marginal has a zero one-step probability");
  }
  out.z.emplace_back(x.begin(), x.end());
  out.kernel_from_y.push_back(from_y);
  out.conditionals.push_back(cond);
  return out;
}

double reweighted_marginal(const SnisProposals& proposals, const ScoreModel& score, const TokenGenerator& g,
                           const NoiseSchedule& sched) {
  if (proposals.z.empty()) {
    throw StateError("no SNIS proposals cached");
  }
  const auto from_y = corrector_kernel(proposals.y, proposals.tau, proposals.dt, score, g, sched);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < proposals.z.size(); ++i) {
    const double a = from_y.transition_prob(proposals.z[i]) / proposals.kernel_from_y[i];
    if (a == 0.0) {
      continue;
    }
    const double cond =
        corrector_kernel(proposals.z[i], proposals.tau, proposals.dt, score, g, sched).transition_prob(proposals.y);
    if (!(cond > 0.0)) {
      throw DomainError("reweighted SNIS conditional vanished");
    }
    num += a;
    den += a / cond;
  }
  if (!(num > 0.0)) {
    throw DomainError("all reweighted SNIS proposals have zero weight");
  }
  return num / den;
}

// ---------------------------------------------------------------------------------------------
// Batches

void RolloutBatch::validate(bool need_terms) const {
  const std::size_t n = samples.size();
  if (rewards.size() != n || advantages.size() != n || skip.size() != n) {
    throw StateError("rollout batch arrays have inconsistent lengths");
  }
  if (!old_score) {
    throw StateError("rollout batch has no old-score snapshot");
  }
  if (need_terms && terms.size() != n) {
    throw StateError("rollout batch marginal cache is missing");
  }
}

std::vector<Sequence> neighborhood(std::span<const Token> x, const ScoreModel& score, double tau, bool full) {
  const auto& spec = score.spec();
  std::vector<Sequence> out;
  if (full && score.full_support()) {
    const IndexCodec codec(spec);
    const auto ix = codec.encode(x);
    for (std::uint64_t k = 0; k < codec.size(); ++k) {
      if (k != ix) {
        out.push_back(codec.decode(k));
      }
    }
    return out;
  }
  Sequence y(x.begin(), x.end());
  for (int i = 0; i < spec.length(); ++i) {
    for (Token a = 0; a < spec.vocab_size(); ++a) {
      if (a == x[i]) {
        continue;
      }
      y[i] = a;
      if (score.is_free(x, y, tau)) {
        out.push_back(y);
      }
    }
    y[i] = x[i];
  }
  return out;
}

void populate_marginals(RolloutBatch& batch, const TokenGenerator& g, const NoiseSchedule& sched, MarginalMode mode,
                        const SnisOptions& opts, std::uint64_t seed, bool full_neighborhood) {
  batch.validate(false);
  if (mode == MarginalMode::exact) {
    throw ConfigError("exact marginals need populate_exact_marginals");
  }
  const auto& old = *batch.old_score;
  batch.terms.assign(batch.size(), {});
  for (std::size_t k = 0; k < batch.size(); ++k) {
    Rng rng = make_stream(seed, k);
    const auto& x = batch.samples[k];
    for (auto& y : neighborhood(x, old, batch.tau, full_neighborhood)) {
      NeighborTerm term;
      term.proposals = mode == MarginalMode::snis ? draw_snis_proposals(y, batch.tau, old, g, sched, opts, rng)
                                                  : single_sample_proposal(y, x, batch.tau, old, g, sched, opts);
      term.has_proposals = true;
      term.q_old = reweighted_marginal(term.proposals, old, g, sched);
      term.q_hat = term.q_old;
      term.y = std::move(y);
      batch.terms[k].push_back(std::move(term));
    }
  }
}

void populate_exact_marginals(RolloutBatch& batch, const SimplexDist& policy, bool full_neighborhood) {
  batch.validate(false);
  const IndexCodec codec(policy.spec());
  batch.terms.assign(batch.size(), {});
  for (std::size_t k = 0; k < batch.size(); ++k) {
    for (auto& y : neighborhood(batch.samples[k], *batch.old_score, batch.tau, full_neighborhood)) {
      NeighborTerm term;
      term.q_old = policy[codec.encode(y)];
      term.q_hat = term.q_old;
      term.y = std::move(y);
      batch.terms[k].push_back(std::move(term));
    }
  }
}

void refresh_marginals(RolloutBatch& batch, const ScoreModel& score, const TokenGenerator& g,
                       const NoiseSchedule& sched) {
  batch.validate();
  for (auto& row : batch.terms) {
    for (auto& term : row) {
      if (term.has_proposals) {
        term.q_hat = reweighted_marginal(term.proposals, score, g, sched);
      }
    }
  }
}

// ---------------------------------------------------------------------------------------------
// Gradients

std::vector<double> reinforce_terms(const RolloutBatch& batch, const ScoreModel& score) {
  batch.validate();
  const std::size_t p = score.parameter_count();
  std::vector<double> out(batch.size() * p, 0.0);
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const double r = batch.rewards[k];
    if (r == 0.0) {
      continue;
    }
    std::span<double> row(out.data() + k * p, p);
    for (const auto& term : batch.terms[k]) {
      score.accumulate_grad_log(batch.samples[k], term.y, batch.tau, r * term.q_hat, row);
    }
  }
  return out;
}

namespace {

std::vector<double> row_mean(const std::vector<double>& terms, std::size_t rows, std::size_t p) {
  std::vector<double> out(p, 0.0);
  if (rows == 0) {
    return out;
  }
  for (std::size_t k = 0; k < rows; ++k) {
    for (std::size_t j = 0; j < p; ++j) {
      out[j] += terms[k * p + j];
    }
  }
  for (auto& v : out) {
    v /= static_cast<double>(rows);
  }
  return out;
}

}  // namespace

std::vector<double> reinforce_gradient(const RolloutBatch& batch, const ScoreModel& score) {
  return row_mean(reinforce_terms(batch, score), batch.size(), score.parameter_count());
}

double is_ratio(std::span<const Token> x, std::span<const Token> y, const ScoreModel& score_new,
                const ScoreModel& score_old, double snis_new_y, double snis_old_y, double tau, IsForm form) {
  const double s_new = score_new.ratio(x, y, tau);
  const double s_old = score_old.ratio(x, y, tau);
  if (!(snis_new_y > 0.0) || !(snis_old_y > 0.0) || !(s_new > 0.0) || !(s_old > 0.0)) {
    throw DomainError("importance ratio needs positive marginals and scores");
  }
  const double score_part = s_old / s_new;
  return form == IsForm::as_printed ? (snis_new_y / snis_old_y) * score_part : score_part;
}

std::vector<double> is_terms(const RolloutBatch& batch, const ScoreModel& score, IsForm form) {
  batch.validate();
  require_params(score, *batch.old_score);
  const std::size_t p = score.parameter_count();
  std::vector<double> out(batch.size() * p, 0.0);
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const double r = batch.rewards[k];
    if (r == 0.0) {
      continue;
    }
    std::span<double> row(out.data() + k * p, p);
    const auto& x = batch.samples[k];
    for (const auto& term : batch.terms[k]) {
      const double u = is_ratio(x, term.y, score, *batch.old_score, term.q_hat, term.q_old, batch.tau, form);
      score.accumulate_grad_log(x, term.y, batch.tau, r * term.q_hat * u, row);
    }
  }
  return out;
}

std::vector<double> is_gradient(const RolloutBatch& batch, const ScoreModel& score, IsForm form) {
  return row_mean(is_terms(batch, score, form), batch.size(), score.parameter_count());
}

double clipped_weight_ppo(double u, double A, double eps) {
  if (!(eps > 0.0)) {
    throw ConfigError("clip ratio must be positive");
  }
  return std::min(std::clamp(u, 1.0 - eps, 1.0 + eps) * A, u * A);
}

GroupAdvantages grpo_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) {
    throw ConfigError("GRPO groups need at least two samples");
  }
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (const double r : rewards) {
    var += (r - mean) * (r - mean);
  }
  const double sd = std::sqrt(var / n);
  GroupAdvantages out;
  out.values.assign(rewards.size(), 0.0);
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
    out.degenerate = true;
    return out;
  }
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    out.values[i] = (rewards[i] - mean) / sd;
  }
  return out;
}

std::vector<double> EmaBaseline::advantages(std::span<const double> rewards) {
  if (rewards.empty()) {
    return {};
  }
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
  if (!initialized_) {
    value_ = mean;
    initialized_ = true;
  }
  std::vector<double> out(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    out[i] = rewards[i] - value_;
  }
  value_ = decay_ * value_ + (1.0 - decay_) * mean;
  return out;
}

SurrogateResult surrogate_loss(const RolloutBatch& batch, const ScoreModel& score_new, double eps, Variant variant,
                               IsForm form) {
  batch.validate();
  require_params(score_new, *batch.old_score);
  SurrogateResult out;
  out.gradient.assign(score_new.parameter_count(), 0.0);
  if (batch.size() == 0) {
    return out;
  }
  std::size_t clipped = 0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    if (variant == Variant::grpo && batch.skip[k]) {
      continue;
    }
    const auto& x = batch.samples[k];
    const double A = batch.advantages[k];
    for (const auto& term : batch.terms[k]) {
      const double u = is_ratio(x, term.y, score_new, *batch.old_score, term.q_hat, term.q_old, batch.tau, form);
      ++out.terms;
      if (std::abs(u - 1.0) > eps) {
        ++clipped;
      }
      const double w = term.q_hat * clipped_weight_ppo(u, A, eps);
      if (w == 0.0) {
        continue;
      }
      out.loss += w * std::log(score_new.ratio(x, term.y, batch.tau));
      score_new.accumulate_grad_log(x, term.y, batch.tau, w, out.gradient);
    }
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv_n;
  for (auto& v : out.gradient) {
    v *= inv_n;
  }
  out.clip_fraction = out.terms > 0 ? static_cast<double>(clipped) / static_cast<double>(out.terms) : 0.0;
  return out;
}

// ---------------------------------------------------------------------------------------------
// Path KL

double path_kl_integrand(double rate_pre, double rate) {
  if (rate < 0.0 || rate_pre < 0.0) {
    throw DomainError("rates must be nonnegative");
  }
  if (rate == 0.0) {
    return rate_pre;
  }
  if (rate_pre == 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return rate_pre - rate + rate * std::log(rate / rate_pre);
}

namespace {

template <typename Visit>
void walk_path(const ScoreModel& score, const ScoreModel& score_pre, std::span<const Trajectory> trajectories,
               const TokenGenerator& g, const NoiseSchedule& sched, Visit&& visit) {
  if (!(score.spec() == score_pre.spec())) {
    throw DomainError("path KL needs scores on the same sequence space");
  }
  const double T = sched.horizon();
  for (const auto& traj : trajectories) {
    if (traj.states.size() != traj.times.size() || traj.states.size() < 2) {
      throw DomainError("path KL needs recorded trajectories");
    }
    for (std::size_t k = 0; k + 1 < traj.states.size(); ++k) {
      const auto& x = traj.states[k];
      const double dt = traj.times[k + 1] - traj.times[k];
      const double tau = std::max(T - traj.times[k], 0.0);
      const auto rates = reverse_rates(g, sched, tau, x, score.eval(x, tau));
      const auto rates_pre = reverse_rates(g, sched, tau, x, score_pre.eval(x, tau));
      for (int i = 0; i < rates.table().length(); ++i) {
        for (Token a = 0; a < rates.table().vocab_size(); ++a) {
          if (a != x[i]) {
            visit(x, i, a, tau, dt, rates_pre.rate(i, a), rates.rate(i, a));
          }
        }
      }
    }
  }
}

}  // namespace

PathKl path_kl(const ScoreModel& score, const ScoreModel& score_pre, std::span<const Trajectory> trajectories,
               const TokenGenerator& g, const NoiseSchedule& sched) {
  PathKl out;
  walk_path(score, score_pre, trajectories, g, sched,
            [&out](const Sequence&, int, Token, double, double dt, double pre, double cur) {
              const double v = path_kl_integrand(pre, cur);
              if (std::isinf(v)) {
                out.infinite = true;
              }
              out.value += dt * v;
            });
  if (!trajectories.empty()) {
    out.value /= static_cast<double>(trajectories.size());
  }
  if (out.infinite) {
    out.value = std::numeric_limits<double>::infinity();
  }
  return out;
}

std::vector<double> path_kl_gradient(const ScoreModel& score, const ScoreModel& score_pre,
                                     std::span<const Trajectory> trajectories, const TokenGenerator& g,
                                     const NoiseSchedule& sched) {
  std::vector<double> grad(score.parameter_count(), 0.0);
  if (trajectories.empty()) {
    return grad;
  }
  const double scale = 1.0 / static_cast<double>(trajectories.size());
  Sequence y;
  walk_path(score, score_pre, trajectories, g, sched,
            [&](const Sequence& x, int i, Token a, double tau, double dt, double pre, double cur) {
              if (cur == 0.0) {
                return;
              }
              if (pre == 0.0) {
                throw DomainError("path KL gradient undefined: pre-trained rate is zero");
              }
              // d/d log s of b log(b / a) - b is b log(b / a).
              y = x;
              y[i] = a;
              score.accumulate_grad_log(x, y, tau, scale * dt * cur * std::log(cur / pre), grad);
            });
  return grad;
}

std::vector<double> first_variation(Functional functional, const SimplexDist& p, const RewardFn* reward,
                                    const SimplexDist* ref) {
  if (functional == Functional::expected_reward) {
    if (reward == nullptr) {
      throw ConfigError("expected_reward first variation needs a reward");
    }
    return reward_table(p.spec(), *reward);
  }
  if (ref == nullptr || !(ref->spec() == p.spec())) {
    throw ConfigError("kl_vs_ref first variation needs a reference on the same space");
  }
  std::vector<double> f(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] == 0.0) {
      f[k] = -std::numeric_limits<double>::infinity();
    } else if ((*ref)[k] == 0.0) {
      throw DomainError("reference has no mass where p does");
    } else {
      f[k] = std::log(p[k] / (*ref)[k]) + 1.0;
    }
  }
  return f;
}

}  // namespace sepo
