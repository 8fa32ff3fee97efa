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

#include "sepo/trainer.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "sepo/errors.hpp"
#include "sepo/implicit_grad.hpp"

namespace sepo {

void TrainConfig::validate() const {
  if (S < 0) {
    throw ConfigError("S must be nonnegative");
  }
  if (K < 1 || N < 1 || M < 1) {
    throw ConfigError("K, N and M must be at least 1");
  }
  if (variant == Variant::grpo && (G < 2 || N % G != 0)) {
    throw ConfigError("GRPO needs G >= 2 dividing N");
  }
  if (!(eps > 0.0)) {
    throw ConfigError("eps must be positive");
  }
  if (!(lr > 0.0)) {
    throw ConfigError("lr must be positive");
  }
  if (alpha < 0.0) {
    throw ConfigError("alpha must be nonnegative");
  }
  if (!(snis_step > 0.0)) {
    throw ConfigError("snis_step must be positive");
  }
  if (!(baseline_decay >= 0.0 && baseline_decay < 1.0)) {
    throw ConfigError("baseline_decay must lie in [0, 1)");
  }
  if (marginals == MarginalMode::exact) {
    throw ConfigError("training needs snis or single_sample marginals");
  }
  sampler().validate();
}

SamplerConfig TrainConfig::sampler() const {
  SamplerConfig sc;
  sc.T = T;
  sc.T0 = T0;
  sc.n_steps = n_steps;
  sc.n_corrector = n_corrector;
  sc.corrector_after_T0 = corrector_after_T0;
  sc.corrector_dt = corrector_dt;
  sc.seed = seed;
  return sc;
}

Adam::Adam(std::size_t size, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {}

std::vector<double> Adam::step(std::span<const double> grad) {
  if (grad.size() != m_.size()) {
    throw DomainError("Adam: gradient size mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  std::vector<double> out(grad.size());
  for (std::size_t k = 0; k < grad.size(); ++k) {
    m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * grad[k];
    v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * grad[k] * grad[k];
    out[k] = -lr_ * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + eps_);
  }
  return out;
}

void RunLog::write_csv(std::ostream& out) const {
  out << "iter,mean_reward,median_reward,surrogate_loss,path_kl,grad_norm,clip_frac,wall_ms\n";
  for (const auto& r : records) {
    out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.3f}\n", r.iter, r.mean_reward,
                       r.median_reward, r.surrogate_loss, r.path_kl, r.grad_norm, r.clip_frac, r.wall_ms);
  }
}

void RunLog::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) {
    throw ConfigError("cannot open log for writing: " + path);
  }
  write_csv(out);
}

std::uint64_t parameter_hash(const ScoreModel& model) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const double v : model.parameters()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffU;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) {
    return 0.0;
  }
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double norm_of(std::span<const double> v) {
  double s = 0.0;
  for (const double x : v) {
    s += x * x;
  }
  return std::sqrt(s);
}

// Gradient-flow variant of the surrogate gradient: the per-state policy gradient is replaced by
// its implicit correction on the set of visited states, with pi estimated by visit frequencies.
std::vector<double> gf_corrected_gradient(const RolloutBatch& batch, const ScoreModel& score, double eps,
                                          Variant variant, IsForm form) {
  const std::size_t p = score.parameter_count();
  std::map<Sequence, std::size_t> slot;
  for (const auto& x : batch.samples) {
    slot.emplace(x, slot.size());
  }
  const std::size_t d = slot.size();
  std::vector<double> pi(d, 0.0), adv(d, 0.0), h(d * p, 0.0);
  std::vector<int> count(d, 0);
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const auto j = slot.at(batch.samples[k]);
    ++count[j];
    const double A = (variant == Variant::grpo && batch.skip[k]) ? 0.0 : batch.advantages[k];
    adv[j] += A;
    std::span<double> row(h.data() + j * p, p);
    const auto& x = batch.samples[k];
    for (const auto& term : batch.terms[k]) {
      const double u = is_ratio(x, term.y, score, *batch.old_score, term.q_hat, term.q_old, batch.tau, form);
      const double w = A != 0.0 ? clipped_weight_ppo(u, A, eps) / A : u;
      score.accumulate_grad_log(x, term.y, batch.tau, term.q_hat * w, row);
    }
  }
  const double n = static_cast<double>(batch.size());
  for (std::size_t j = 0; j < d; ++j) {
    pi[j] = count[j] / n;
    adv[j] /= count[j];
    // grad pi(x) = -pi(x) * h(x), with h the mean per-sample score term at x.
    for (std::size_t c = 0; c < p; ++c) {
      h[j * p + c] = -pi[j] * h[j * p + c] / count[j];
    }
  }
  const auto corrected = corrected_gradient(pi, h, p, d);
  std::vector<double> grad(p, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t c = 0; c < p; ++c) {
      grad[c] -= adv[j] * corrected[j * p + c];
    }
  }
  return grad;
}

}  // namespace

TrainResult sepo_train(const ScoreModel& pre, const RewardFn& reward, const TokenGenerator& g,
                       const NoiseSchedule& sched, const TrainConfig& cfg) {
  cfg.validate();
  if (std::abs(cfg.T - sched.horizon()) > 1e-12 * sched.horizon()) {
    throw ConfigError("train horizon differs from the noise schedule horizon");
  }
  TrainResult result;
  auto theta = pre.parameters();
  std::unique_ptr<ScoreModel> current = pre.with_parameters(theta);
  const std::size_t p = theta.size();
  Adam adam(p, cfg.lr);
  EmaBaseline baseline(cfg.baseline_decay);
  const SnisOptions snis{cfg.M, cfg.snis_step, 64};
  const double tau0 = std::max(cfg.T - cfg.T0, 0.0);

  for (int s = 1; s <= cfg.S; ++s) {
    const auto start = std::chrono::steady_clock::now();
    std::shared_ptr<const ScoreModel> old(current->clone());
    IterationRecord rec;
    rec.iter = s;
    rec.sampling_hash_before = parameter_hash(*old);

    // Line 4: sample from the frozen snapshot.
    SamplerConfig sc = cfg.sampler();
    sc.seed = cfg.seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(s);
    const double dt_c = sc.corrector_dt > 0.0 ? sc.corrector_dt : sc.dt();
    RolloutBatch batch;
    std::vector<Trajectory> trajectories;
    try {
      for (int k = 0; k < cfg.N; ++k) {
        Rng rng = make_stream(sc.seed, static_cast<std::uint64_t>(k));
        auto traj = sample_trajectory(sc, *old, g, sched, {}, rng, true);
        Sequence x = traj.terminal;
        if (cfg.gf_mode) {
          for (int c = 0; c < sc.corrector_after_T0; ++c) {
            x = corrector_kernel(x, tau0, dt_c, *old, g, sched).sample(rng);
          }
        }
        batch.samples.push_back(std::move(x));
        trajectories.push_back(std::move(traj));
      }
    } catch (const StepSizeError& e) {
      result.log.failures.emplace_back(s, e.what());
      continue;
    }

    // Line 5: rewards and advantages, fixed for the iteration.
    for (const auto& x : batch.samples) {
      batch.rewards.push_back(reward(x));
    }
    batch.skip.assign(batch.size(), 0);
    if (cfg.variant == Variant::grpo) {
      batch.advantages.assign(batch.size(), 0.0);
      for (int start_k = 0; start_k < cfg.N; start_k += cfg.G) {
        const auto grp =
            grpo_advantages(std::span<const double>(batch.rewards).subspan(static_cast<std::size_t>(start_k), cfg.G));
        for (int j = 0; j < cfg.G; ++j) {
          batch.advantages[start_k + j] = grp.values[j];
          batch.skip[start_k + j] = grp.degenerate ? 1 : 0;
        }
        rec.degenerate_groups += grp.degenerate ? 1 : 0;
      }
    } else {
      batch.advantages = baseline.advantages(batch.rewards);
    }
    batch.old_score = old;
    batch.tau = tau0;
    populate_marginals(batch, g, sched, cfg.marginals, snis, sc.seed ^ 0x5bd1e995ULL);

    // Line 6: K epochs on the surrogate.
    // A kernel that turns invalid under the updated rates aborts the iteration; its partial
    // updates are discarded so the model stays samplable.
    try {
      for (int e = 0; e < cfg.K; ++e) {
        refresh_marginals(batch, *current, g, sched);
        auto sur = surrogate_loss(batch, *current, cfg.eps, cfg.variant, cfg.is_form);
        auto grad = cfg.gf_mode ? gf_corrected_gradient(batch, *current, cfg.eps, cfg.variant, cfg.is_form)
                                : std::move(sur.gradient);
        double loss = sur.loss;
        const auto kl = path_kl(*current, pre, trajectories, g, sched);
        if (cfg.alpha > 0.0) {
          const auto kl_grad = path_kl_gradient(*current, pre, trajectories, g, sched);
          for (std::size_t k = 0; k < p; ++k) {
            grad[k] += cfg.alpha * kl_grad[k];
          }
          loss += cfg.alpha * kl.value;
        }
        if (e == 0) {
          rec.grad_norm = norm_of(grad);
          rec.path_kl = kl.value;
        }
        rec.surrogate_loss = loss;
        rec.clip_frac = sur.clip_fraction;
        rec.epoch_clip_fracs.push_back(sur.clip_fraction);

        const double beta = cfg.step_schedule == StepSchedule::inv_sqrt ? std::min(1.0, 1.0 / std::sqrt(s)) : 1.0;
        std::vector<double> step;
        if (cfg.optimizer == Optimizer::adam) {
          step = adam.step(grad);
          for (auto& v : step) {
            v *= beta;
          }
        } else {
          step.resize(p);
          for (std::size_t k = 0; k < p; ++k) {
            step[k] = -cfg.lr * beta * grad[k];
          }
        }
        for (std::size_t k = 0; k < p; ++k) {
          if (std::isfinite(theta[k])) {
            theta[k] += step[k];
          }
        }
        current = pre.with_parameters(theta);
      }
    } catch (const StepSizeError& e) {
      result.log.failures.emplace_back(s, e.what());
      theta = old->parameters();
      current = pre.with_parameters(theta);
      continue;
    }

    // Line 7: the snapshot must have stayed untouched during the epochs.
    rec.sampling_hash_after = parameter_hash(*old);
    if (rec.sampling_hash_after != rec.sampling_hash_before) {
      throw StateError("sampling snapshot changed during optimization");
    }
    rec.mean_reward = mean_of(batch.rewards);
    rec.median_reward = median_of(batch.rewards);
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.log.records.push_back(std::move(rec));
  }
  result.model = std::move(current);
  return result;
}

// ---------------------------------------------------------------------------------------------
// Pretraining

std::vector<NoisedExample> draw_noised(std::span<const Sequence> dataset, int count, double tau_min,
                                       const TokenGenerator& g, const NoiseSchedule& sched, Rng& rng) {
  if (dataset.empty()) {
    throw ConfigError("empty dataset");
  }
  const double T = sched.horizon();
  const int m = g.vocab().size;
  std::vector<NoisedExample> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    NoisedExample ex;
    const auto pick = std::min(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(dataset.size())),
                               dataset.size() - 1);
    ex.x0 = dataset[pick];
    ex.tau = tau_min + (T - tau_min) * uniform01(rng);
    const auto kernel = transition_kernel(g, sched, 0.0, ex.tau);
    ex.xt = ex.x0;
    for (std::size_t i = 0; i < ex.x0.size(); ++i) {
      const double u = uniform01(rng);
      double acc = 0.0;
      for (Token a = 0; a < m; ++a) {
        acc += kernel(a, ex.x0[i]);
        if (u < acc) {
          ex.xt[i] = a;
          break;
        }
      }
    }
    out.push_back(std::move(ex));
  }
  return out;
}

double dse_loss(const ScoreParams& params, std::span<const NoisedExample> examples, const TokenGenerator& g,
                const NoiseSchedule& sched, std::span<double> grad) {
  if (examples.empty()) {
    return 0.0;
  }
  const int m = params.spec().vocab_size();
  const double scale = 1.0 / static_cast<double>(examples.size());
  double total = 0.0;
  for (const auto& ex : examples) {
    const auto kernel = transition_kernel(g, sched, 0.0, ex.tau);
    const double sigma = sched.rate(ex.tau);
    const int b = params.bucket(ex.tau);
    for (int i = 0; i < params.spec().length(); ++i) {
      const Token cur = ex.xt[i];
      const double denom = kernel(cur, ex.x0[i]);
      for (Token a = 0; a < m; ++a) {
        if (a == cur || !params.allowed(cur, a)) {
          continue;
        }
        // Weight is the forward rate of the neighbour y (token a) into x_t.
        const double w = sigma * g.rate(cur, a);
        if (w == 0.0) {
          continue;
        }
        const double r = kernel(a, ex.x0[i]) / denom;
        const double log_s = params.log_value(b, i, cur, a);
        const double s_val = std::exp(log_s);
        const double k_r = r > 0.0 ? r * (std::log(r) - 1.0) : 0.0;
        total += w * (s_val - r * log_s + k_r);
        if (!grad.empty()) {
          grad[params.index(b, i, cur, a)] += scale * w * (s_val - r);
        }
      }
    }
  }
  return total * scale;
}

PretrainResult pretrain_score(std::span<const Sequence> dataset, const SequenceSpec& spec, const TokenGenerator& g,
                              const NoiseSchedule& sched, const PretrainConfig& cfg) {
  if (dataset.empty()) {
    throw ConfigError("pretraining needs a nonempty dataset");
  }
  if (cfg.steps < 0 || cfg.batch < 1 || !(cfg.lr > 0.0)) {
    throw ConfigError("invalid pretraining settings");
  }
  if (!(cfg.tau_min > 0.0) || cfg.tau_min >= sched.horizon()) {
    throw ConfigError("tau_min must lie in (0, T)");
  }
  for (const auto& x : dataset) {
    spec.validate(x);
  }
  PretrainResult out{ScoreParams(spec, g.kind(), sched.horizon(), cfg.layout), {}};
  Adam adam(out.params.parameter_count(), cfg.lr);
  Rng rng = make_stream(cfg.seed, 0);
  std::vector<NoisedExample> fixed;
  if (!cfg.resample) {
    fixed = draw_noised(dataset, cfg.batch, cfg.tau_min, g, sched, rng);
  }
  std::vector<double> grad(out.params.parameter_count());
  for (int step = 0; step < cfg.steps; ++step) {
    const auto examples = cfg.resample ? draw_noised(dataset, cfg.batch, cfg.tau_min, g, sched, rng) : fixed;
    std::fill(grad.begin(), grad.end(), 0.0);
    out.losses.push_back(dse_loss(out.params, examples, g, sched, grad));
    out.params.apply_update(adam.step(grad));
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Evaluation

EvalSummary summarize_rewards(std::vector<Sequence> samples, const RewardFn& reward) {
  EvalSummary out;
  out.samples = std::move(samples);
  for (const auto& x : out.samples) {
    out.rewards.push_back(reward(x));
  }
  out.mean = mean_of(out.rewards);
  out.median = median_of(out.rewards);
  double var = 0.0;
  for (const double r : out.rewards) {
    var += (r - out.mean) * (r - out.mean);
  }
  out.std = out.rewards.empty() ? 0.0 : std::sqrt(var / static_cast<double>(out.rewards.size()));
  return out;
}

EvalSummary evaluate_policy(const ScoreModel& model, const RewardFn& reward, int n_samples, const SamplerConfig& cfg,
                            const TokenGenerator& g, const NoiseSchedule& sched, bool gradient_flow) {
  if (n_samples < 1) {
    throw ConfigError("evaluation needs at least one sample");
  }
  return summarize_rewards(sample_batch(cfg, model, g, sched, n_samples, gradient_flow), reward);
}

NormTrace gradient_norm_trace(const RunLog& log) {
  const std::size_t n = log.records.size();
  if (n < 16) {
    throw LengthError("gradient-norm trend needs at least 16 iterations");
  }
  NormTrace out;
  double cum = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    cum += log.records[s].grad_norm * log.records[s].grad_norm;
    out.running_mean.push_back(cum / static_cast<double>(s + 1));
    if (!(out.running_mean.back() > 0.0)) {
      out.defined = false;
    }
  }
  if (!out.defined) {
    out.slope = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const double x = std::log(static_cast<double>(s + 1));
    const double y = std::log(out.running_mean[s]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double dn = static_cast<double>(n);
  out.slope = (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
  return out;
}

}  // namespace sepo
