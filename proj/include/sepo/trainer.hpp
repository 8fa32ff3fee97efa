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

#ifndef SEPO_TRAINER_HPP
#define SEPO_TRAINER_HPP

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sepo/ctmc.hpp"
#include "sepo/estimators.hpp"
#include "sepo/rewards.hpp"
#include "sepo/sampler.hpp"
#include "sepo/score.hpp"

namespace sepo {

enum class StepSchedule { constant, inv_sqrt };
enum class Optimizer { adam, sgd };

struct TrainConfig {
  int S = 40;
  int K = 2;
  int N = 8;
  int G = 8;
  int M = 4;
  double eps = 0.2;
  double alpha = 0.05;
  double lr = 1e-4;
  double T = 1.0;
  double T0 = 1.0;
  int n_steps = 128;
  Variant variant = Variant::grpo;
  bool gf_mode = false;
  StepSchedule step_schedule = StepSchedule::constant;
  Optimizer optimizer = Optimizer::adam;
  /// snis, or single_sample for the no-SNIS ablation.
  MarginalMode marginals = MarginalMode::snis;
  double snis_step = 0.25;
  IsForm is_form = IsForm::as_printed;
  int n_corrector = 0;
  int corrector_after_T0 = 0;
  double corrector_dt = 0.0;
  double baseline_decay = 0.99;
  std::uint64_t seed = 0;

  /// Throws ConfigError on any violated invariant.
  void validate() const;
  [[nodiscard]] SamplerConfig sampler() const;
};

/// Adaptive moment estimation on a flat parameter vector (descent direction).
class Adam {
 public:
  explicit Adam(std::size_t size, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  /// Returns the step to add to the parameters for gradient `grad` of a loss.
  std::vector<double> step(std::span<const double> grad);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

struct IterationRecord {
  int iter = 0;
  double mean_reward = 0.0;
  double median_reward = 0.0;
  double surrogate_loss = 0.0;
  double path_kl = 0.0;
  /// Norm of the first-epoch gradient, taken at theta = theta_old.
  double grad_norm = 0.0;
  /// Clip fraction of the last epoch.
  double clip_frac = 0.0;
  double wall_ms = 0.0;
  std::vector<double> epoch_clip_fracs;
  /// Parameter hash of the sampling snapshot before and after the K epochs.
  std::uint64_t sampling_hash_before = 0;
  std::uint64_t sampling_hash_after = 0;
  int degenerate_groups = 0;
};

struct RunLog {
  std::vector<IterationRecord> records;
  /// Iterations aborted by a sampler failure, with the reason.
  std::vector<std::pair<int, std::string>> failures;

  /// Columns: iter, mean_reward, median_reward, surrogate_loss, path_kl, grad_norm, clip_frac, wall_ms.
  void write_csv(std::ostream& out) const;
  void write_csv(const std::string& path) const;
};

/// FNV-1a hash of the raw parameter bits.
std::uint64_t parameter_hash(const ScoreModel& model);

struct TrainResult {
  std::unique_ptr<ScoreModel> model;
  RunLog log;
};

/// S iterations of sampling from theta_old, computing advantages and running K epochs on the clipped surrogate.
TrainResult sepo_train(const ScoreModel& pre, const RewardFn& reward, const TokenGenerator& g,
                       const NoiseSchedule& sched, const TrainConfig& cfg);

// ---------------------------------------------------------------------------------------------
// Pretraining

struct PretrainConfig {
  int steps = 2000;
  int batch = 64;
  double lr = 0.05;
  /// Noise times are drawn from U(tau_min, T).
  double tau_min = 1e-3;
  /// Redraw data and noise every step; false keeps one fixed noised batch (deterministic loss).
  bool resample = true;
  std::uint64_t seed = 0;
  ScoreParams::Layout layout{};
};

struct PretrainResult {
  ScoreParams params;
  /// Denoising score-entropy loss of the batch at every step, before the update.
  std::vector<double> losses;
};

/// One noised training example: clean x0 and its noised version at tau.
struct NoisedExample {
  Sequence x0;
  Sequence xt;
  double tau = 0.0;
};

/// Denoising score entropy of `params` on the examples (mean), accumulating its gradient when given.
double dse_loss(const ScoreParams& params, std::span<const NoisedExample> examples, const TokenGenerator& g,
                const NoiseSchedule& sched, std::span<double> grad = {});

/// Noised examples drawn from the forward kernel.
std::vector<NoisedExample> draw_noised(std::span<const Sequence> dataset, int count, double tau_min,
                                       const TokenGenerator& g, const NoiseSchedule& sched, Rng& rng);

/// Adam on the denoising score entropy. Throws ConfigError on an empty dataset.
PretrainResult pretrain_score(std::span<const Sequence> dataset, const SequenceSpec& spec, const TokenGenerator& g,
                              const NoiseSchedule& sched, const PretrainConfig& cfg);

// ---------------------------------------------------------------------------------------------
// Evaluation

struct EvalSummary {
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;
  std::vector<Sequence> samples;
  std::vector<double> rewards;
};

/// Summary statistics of the reward on n_samples draws (median by midpoint rule, population std).
EvalSummary summarize_rewards(std::vector<Sequence> samples, const RewardFn& reward);

EvalSummary evaluate_policy(const ScoreModel& model, const RewardFn& reward, int n_samples, const SamplerConfig& cfg,
                            const TokenGenerator& g, const NoiseSchedule& sched, bool gradient_flow = false);

struct NormTrace {
  /// Least-squares slope of log(running mean of grad_norm^2) against log(iteration).
  double slope = 0.0;
  /// False when the running average is zero somewhere, leaving the slope undefined.
  bool defined = true;
  std::vector<double> running_mean;
};

/// Throws LengthError for fewer than 16 records.
NormTrace gradient_norm_trace(const RunLog& log);

}  // namespace sepo

#endif  // SEPO_TRAINER_HPP
