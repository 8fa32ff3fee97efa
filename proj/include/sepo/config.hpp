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

#ifndef SEPO_CONFIG_HPP
#define SEPO_CONFIG_HPP

#include <cstdint>
#include <string>

#include "sepo/ctmc.hpp"
#include "sepo/rewards.hpp"
#include "sepo/sampler.hpp"
#include "sepo/score.hpp"
#include "sepo/trainer.hpp"

namespace sepo {

/**
 * Everything a run needs, read from a sectioned `key = value` file.
 *
 * Sections: [space], [schedule], [sampler], [train], [reward], [paths]. Lines starting
 * with `#` or `;` are comments. Unknown sections and keys are rejected; missing keys keep
 * their defaults.
 */
struct RunConfig {
  // [space]
  int m = 4;
  int n = 8;
  GeneratorKind kind = GeneratorKind::uniform;
  std::optional<Token> mask_index;
  ScoreParams::Layout layout{};
  // [schedule]
  ScheduleKind schedule_kind = ScheduleKind::linear;
  double sigma_min = 0.001;
  double sigma_max = 5.0;
  double T = 1.0;
  // [sampler] (T comes from [schedule])
  SamplerConfig sampler{};
  // [train] (T0, n_steps and the corrector settings come from [sampler])
  TrainConfig train{};
  PretrainConfig pretrain{};
  // [reward]
  std::string reward_name = "motif_count";
  RewardParams reward_params{};
  // [paths]
  std::string data;
  std::string checkpoint_dir = ".";
  std::string log_dir = ".";

  [[nodiscard]] SequenceSpec spec() const;
  [[nodiscard]] NoiseSchedule schedule() const;
  [[nodiscard]] TokenGenerator generator() const;
  [[nodiscard]] RewardFn reward() const;
  /// Train settings with the sampler and schedule fields copied in.
  [[nodiscard]] TrainConfig train_config() const;
  [[nodiscard]] SamplerConfig sampler_config() const;

  /// Applies a seed override to every random stream.
  void set_seed(std::uint64_t seed);

  /// Throws ConfigError when the pieces are inconsistent.
  void validate() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
std::string render_config(const RunConfig& cfg);

/// FNV-1a hash of the rendered config.
std::uint64_t config_hash(const RunConfig& cfg);

}  // namespace sepo

#endif  // SEPO_CONFIG_HPP
