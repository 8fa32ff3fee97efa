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

#ifndef SEPO_REWARDS_HPP
#define SEPO_REWARDS_HPP

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sepo/ctmc.hpp"

namespace sepo {

/// A deterministic, bounded reward on sequences. Not required to be differentiable.
struct RewardFn {
  std::string name;
  std::function<double(std::span<const Token>)> eval;

  double operator()(std::span<const Token> x) const { return eval(x); }
};

/// Reward parameters as read from the `[reward]` config section (all values are strings).
using RewardParams = std::map<std::string, std::string>;

/// Occurrences of `pattern` as a contiguous substring (overlaps counted).
RewardFn motif_count(std::vector<Token> pattern);

/// -|frequency of `token` - target|.
RewardFn target_composition(Token token, double target);

/// 1 when the token sum has the requested parity (0 = even), else 0.
RewardFn parity(int want);

/// Constant reward, used in tests and sanity checks.
RewardFn constant_reward(double value);

/**
 * Looks a reward up by name.
 *
 * motif_count:        pattern = "0 1"
 * target_composition: token = 0, target = 0.5
 * parity:             want = 0
 *
 * Throws ConfigError for unknown names or parameters.
 */
RewardFn make_reward(const std::string& name, const RewardParams& params);

/// Names accepted by make_reward.
std::vector<std::string> reward_names();

/// Reward of every state of an oracle-sized space, indexed like IndexCodec.
std::vector<double> reward_table(const SequenceSpec& spec, const RewardFn& reward);

}  // namespace sepo

#endif  // SEPO_REWARDS_HPP
