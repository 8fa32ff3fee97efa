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

#include "sepo/rewards.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "sepo/errors.hpp"
#include "sepo/state_space.hpp"

namespace sepo {

namespace {

std::vector<Token> parse_tokens(const std::string& text) {
  std::istringstream in(text);
  std::vector<Token> out;
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(tok, &used));
      if (used != tok.size()) {
        throw ConfigError("bad token in reward pattern: " + tok);
      }
    } catch (const std::logic_error&) {
      throw ConfigError("bad token in reward pattern: " + tok);
    }
  }
  return out;
}

double parse_number(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) {
      throw ConfigError("");
    }
    return v;
  } catch (const std::exception&) {
    throw ConfigError("reward parameter '" + key + "' is not a number: " + text);
  }
}

void reject_unknown(const RewardParams& params, const std::set<std::string>& known, const std::string& name) {
  for (const auto& [key, value] : params) {
    if (!known.contains(key)) {
      throw ConfigError("unknown parameter '" + key + "' for reward " + name);
    }
  }
}

}  // namespace

RewardFn motif_count(std::vector<Token> pattern) {
  if (pattern.empty()) {
    throw ConfigError("motif pattern must not be empty");
  }
  return {"motif_count", [pattern = std::move(pattern)](std::span<const Token> x) {
            if (x.size() < pattern.size()) {
              return 0.0;
            }
            int count = 0;
            for (std::size_t s = 0; s + pattern.size() <= x.size(); ++s) {
              bool hit = true;
              for (std::size_t k = 0; k < pattern.size() && hit; ++k) {
                hit = x[s + k] == pattern[k];
              }
              count += hit ? 1 : 0;
            }
            return static_cast<double>(count);
          }};
}

RewardFn target_composition(Token token, double target) {
  return {"target_composition", [token, target](std::span<const Token> x) {
            if (x.empty()) {
              return -std::abs(target);
            }
            double hits = 0.0;
            for (const Token t : x) {
              hits += t == token ? 1.0 : 0.0;
            }
            return -std::abs(hits / static_cast<double>(x.size()) - target);
          }};
}

RewardFn parity(int want) {
  if (want != 0 && want != 1) {
    throw ConfigError("parity reward expects want = 0 or 1");
  }
  return {"parity", [want](std::span<const Token> x) {
            long sum = 0;
            for (const Token t : x) {
              sum += t;
            }
            return (sum % 2) == want ? 1.0 : 0.0;
          }};
}

RewardFn constant_reward(double value) {
  return {"constant", [value](std::span<const Token>) { return value; }};
}

RewardFn make_reward(const std::string& name, const RewardParams& params) {
  auto get = [&params](const std::string& key, const std::string& fallback) {
    const auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  if (name == "motif_count") {
    reject_unknown(params, {"pattern"}, name);
    return motif_count(parse_tokens(get("pattern", "0 1")));
  }
  if (name == "target_composition") {
    reject_unknown(params, {"token", "target"}, name);
    return target_composition(static_cast<Token>(parse_number("token", get("token", "0"))),
                              parse_number("target", get("target", "0.5")));
  }
  if (name == "parity") {
    reject_unknown(params, {"want"}, name);
    return parity(static_cast<int>(parse_number("want", get("want", "0"))));
  }
  if (name == "constant") {
    reject_unknown(params, {"value"}, name);
    return constant_reward(parse_number("value", get("value", "0")));
  }
  throw ConfigError("unknown reward: " + name);
}

std::vector<std::string> reward_names() { return {"motif_count", "target_composition", "parity", "constant"}; }

std::vector<double> reward_table(const SequenceSpec& spec, const RewardFn& reward) {
  spec.require_oracle_size();
  const IndexCodec codec(spec);
  std::vector<double> out(codec.size());
  Sequence x(spec.length());
  for (std::uint64_t k = 0; k < codec.size(); ++k) {
    codec.decode_into(k, x);
    out[k] = reward(x);
  }
  return out;
}

}  // namespace sepo
