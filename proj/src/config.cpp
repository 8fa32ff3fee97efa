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

#include "sepo/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "sepo/errors.hpp"

namespace sepo {

namespace {

struct Binding {
  std::string section;
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return "";
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw ConfigError("invalid value for '" + key + "': " + value);
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long out = std::stoll(v, &used);
    if (used != v.size()) {
      bad_value(key, v);
    }
    return out;
  } catch (const std::logic_error&) {
    bad_value(key, v);
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') {
      bad_value(key, v);
    }
    const auto out = std::stoull(v, &used);
    if (used != v.size()) {
      bad_value(key, v);
    }
    return out;
  } catch (const std::logic_error&) {
    bad_value(key, v);
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) {
      bad_value(key, v);
    }
    return out;
  } catch (const std::logic_error&) {
    bad_value(key, v);
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") {
    return true;
  }
  if (v == "false" || v == "0") {
    return false;
  }
  bad_value(key, v);
}

std::string num(double v) { return fmt::format("{}", v); }
std::string flag(bool v) { return v ? "true" : "false"; }

template <typename E>
Binding choice(std::string section, std::string key, E& field, std::vector<std::pair<E, std::string>> names) {
  return {std::move(section), key,
          [&field, names, key](const std::string& v) {
            for (const auto& [e, name] : names) {
              if (name == v) {
                field = e;
                return;
              }
            }
            bad_value(key, v);
          },
          [&field, names]() {
            for (const auto& [e, name] : names) {
              if (e == field) {
                return name;
              }
            }
            return std::string("?");
          }};
}

Binding int_field(std::string section, std::string key, int& field) {
  return {std::move(section), key,
          [&field, key](const std::string& v) { field = static_cast<int>(to_int(key, v)); },
          [&field]() { return std::to_string(field); }};
}

Binding u64_field(std::string section, std::string key, std::uint64_t& field) {
  return {std::move(section), key, [&field, key](const std::string& v) { field = to_u64(key, v); },
          [&field]() { return std::to_string(field); }};
}

Binding double_field(std::string section, std::string key, double& field) {
  return {std::move(section), key, [&field, key](const std::string& v) { field = to_double(key, v); },
          [&field]() { return num(field); }};
}

Binding bool_field(std::string section, std::string key, bool& field) {
  return {std::move(section), key, [&field, key](const std::string& v) { field = to_bool(key, v); },
          [&field]() { return flag(field); }};
}

Binding string_field(std::string section, std::string key, std::string& field) {
  return {std::move(section), key, [&field](const std::string& v) { field = v; }, [&field]() { return field; }};
}

std::vector<Binding> bindings(RunConfig& c) {
  std::vector<Binding> b;
  b.push_back(int_field("space", "m", c.m));
  b.push_back(int_field("space", "n", c.n));
  b.push_back(choice<GeneratorKind>("space", "kind", c.kind,
                                    {{GeneratorKind::uniform, "uniform"}, {GeneratorKind::absorbing, "absorbing"}}));
  b.push_back({"space", "mask_index",
               [&c](const std::string& v) {
                 if (v == "none") {
                   c.mask_index.reset();
                 } else {
                   c.mask_index = static_cast<Token>(to_int("mask_index", v));
                 }
               },
               [&c]() { return c.mask_index ? std::to_string(*c.mask_index) : std::string("none"); }});
  b.push_back(int_field("space", "buckets", c.layout.buckets));
  b.push_back(bool_field("space", "shared_positions", c.layout.shared_positions));

  b.push_back(choice<ScheduleKind>("schedule", "kind", c.schedule_kind,
                                   {{ScheduleKind::linear, "linear"}, {ScheduleKind::geometric, "geometric"}}));
  b.push_back(double_field("schedule", "sigma_min", c.sigma_min));
  b.push_back(double_field("schedule", "sigma_max", c.sigma_max));
  b.push_back(double_field("schedule", "T", c.T));

  b.push_back(double_field("sampler", "T0", c.sampler.T0));
  b.push_back(int_field("sampler", "n_steps", c.sampler.n_steps));
  b.push_back(int_field("sampler", "n_corrector", c.sampler.n_corrector));
  b.push_back(int_field("sampler", "corrector_after_T0", c.sampler.corrector_after_T0));
  b.push_back(double_field("sampler", "corrector_dt", c.sampler.corrector_dt));
  b.push_back(u64_field("sampler", "seed", c.sampler.seed));

  auto& t = c.train;
  b.push_back(int_field("train", "S", t.S));
  b.push_back(int_field("train", "K", t.K));
  b.push_back(int_field("train", "N", t.N));
  b.push_back(int_field("train", "G", t.G));
  b.push_back(int_field("train", "M", t.M));
  b.push_back(double_field("train", "eps", t.eps));
  b.push_back(double_field("train", "alpha", t.alpha));
  b.push_back(double_field("train", "lr", t.lr));
  b.push_back(choice<Variant>("train", "variant", t.variant, {{Variant::ppo, "ppo"}, {Variant::grpo, "grpo"}}));
  b.push_back(bool_field("train", "gf_mode", t.gf_mode));
  b.push_back(choice<StepSchedule>("train", "step_schedule", t.step_schedule,
                                   {{StepSchedule::constant, "constant"}, {StepSchedule::inv_sqrt, "inv_sqrt"}}));
  b.push_back(
      choice<Optimizer>("train", "optimizer", t.optimizer, {{Optimizer::adam, "adam"}, {Optimizer::sgd, "sgd"}}));
  b.push_back(choice<MarginalMode>("train", "marginals", t.marginals,
                                   {{MarginalMode::snis, "snis"}, {MarginalMode::single_sample, "single_sample"}}));
  b.push_back(double_field("train", "snis_step", t.snis_step));
  b.push_back(choice<IsForm>("train", "is_form", t.is_form,
                             {{IsForm::as_printed, "as_printed"}, {IsForm::single_factor, "single_factor"}}));
  b.push_back(double_field("train", "baseline_decay", t.baseline_decay));
  b.push_back(u64_field("train", "seed", t.seed));
  b.push_back(int_field("train", "pretrain_steps", c.pretrain.steps));
  b.push_back(int_field("train", "pretrain_batch", c.pretrain.batch));
  b.push_back(double_field("train", "pretrain_lr", c.pretrain.lr));
  b.push_back(double_field("train", "pretrain_tau_min", c.pretrain.tau_min));
  b.push_back(u64_field("train", "pretrain_seed", c.pretrain.seed));

  b.push_back(string_field("reward", "name", c.reward_name));

  b.push_back(string_field("paths", "data", c.data));
  b.push_back(string_field("paths", "checkpoint_dir", c.checkpoint_dir));
  b.push_back(string_field("paths", "log_dir", c.log_dir));
  return b;
}

const std::vector<std::string> kSections = {"space", "schedule", "sampler", "train", "reward", "paths"};

}  // namespace

SequenceSpec RunConfig::spec() const { return SequenceSpec(n, Vocab::make(m, mask_index)); }

NoiseSchedule RunConfig::schedule() const { return NoiseSchedule(schedule_kind, sigma_min, sigma_max, T); }

TokenGenerator RunConfig::generator() const { return build_generator(kind, Vocab::make(m, mask_index)); }

RewardFn RunConfig::reward() const { return make_reward(reward_name, reward_params); }

SamplerConfig RunConfig::sampler_config() const {
  SamplerConfig sc = sampler;
  sc.T = T;
  return sc;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig tc = train;
  tc.T = T;
  tc.T0 = sampler.T0;
  tc.n_steps = sampler.n_steps;
  tc.n_corrector = sampler.n_corrector;
  tc.corrector_after_T0 = sampler.corrector_after_T0;
  tc.corrector_dt = sampler.corrector_dt;
  return tc;
}

void RunConfig::set_seed(std::uint64_t seed) {
  sampler.seed = seed;
  train.seed = seed;
  pretrain.seed = seed;
}

void RunConfig::validate() const {
  const auto sp = spec();
  (void)sp.state_count();
  (void)generator();
  (void)schedule();
  sampler_config().validate();
  train_config().validate();
  if (layout.buckets < 1) {
    throw ConfigError("buckets must be at least 1");
  }
  (void)reward();
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  auto table = bindings(cfg);
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::set<std::pair<std::string, std::string>> seen;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') {
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(fmt::format("line {}: malformed section header", lineno));
      }
      section = trim(line.substr(1, line.size() - 2));
      if (std::find(kSections.begin(), kSections.end(), section) == kSections.end()) {
        throw ConfigError(fmt::format("line {}: unknown section [{}]", lineno, section));
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("line {}: expected key = value", lineno));
    }
    if (section.empty()) {
      throw ConfigError(fmt::format("line {}: key outside any section", lineno));
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.emplace(section, key).second) {
      throw ConfigError(fmt::format("line {}: duplicate key '{}' in [{}]", lineno, key, section));
    }
    bool matched = false;
    for (auto& bnd : table) {
      if (bnd.section == section && bnd.key == key) {
        bnd.set(value);
        matched = true;
        break;
      }
    }
    if (!matched) {
      if (section == "reward") {
        cfg.reward_params[key] = value;
      } else {
        throw ConfigError(fmt::format("line {}: unknown key '{}' in [{}]", lineno, key, section));
      }
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string render_config(const RunConfig& cfg) {
  RunConfig copy = cfg;
  auto table = bindings(copy);
  std::string out;
  for (const auto& section : kSections) {
    if (!out.empty()) {
      out += '\n';
    }
    out += "[" + section + "]\n";
    for (const auto& bnd : table) {
      if (bnd.section == section) {
        out += bnd.key + " = " + bnd.get() + "\n";
      }
    }
    if (section == "reward") {
      for (const auto& [key, value] : copy.reward_params) {
        out += key + " = " + value + "\n";
      }
    }
  }
  return out;
}

std::uint64_t config_hash(const RunConfig& cfg) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char ch : render_config(cfg)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace sepo
