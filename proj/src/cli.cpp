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

#include "sepo/cli.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sepo/config.hpp"
#include "sepo/errors.hpp"
#include "sepo/io.hpp"
#include "sepo/trainer.hpp"
#include "sepo/verify.hpp"

namespace sepo {

namespace {

namespace fs = std::filesystem;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string checkpoint;
  std::optional<int> n_samples;
  bool quiet = false;
};

RunConfig load_run_config(const Flags& f) {
  if (f.config.empty()) {
    throw ConfigError("--config is required");
  }
  RunConfig cfg = load_config(f.config);
  if (f.seed) {
    cfg.set_seed(*f.seed);
  }
  // Relative data paths are resolved against the config file's directory.
  if (!cfg.data.empty() && fs::path(cfg.data).is_relative()) {
    cfg.data = (fs::path(f.config).parent_path() / cfg.data).string();
  }
  return cfg;
}

std::string output_path(const Flags& f, const std::string& dir, const std::string& name) {
  return f.out.empty() ? (fs::path(dir) / name).string() : f.out;
}

ScoreParams load_checkpoint(const Flags& f, const RunConfig& cfg) {
  if (f.checkpoint.empty()) {
    throw ConfigError("--checkpoint is required");
  }
  std::uint64_t fp = 0;
  auto params = ScoreParams::load_file(f.checkpoint, &fp);
  if (fp != cfg.schedule().fingerprint()) {
    throw ConfigError("checkpoint was trained with a different noise schedule");
  }
  if (!(params.spec() == cfg.spec()) || params.kind() != cfg.kind) {
    throw ConfigError("checkpoint does not match the configured sequence space");
  }
  return params;
}

std::string hex(std::uint64_t v) { return fmt::format("{:016x}", v); }

int cmd_pretrain(const Flags& f, std::ostream& out) {
  const auto cfg = load_run_config(f);
  if (cfg.data.empty()) {
    throw ConfigError("[paths] data must name a sequence file for pretraining");
  }
  const auto spec = cfg.spec();
  const auto data = read_sequences_file(cfg.data, spec);
  PretrainConfig pc = cfg.pretrain;
  pc.layout = cfg.layout;
  const auto sched = cfg.schedule();
  const auto result = pretrain_score(data, spec, cfg.generator(), sched, pc);
  const auto path = output_path(f, cfg.checkpoint_dir, "pretrained.ckpt");
  result.params.save_file(path, sched.fingerprint());
  if (!f.quiet) {
    out << fmt::format("pretrained on {} sequences, {} steps; final loss {:.6g}\n", data.size(), pc.steps,
                       result.losses.empty() ? 0.0 : result.losses.back());
    out << "checkpoint: " << path << '\n';
  }
  return kExitOk;
}

int cmd_finetune(const Flags& f, std::ostream& out) {
  const auto cfg = load_run_config(f);
  const auto pre = load_checkpoint(f, cfg);
  const auto sched = cfg.schedule();
  auto result = sepo_train(pre, cfg.reward(), cfg.generator(), sched, cfg.train_config());
  const auto* params = dynamic_cast<const ScoreParams*>(result.model.get());
  if (params == nullptr) {
    throw StateError("fine-tuning returned a non-tabular model");
  }
  const auto path = output_path(f, cfg.checkpoint_dir, "finetuned.ckpt");
  params->save_file(path, sched.fingerprint());
  const auto log_path = (fs::path(cfg.log_dir) / "finetune_log.csv").string();
  result.log.write_csv(log_path);
  std::ofstream manifest(fs::path(cfg.log_dir) / "manifest.txt");
  manifest << "config_hash = " << hex(config_hash(cfg)) << '\n'
           << "seed = " << cfg.train.seed << '\n'
           << "pretrained = " << f.checkpoint << '\n'
           << "finetuned = " << path << '\n'
           << "log = " << log_path << '\n';
  if (!f.quiet) {
    for (const auto& [iter, why] : result.log.failures) {
      out << fmt::format("iteration {} aborted: {}\n", iter, why);
    }
    if (!result.log.records.empty()) {
      const auto& last = result.log.records.back();
      out << fmt::format("{} iterations; last batch mean reward {:.4g}, median {:.4g}\n", result.log.records.size(),
                         last.mean_reward, last.median_reward);
    }
    out << "checkpoint: " << path << "\nlog: " << log_path << '\n';
  }
  return kExitOk;
}

int cmd_sample(const Flags& f, std::ostream& out) {
  const auto cfg = load_run_config(f);
  const auto params = load_checkpoint(f, cfg);
  const int n = f.n_samples.value_or(16);
  if (n < 1) {
    throw ConfigError("--n-samples must be positive");
  }
  const auto sc = cfg.sampler_config();
  const auto seqs = sample_batch(sc, params, cfg.generator(), cfg.schedule(), n, sc.corrector_after_T0 > 0);
  const auto header = fmt::format("seed={} config={} checkpoint={} n={}", sc.seed, hex(config_hash(cfg)),
                                  hex(params.content_hash()), n);
  if (f.out.empty()) {
    write_sequences(out, seqs, header);
  } else {
    write_sequences_file(f.out, seqs, header);
  }
  return kExitOk;
}

int cmd_evaluate(const Flags& f, std::ostream& out) {
  const auto cfg = load_run_config(f);
  const auto params = load_checkpoint(f, cfg);
  const int n = f.n_samples.value_or(640);
  const auto sc = cfg.sampler_config();
  const auto summary =
      evaluate_policy(params, cfg.reward(), n, sc, cfg.generator(), cfg.schedule(), sc.corrector_after_T0 > 0);
  out << fmt::format("reward {}: mean {:.6g} median {:.6g} std {:.6g} over {} samples\n", cfg.reward_name,
                     summary.mean, summary.median, summary.std, n);
  if (!f.out.empty()) {
    write_sequences_file(f.out, summary.samples, fmt::format("seed={} config={}", sc.seed, hex(config_hash(cfg))));
  }
  return kExitOk;
}

int cmd_oracle_verify(const Flags& f, std::ostream& out) {
  const auto results = run_oracle_suite(f.seed.value_or(0));
  bool all = true;
  std::size_t width = 0;
  for (const auto& r : results) {
    width = std::max(width, r.name.size());
  }
  for (const auto& r : results) {
    all = all && r.pass;
    if (!f.quiet || !r.pass) {
      out << fmt::format("{:<{}}  {}  {}\n", r.name, width, r.pass ? "PASS" : "FAIL", r.detail);
    }
  }
  out << (all ? "all checks passed\n" : "some checks FAILED\n");
  return all ? kExitOk : kExitDomain;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Policy-gradient fine-tuning of discrete diffusion models", "sepo"};
  app.require_subcommand(1);
  Flags flags;
  std::uint64_t seed = 0;
  int n_samples = 0;

  auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* opt = sub->add_option("--config", flags.config, "run configuration file");
    if (need_config) {
      opt->required();
    }
    sub->add_option("--seed", seed, "override every random seed");
    sub->add_option("--out", flags.out, "output path");
    sub->add_flag("--quiet", flags.quiet, "print less");
  };
  auto* pretrain = app.add_subcommand("pretrain", "fit a tabular score to [paths] data");
  add_common(pretrain, true);
  auto* finetune = app.add_subcommand("finetune", "run SEPO from a pretrained checkpoint");
  add_common(finetune, true);
  finetune->add_option("--checkpoint", flags.checkpoint, "pretrained checkpoint")->required();
  auto* sample = app.add_subcommand("sample", "draw sequences from a checkpoint");
  add_common(sample, true);
  sample->add_option("--checkpoint", flags.checkpoint, "checkpoint")->required();
  sample->add_option("--n-samples", n_samples, "number of sequences");
  auto* evaluate = app.add_subcommand("evaluate", "reward statistics of a checkpoint");
  add_common(evaluate, true);
  evaluate->add_option("--checkpoint", flags.checkpoint, "checkpoint")->required();
  evaluate->add_option("--n-samples", n_samples, "number of sequences");
  auto* verify = app.add_subcommand("oracle-verify", "run the oracle invariant suite");
  add_common(verify, false);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "sepo: " << e.what() << '\n' << app.help();
    return kExitConfig;
  }
  for (auto* sub : app.get_subcommands()) {
    if (sub->count("--seed") > 0) {
      flags.seed = seed;
    }
    if (sub->get_name() != "pretrain" && sub->get_name() != "finetune" && sub->get_name() != "oracle-verify" &&
        sub->count("--n-samples") > 0) {
      flags.n_samples = n_samples;
    }
  }

  try {
    if (pretrain->parsed()) {
      return cmd_pretrain(flags, out);
    }
    if (finetune->parsed()) {
      return cmd_finetune(flags, out);
    }
    if (sample->parsed()) {
      return cmd_sample(flags, out);
    }
    if (evaluate->parsed()) {
      return cmd_evaluate(flags, out);
    }
    return cmd_oracle_verify(flags, out);
  } catch (const ConfigError& e) {
    err << "sepo: configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "sepo: error: " << e.what() << '\n';
    return kExitDomain;
  }
}

}  // namespace sepo
