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
#include <cmath>
#include <random>
#include <sstream>

#include <doctest.h>

#include "sepo/errors.hpp"
#include "sepo/estimators.hpp"
#include "sepo/rewards.hpp"
#include "sepo/trainer.hpp"

using namespace sepo;

namespace {

ScoreParams random_params(const SequenceSpec& spec, std::uint64_t seed, double sd = 0.3) {
  ScoreParams p(spec, GeneratorKind::uniform, 1.0, {2, false});
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, sd);
  auto theta = p.parameters();
  for (auto& v : theta) {
    v = nd(rng);
  }
  return dynamic_cast<const ScoreParams&>(*p.with_parameters(theta));
}

TrainConfig small_config() {
  TrainConfig c;
  c.S = 6;
  c.K = 2;
  c.N = 16;
  c.G = 4;
  c.M = 2;
  c.lr = 0.05;
  c.alpha = 0.0;
  c.n_steps = 16;
  return c;
}

}  // namespace

TEST_CASE("Adam's first step is lr times the sign of the gradient") {
  Adam adam(3, 0.1);
  const std::vector<double> g{2.0, -0.5, 0.0};
  const auto s = adam.step(g);
  CHECK(s[0] == doctest::Approx(-0.1));
  CHECK(s[1] == doctest::Approx(0.1));
  CHECK(s[2] == 0.0);
  CHECK_THROWS_AS(static_cast<void>(adam.step(std::vector<double>(2))), DomainError);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.N = 10;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.eps = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.marginals = MarginalMode::exact;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("denoising score entropy gradient matches finite differences") {
  const SequenceSpec spec(2, Vocab::make(3));
  const auto g = build_generator(GeneratorKind::uniform, spec.vocab());
  const auto s = NoiseSchedule::standard();
  const auto p = random_params(spec, 3);
  Rng rng(2);
  const std::vector<Sequence> data{{0, 1}, {2, 2}, {1, 0}};
  const auto ex = draw_noised(data, 12, 1e-3, g, s, rng);
  std::vector<double> grad(p.parameter_count(), 0.0);
  const double base = dse_loss(p, ex, g, s, grad);
  CHECK(base >= -1e-12);
  auto theta = p.parameters();
  for (std::size_t k = 0; k < theta.size(); ++k) {
    auto hi = theta, lo = theta;
    hi[k] += 1e-6;
    lo[k] -= 1e-6;
    const auto ph = p.with_parameters(hi);
    const auto pl = p.with_parameters(lo);
    const double fd = (dse_loss(dynamic_cast<const ScoreParams&>(*ph), ex, g, s) -
                       dse_loss(dynamic_cast<const ScoreParams&>(*pl), ex, g, s)) /
                      2e-6;
    CHECK(grad[k] == doctest::Approx(fd).epsilon(1e-5).scale(1e-6));
  }
}

TEST_CASE("pretraining lowers the loss and zero steps leave the table at zero") {
  const SequenceSpec spec(3, Vocab::make(3));
  const auto g = build_generator(GeneratorKind::uniform, spec.vocab());
  const auto s = NoiseSchedule::standard();
  const std::vector<Sequence> data{{0, 1, 2}, {0, 1, 1}, {2, 1, 0}};
  PretrainConfig cfg;
  cfg.steps = 50;
  cfg.batch = 32;
  cfg.resample = false;
  const auto r = pretrain_score(data, spec, g, s, cfg);
  REQUIRE(r.losses.size() == 50);
  CHECK(r.losses.back() < r.losses.front());
  cfg.steps = 0;
  const auto z = pretrain_score(data, spec, g, s, cfg);
  for (double v : z.params.table()) {
    CHECK(v == 0.0);
  }
  CHECK_THROWS_AS(static_cast<void>(pretrain_score({}, spec, g, s, cfg)), ConfigError);
}

TEST_CASE("absorbing pretraining on one sequence recovers it") {
  const SequenceSpec spec(4, Vocab::make(4, 3));
  const auto g = build_generator(GeneratorKind::absorbing, spec.vocab());
  const auto s = NoiseSchedule::standard();
  const std::vector<Sequence> data{{0, 2, 1, 0}};
  PretrainConfig cfg;
  cfg.steps = 2000;
  cfg.layout = {4, false};
  const auto r = pretrain_score(data, spec, g, s, cfg);
  SamplerConfig sc;
  sc.n_steps = 64;
  sc.seed = 3;
  const auto xs = sample_batch(sc, r.params, g, s, 500);
  int hits = 0;
  for (const auto& x : xs) {
    hits += x == data[0] ? 1 : 0;
  }
  CHECK(hits > 450);
}

TEST_CASE("SEPO with no iterations returns the pretrained parameters") {
  const SequenceSpec spec(2, Vocab::make(3));
  const auto g = build_generator(GeneratorKind::uniform, spec.vocab());
  const auto s = NoiseSchedule::standard();
  const auto pre = random_params(spec, 1);
  auto cfg = small_config();
  cfg.S = 0;
  const auto r = sepo_train(pre, motif_count({0, 1}), g, s, cfg);
  CHECK(r.model->parameters() == pre.parameters());
  CHECK(r.log.records.empty());
}

TEST_CASE("SEPO keeps the sampling snapshot frozen and is deterministic") {
  const SequenceSpec spec(2, Vocab::make(3));
  const auto g = build_generator(GeneratorKind::uniform, spec.vocab());
  const auto s = NoiseSchedule::standard();
  const auto pre = random_params(spec, 1);
  const auto cfg = small_config();
  const auto a = sepo_train(pre, motif_count({0, 1}), g, s, cfg);
  REQUIRE_FALSE(a.log.records.empty());
  for (const auto& r : a.log.records) {
    CHECK(r.sampling_hash_before == r.sampling_hash_after);
    CHECK(r.epoch_clip_fracs.size() == static_cast<std::size_t>(cfg.K));
    CHECK(r.epoch_clip_fracs.front() == 0.0);
  }
  CHECK(a.log.records.front().sampling_hash_before == parameter_hash(pre));
  const auto b = sepo_train(pre, motif_count({0, 1}), g, s, cfg);
  CHECK(a.model->parameters() == b.model->parameters());
  CHECK(a.model->parameters() != pre.parameters());
}

TEST_CASE("a strong path-KL penalty keeps the policy closer to the pretrained one") {
  const SequenceSpec spec(2, Vocab::make(3));
  const auto g = build_generator(GeneratorKind::uniform, spec.vocab());
  const auto s = NoiseSchedule::standard();
  const auto pre = random_params(spec, 4);
  auto cfg = small_config();
  cfg.S = 10;
  const auto free_run = sepo_train(pre, motif_count({0, 1}), g, s, cfg);
  cfg.alpha = 10.0;
  const auto tied = sepo_train(pre, motif_count({0, 1}), g, s, cfg);
  SamplerConfig sc;
  sc.n_steps = 16;
  Rng rng(8);
  std::vector<Trajectory> trajs;
  for (int k = 0; k < 64; ++k) {
    trajs.push_back(sample_trajectory(sc, pre, g, s, {}, rng));
  }
  const double kl_free = path_kl(*free_run.model, pre, trajs, g, s).value;
  const double kl_tied = path_kl(*tied.model, pre, trajs, g, s).value;
  CHECK(kl_tied < kl_free);
}

TEST_CASE("evaluation statistics") {
  const SequenceSpec spec(2, Vocab::make(3));
  const auto g = build_generator(GeneratorKind::uniform, spec.vocab());
  const auto s = NoiseSchedule::standard();
  const auto pre = random_params(spec, 1);
  SamplerConfig sc;
  sc.n_steps = 8;
  const auto e = evaluate_policy(pre, constant_reward(2.5), 40, sc, g, s);
  CHECK(e.mean == 2.5);
  CHECK(e.median == 2.5);
  CHECK(e.std == 0.0);
  CHECK(e.samples.size() == 40);
  const auto e2 = evaluate_policy(pre, motif_count({0, 1}), 40, sc, g, s);
  CHECK(e2.samples == evaluate_policy(pre, motif_count({0, 1}), 40, sc, g, s).samples);
  const auto m = summarize_rewards({{0, 1}, {0, 0}, {0, 1}, {1, 1}}, motif_count({0, 1}));
  CHECK(m.median == 0.5);
  CHECK(m.mean == 0.5);
  CHECK(m.std == 0.5);
  CHECK_THROWS_AS(static_cast<void>(evaluate_policy(pre, constant_reward(1), 0, sc, g, s)), ConfigError);
}

TEST_CASE("gradient-norm trace") {
  RunLog log;
  for (int s = 1; s <= 10; ++s) {
    IterationRecord r;
    r.iter = s;
    r.grad_norm = 1.0;
    log.records.push_back(r);
  }
  CHECK_THROWS_AS(static_cast<void>(gradient_norm_trace(log)), LengthError);
  log.records.clear();
  // grad_norm^2 = 1/s makes the running mean decay roughly like log(s)/s.
  for (int s = 1; s <= 64; ++s) {
    IterationRecord r;
    r.iter = s;
    r.grad_norm = 1.0 / std::sqrt(static_cast<double>(s));
    log.records.push_back(r);
  }
  const auto t = gradient_norm_trace(log);
  CHECK(t.defined);
  CHECK(t.slope < -0.5);
  CHECK(t.running_mean[1] == doctest::Approx(0.75));
  for (auto& r : log.records) {
    r.grad_norm = 0.0;
  }
  CHECK_FALSE(gradient_norm_trace(log).defined);
}

TEST_CASE("run log CSV layout") {
  RunLog log;
  IterationRecord r;
  r.iter = 3;
  r.mean_reward = 1.5;
  log.records.push_back(r);
  std::ostringstream out;
  log.write_csv(out);
  const auto text = out.str();
  CHECK(text.rfind("iter,mean_reward,median_reward,surrogate_loss,path_kl,grad_norm,clip_frac,wall_ms\n", 0) == 0);
  CHECK(text.find("\n3,1.5,") != std::string::npos);
}
