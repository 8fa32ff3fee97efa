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
#include <limits>
#include <memory>
#include <random>

#include <doctest.h>

#include "sepo/errors.hpp"
#include "sepo/estimators.hpp"
#include "sepo/oracle.hpp"
#include "sepo/rewards.hpp"
#include "sepo/score.hpp"
#include "support.hpp"

using namespace sepo;

namespace {

struct Fixture {
  SequenceSpec spec{2, Vocab::make(3)};
  TokenGenerator g = build_generator(GeneratorKind::uniform, Vocab::make(3));
  NoiseSchedule s = NoiseSchedule::standard();
  std::shared_ptr<ScoreParams> old;

  Fixture() {
    ScoreParams p(spec, GeneratorKind::uniform, 1.0, {2, false});
    std::mt19937_64 rng(13);
    std::normal_distribution<double> nd(0.0, 0.3);
    auto theta = p.parameters();
    for (auto& v : theta) {
      v = nd(rng);
    }
    old = std::make_shared<ScoreParams>(dynamic_cast<const ScoreParams&>(*p.with_parameters(theta)));
  }

  RolloutBatch batch(int n, std::uint64_t seed) const {
    RolloutBatch b;
    SamplerConfig cfg;
    cfg.n_steps = 16;
    cfg.seed = seed;
    b.samples = sample_batch(cfg, *old, g, s, n);
    const auto reward = motif_count({0, 1});
    for (const auto& x : b.samples) {
      b.rewards.push_back(reward(x) + 0.5);
    }
    b.advantages = b.rewards;
    b.skip.assign(b.samples.size(), 0);
    b.old_score = old;
    b.tau = 0.25;
    return b;
  }
};

}  // namespace

TEST_CASE("SNIS is the harmonic mean of the conditionals") {
  const std::vector<double> c{0.5, 0.25};
  CHECK(snis_marginal(c).value == doctest::Approx(1.0 / 3.0));
  const std::vector<double> one{0.7};
  CHECK(snis_marginal(one).value == doctest::Approx(0.7));
  CHECK(snis_marginal(one).M == 1);
  const std::vector<double> bad{0.5, 0.0};
  CHECK_THROWS_AS(static_cast<void>(snis_marginal(bad)), DomainError);
  CHECK_THROWS_AS(static_cast<void>(snis_marginal(std::vector<double>{})), DomainError);
}

TEST_CASE("SNIS proposals and their reweighting") {
  const Fixture f;
  Rng rng(4);
  const Sequence y{1, 2};
  const SnisOptions opts{8, 0.25, 64};
  const auto pr = draw_snis_proposals(y, 0.3, *f.old, f.g, f.s, opts, rng);
  CHECK(pr.z.size() == 8);
  CHECK(pr.conditionals.size() == 8);
  CHECK(pr.dt == doctest::Approx(snis_step_size(y, 0.3, *f.old, f.g, f.s, opts)));
  const double hm = snis_marginal(pr.conditionals).value;
  CHECK(reweighted_marginal(pr, *f.old, f.g, f.s) == doctest::Approx(hm).epsilon(1e-12));
  for (std::size_t i = 0; i < pr.z.size(); ++i) {
    CHECK(corrector_kernel(pr.z[i], 0.3, pr.dt, *f.old, f.g, f.s).transition_prob(y) ==
          doctest::Approx(pr.conditionals[i]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(static_cast<void>(snis_step_size(y, 0.3, *f.old, f.g, f.s, {4, 0.0, 64})), ConfigError);

  const Sequence x{1, 1};
  const auto single = single_sample_proposal(y, x, 0.3, *f.old, f.g, f.s, opts);
  REQUIRE(single.conditionals.size() == 1);
  CHECK(single.z.front() == x);
}

TEST_CASE("neighbourhoods") {
  const Fixture f;
  const Sequence x{0, 1};
  CHECK(neighborhood(x, *f.old, 0.3, false).size() == 4);
  CHECK(neighborhood(x, *f.old, 0.3, true).size() == 4);
  const auto teacher = teacher_score(f.g, f.s, SimplexDist::uniform(f.spec));
  CHECK(neighborhood(x, teacher, 0.3, true).size() == 8);
}

TEST_CASE("importance ratio and clipped weights") {
  CHECK(clipped_weight_ppo(1.5, 1.0, 0.2) == doctest::Approx(1.2));
  CHECK(clipped_weight_ppo(1.5, -1.0, 0.2) == doctest::Approx(-1.5));
  CHECK(clipped_weight_ppo(0.5, 1.0, 0.2) == doctest::Approx(0.5));
  CHECK(clipped_weight_ppo(0.5, -1.0, 0.2) == doctest::Approx(-0.8));
  CHECK_THROWS_AS(static_cast<void>(clipped_weight_ppo(1.0, 1.0, 0.0)), ConfigError);

  const Fixture f;
  const Sequence x{0, 1}, y{0, 2};
  auto theta = f.old->parameters();
  theta[f.old->index(f.old->bucket(0.3), 1, 1, 2)] += std::log(2.0);
  const auto fresh = f.old->with_parameters(theta);
  CHECK(is_ratio(x, y, *fresh, *f.old, 0.3, 0.1, 0.3) == doctest::Approx(1.5));
  CHECK(is_ratio(x, y, *fresh, *f.old, 0.3, 0.1, 0.3, IsForm::single_factor) == doctest::Approx(0.5));
  CHECK_THROWS_AS(static_cast<void>(is_ratio(x, y, *fresh, *f.old, 0.0, 0.1, 0.3)), DomainError);
}

TEST_CASE("group advantages") {
  const std::vector<double> r{1, 2, 3};
  const auto a = grpo_advantages(r);
  CHECK_FALSE(a.degenerate);
  CHECK(a.values[0] == doctest::Approx(-1.2247448714));
  CHECK(a.values[1] == doctest::Approx(0.0));
  CHECK(a.values[2] == doctest::Approx(1.2247448714));
  const std::vector<double> flat{2, 2, 2, 2};
  const auto d = grpo_advantages(flat);
  CHECK(d.degenerate);
  CHECK(d.values == std::vector<double>(4, 0.0));
  CHECK_THROWS_AS(static_cast<void>(grpo_advantages(std::vector<double>{1.0})), ConfigError);
}

TEST_CASE("EMA baseline starts at the first batch mean and then lags") {
  EmaBaseline b(0.9);
  CHECK_FALSE(b.initialized());
  const auto a1 = b.advantages(std::vector<double>{1.0, 3.0});
  CHECK(a1[0] == doctest::Approx(-1.0));
  CHECK(b.value() == doctest::Approx(2.0));
  const auto a2 = b.advantages(std::vector<double>{12.0});
  CHECK(a2[0] == doctest::Approx(10.0));
  CHECK(b.value() == doctest::Approx(0.9 * 2.0 + 0.1 * 12.0));
}

TEST_CASE("REINFORCE gradient vanishes for zero reward and agrees with the IS form at theta_old") {
  const Fixture f;
  auto b = f.batch(64, 3);
  populate_marginals(b, f.g, f.s, MarginalMode::snis, SnisOptions{}, 9);
  const auto rg = reinforce_gradient(b, *f.old);
  const auto ig = is_gradient(b, *f.old);
  for (std::size_t k = 0; k < rg.size(); ++k) {
    CHECK(ig[k] == doctest::Approx(rg[k]).epsilon(1e-12));
  }
  auto zero = b;
  zero.rewards.assign(zero.size(), 0.0);
  for (double v : reinforce_gradient(zero, *f.old)) {
    CHECK(v == 0.0);
  }
}

TEST_CASE("surrogate gradient at theta_old is the advantage-weighted IS gradient") {
  const Fixture f;
  auto b = f.batch(64, 5);
  const auto g = grpo_advantages(b.rewards);
  b.advantages = g.values;
  populate_marginals(b, f.g, f.s, MarginalMode::snis, SnisOptions{}, 2);
  const auto sur = surrogate_loss(b, *f.old, 0.2, Variant::ppo);
  CHECK(sur.clip_fraction == 0.0);
  auto as_reward = b;
  as_reward.rewards = b.advantages;
  const auto ig = is_gradient(as_reward, *f.old);
  double scale = 0.0;
  for (double v : ig) {
    scale = std::max(scale, std::abs(v));
  }
  for (std::size_t k = 0; k < ig.size(); ++k) {
    CHECK(std::abs(sur.gradient[k] - ig[k]) <= 1e-10 * std::max(scale, 1.0));
  }

  auto flat = b;
  flat.advantages.assign(flat.size(), 0.0);
  const auto z = surrogate_loss(flat, *f.old, 0.2, Variant::ppo);
  CHECK(z.loss == 0.0);
  for (double v : z.gradient) {
    CHECK(v == 0.0);
  }
}

TEST_CASE("refresh leaves q_hat at q_old under the drawing score") {
  const Fixture f;
  auto b = f.batch(16, 8);
  populate_marginals(b, f.g, f.s, MarginalMode::snis, SnisOptions{}, 1);
  auto r = b;
  refresh_marginals(r, *f.old, f.g, f.s);
  for (std::size_t k = 0; k < b.size(); ++k) {
    for (std::size_t j = 0; j < b.terms[k].size(); ++j) {
      CHECK(r.terms[k][j].q_hat == doctest::Approx(b.terms[k][j].q_old).epsilon(1e-12));
    }
  }
  RolloutBatch broken = b;
  broken.rewards.pop_back();
  CHECK_THROWS_AS(broken.validate(), StateError);
}

TEST_CASE("path KL integrand") {
  CHECK(path_kl_integrand(1.0, 1.0) == 0.0);
  CHECK(path_kl_integrand(2.0, 0.0) == 2.0);
  CHECK(std::isinf(path_kl_integrand(0.0, 1.0)));
  CHECK(path_kl_integrand(1.0, std::exp(1.0)) == doctest::Approx(1.0));
  CHECK_THROWS_AS(static_cast<void>(path_kl_integrand(-1.0, 1.0)), DomainError);
}

TEST_CASE("path KL gradient matches finite differences") {
  const Fixture f;
  SamplerConfig cfg;
  cfg.n_steps = 8;
  Rng rng(6);
  std::vector<Trajectory> trajs;
  for (int k = 0; k < 4; ++k) {
    trajs.push_back(sample_trajectory(cfg, *f.old, f.g, f.s, {}, rng));
  }
  const ScoreParams pre(f.spec, GeneratorKind::uniform, 1.0, {2, false});
  const auto grad = path_kl_gradient(*f.old, pre, trajs, f.g, f.s);
  auto theta = f.old->parameters();
  for (std::size_t k = 0; k < theta.size(); ++k) {
    auto hi = theta, lo = theta;
    hi[k] += 1e-6;
    lo[k] -= 1e-6;
    const double fd = (path_kl(*f.old->with_parameters(hi), pre, trajs, f.g, f.s).value -
                       path_kl(*f.old->with_parameters(lo), pre, trajs, f.g, f.s).value) /
                      2e-6;
    CHECK(grad[k] == doctest::Approx(fd).epsilon(1e-5).scale(1e-6));
  }
}

TEST_CASE("first variations") {
  const SequenceSpec spec(1, Vocab::make(2));
  const SimplexDist p(spec, {0.25, 0.75}), q(spec, {0.5, 0.5});
  const auto reward = constant_reward(3.0);
  CHECK(first_variation(Functional::expected_reward, p, &reward, nullptr) == std::vector<double>{3.0, 3.0});
  const auto f = first_variation(Functional::kl_vs_ref, p, nullptr, &q);
  CHECK(f[0] == doctest::Approx(std::log(0.5) + 1.0));
  CHECK(f[1] == doctest::Approx(std::log(1.5) + 1.0));
  const SimplexDist pm = SimplexDist::point_mass(spec, Sequence{1});
  CHECK(std::isinf(first_variation(Functional::kl_vs_ref, pm, nullptr, &q)[0]));
  CHECK_THROWS_AS(static_cast<void>(first_variation(Functional::expected_reward, p, nullptr, nullptr)), ConfigError);
}
