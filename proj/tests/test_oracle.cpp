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

#include <doctest.h>
#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "sepo/errors.hpp"
#include "sepo/oracle.hpp"
#include "sepo/rewards.hpp"
#include "sepo/score.hpp"
#include "support.hpp"

using namespace sepo;

namespace {

// Full-space generator as a Kronecker sum of the token generator, built without the library's matvec.
Eigen::MatrixXd full_generator(const TokenGenerator& g, int n) {
  const int m = g.vocab().size;
  Eigen::MatrixXd b(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      b(i, j) = g.base()(i, j);
    }
  }
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(1, 1);
  for (int k = 0; k < n; ++k) {
    const auto d = q.rows();
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(d * m, d * m);
    for (Eigen::Index r = 0; r < d; ++r) {
      for (Eigen::Index c = 0; c < d; ++c) {
        next.block(r * m, c * m, m, m) += q(r, c) * Eigen::MatrixXd::Identity(m, m);
      }
      next.block(r * m, r * m, m, m) += b;
    }
    q = next;
  }
  return q;
}

}  // namespace

TEST_CASE("forward marginals match the matrix exponential of the full generator") {
  const SequenceSpec spec(2, Vocab::make(3));
  const NoiseSchedule s(ScheduleKind::geometric, 0.01, 3.0, 1.0);
  std::mt19937_64 rng(8);
  const SimplexDist p0(spec, sepo::testing::random_simplex(9, rng));
  for (auto kind : {GeneratorKind::uniform, GeneratorKind::absorbing}) {
    const auto g = build_generator(kind, kind == GeneratorKind::uniform ? Vocab::make(3) : Vocab::make(3, 2));
    const Eigen::MatrixXd Q = full_generator(g, 2);
    Eigen::VectorXd v(9);
    for (int k = 0; k < 9; ++k) {
      v(k) = p0[k];
    }
    const Eigen::VectorXd want = (s.cumulative(0.7) * Q).exp() * v;
    const auto got = exact_forward_marginals(p0, g, s, 0.7);
    for (int k = 0; k < 9; ++k) {
      CHECK(std::abs(got[k] - want(k)) < 1e-8);
    }
    std::vector<double> out(9);
    apply_forward_generator(spec, g, s, 0.7, p0.probs(), out);
    const Eigen::VectorXd qv = s.rate(0.7) * Q * v;
    for (int k = 0; k < 9; ++k) {
      CHECK(out[k] == doctest::Approx(qv(k)).epsilon(1e-12));
    }
  }
}

TEST_CASE("exact ratios and reference distributions") {
  const SequenceSpec spec(2, Vocab::make(2));
  const SimplexDist p(spec, {0.1, 0.2, 0.3, 0.4});
  const auto r = exact_ratios(p, Sequence{0, 1});
  CHECK(r.at(0, 1) == doctest::Approx(2.0));
  CHECK(r.at(1, 0) == doctest::Approx(0.5));
  const SimplexDist z(spec, {0.0, 0.5, 0.5, 0.0});
  CHECK_THROWS_AS(static_cast<void>(exact_ratios(z, Sequence{0, 0})), DomainError);

  const auto ga = build_generator(GeneratorKind::absorbing, Vocab::make(2, 1));
  const SequenceSpec mspec(2, Vocab::make(2, 1));
  CHECK(reference_distribution(mspec, ga).prob(Sequence{1, 1}) == 1.0);
  const auto gu = build_generator(GeneratorKind::uniform, Vocab::make(2));
  CHECK(reference_distribution(spec, gu)[2] == doctest::Approx(0.25));
}

TEST_CASE("teacher reverse process recovers the forward marginal") {
  const SequenceSpec spec(2, Vocab::make(3));
  const auto g = build_generator(GeneratorKind::uniform, Vocab::make(3));
  const NoiseSchedule s(ScheduleKind::linear, 0.5, 6.0, 1.0);
  std::mt19937_64 rng(21);
  const SimplexDist p0(spec, sepo::testing::random_simplex(9, rng));
  const auto teacher = teacher_score(g, s, p0);
  // Started from uniform rather than p_T, so allow for the residual mixing gap.
  const auto q = exact_policy_dist(teacher, g, s, 0.8, {1024, Integrator::rk4});
  const auto pt = teacher.marginal(0.2);
  const double gap = total_variation(teacher.marginal(1.0).probs(), SimplexDist::uniform(spec).probs());
  CHECK(total_variation(q.probs(), pt.probs()) <= gap + 1e-6);
}

TEST_CASE("loss gradient is the reward contracted with the policy Jacobian") {
  const SequenceSpec spec(2, Vocab::make(2));
  const auto g = build_generator(GeneratorKind::uniform, Vocab::make(2));
  const NoiseSchedule s(ScheduleKind::linear, 0.1, 3.0, 1.0);
  ScoreParams p(spec, GeneratorKind::uniform, 1.0, {2, false});
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd(0.0, 0.4);
  auto theta = p.parameters();
  for (auto& v : theta) {
    v = nd(rng);
  }
  const auto model = p.with_parameters(theta);
  const auto reward = motif_count({0, 1});
  const auto table = reward_table(spec, reward);
  const auto grad = exact_loss_gradient_fd(*model, reward, g, s, 0.9);
  const auto jac = policy_jacobian_fd(*model, g, s, 0.9);
  const std::size_t d = 4, np = theta.size();
  for (std::size_t k = 0; k < np; ++k) {
    double chain = 0.0, colsum = 0.0;
    for (std::size_t x = 0; x < d; ++x) {
      chain -= table[x] * jac[x * np + k];
      colsum += jac[x * np + k];
    }
    CHECK(std::abs(grad[k] - chain) < 1e-6);
    CHECK(std::abs(colsum) < 1e-8);
  }
}

TEST_CASE("corrector Euler step keeps mass and rejects oversized steps") {
  const SequenceSpec spec(2, Vocab::make(2));
  const auto g = build_generator(GeneratorKind::uniform, Vocab::make(2));
  const auto s = NoiseSchedule::standard();
  const ScoreParams p(spec, GeneratorKind::uniform, 1.0, {1, false});
  const SimplexDist q(spec, {0.7, 0.1, 0.1, 0.1});
  const auto next = corrector_evolve(q, p, g, s, 0.5, 0.05);
  double mass = 0.0;
  for (double v : next.probs()) {
    mass += v;
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(next[0] < 0.7);
  CHECK_THROWS_AS(static_cast<void>(corrector_evolve(q, p, g, s, 1.0, 10.0)), StepSizeError);
}
