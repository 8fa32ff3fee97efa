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

#include "sepo/ctmc.hpp"
#include "sepo/errors.hpp"

namespace {

using sepo::GeneratorKind;
using sepo::NoiseSchedule;
using sepo::ScheduleKind;
using sepo::Vocab;

Eigen::MatrixXd dense(const sepo::TokenMatrix& a) {
  Eigen::MatrixXd out(a.size(), a.size());
  for (int i = 0; i < a.size(); ++i) {
    for (int j = 0; j < a.size(); ++j) {
      out(i, j) = a(i, j);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("base generators have zero column sums and the documented entries") {
  for (int m : {2, 3, 5}) {
    const auto g = sepo::build_generator(GeneratorKind::uniform, Vocab::make(m));
    for (int j = 0; j < m; ++j) {
      double col = 0.0;
      for (int i = 0; i < m; ++i) {
        col += g.base()(i, j);
        if (i != j) {
          CHECK(g.base()(i, j) == doctest::Approx(1.0 / m));
        }
      }
      CHECK(std::abs(col) < 1e-15);
    }
    const auto a = sepo::build_generator(GeneratorKind::absorbing, Vocab::make(m, m - 1));
    for (int j = 0; j < m; ++j) {
      double col = 0.0;
      for (int i = 0; i < m; ++i) {
        col += a.base()(i, j);
      }
      CHECK(std::abs(col) < 1e-15);
      CHECK(a.base()(m - 1, j) == (j == m - 1 ? 0.0 : 1.0));
    }
  }
  CHECK_THROWS_AS(sepo::build_generator(GeneratorKind::absorbing, Vocab::make(3)), sepo::ConfigError);
  CHECK_THROWS_AS(Vocab::make(1), sepo::ConfigError);
}

TEST_CASE("schedule integral matches quadrature") {
  for (auto kind : {ScheduleKind::linear, ScheduleKind::geometric}) {
    const NoiseSchedule s(kind, 0.01, 4.0, 2.0);
    const int n = 20000;
    double acc = 0.0;
    const double h = 1.3 / n;
    for (int k = 0; k < n; ++k) {
      acc += h * s.rate((k + 0.5) * h);
    }
    CHECK(s.cumulative(1.3) == doctest::Approx(acc).epsilon(1e-7));
    CHECK(s.rate(0.0) == doctest::Approx(0.01));
    CHECK(s.rate(2.0) == doctest::Approx(4.0));
  }
}

TEST_CASE("transition kernel equals the matrix exponential of the integrated generator") {
  const NoiseSchedule s(ScheduleKind::geometric, 0.05, 3.0, 1.0);
  for (auto kind : {GeneratorKind::uniform, GeneratorKind::absorbing}) {
    const auto vocab = kind == GeneratorKind::uniform ? Vocab::make(4) : Vocab::make(4, 3);
    const auto g = sepo::build_generator(kind, vocab);
    const double t0 = 0.2, t1 = 0.9;
    const Eigen::MatrixXd want = ((s.cumulative(t1) - s.cumulative(t0)) * dense(g.base())).exp();
    const Eigen::MatrixXd got = dense(sepo::transition_kernel(g, s, t0, t1));
    CHECK((want - got).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("transition kernel composes and rejects reversed times") {
  const auto g = sepo::build_generator(GeneratorKind::uniform, Vocab::make(3));
  const auto s = NoiseSchedule::standard();
  const Eigen::MatrixXd ab = dense(sepo::transition_kernel(g, s, 0.1, 0.4));
  const Eigen::MatrixXd bc = dense(sepo::transition_kernel(g, s, 0.4, 0.8));
  const Eigen::MatrixXd ac = dense(sepo::transition_kernel(g, s, 0.1, 0.8));
  CHECK((bc * ab - ac).cwiseAbs().maxCoeff() < 1e-13);
  CHECK_THROWS_AS(sepo::transition_kernel(g, s, 0.8, 0.1), sepo::OrderingError);
}

TEST_CASE("reverse rates are ratio times the forward rate of the opposite move") {
  const auto g = sepo::build_generator(GeneratorKind::uniform, Vocab::make(3));
  const auto s = NoiseSchedule::standard();
  const sepo::Sequence x{0, 2};
  sepo::NeighborTable ratios(x, 3, 0.5);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int i = 0; i < 2; ++i) {
    for (int a = 0; a < 3; ++a) {
      if (a != x[i]) {
        ratios.at(i, a) = u(rng);
      }
    }
  }
  const auto rev = sepo::reverse_rates(g, s, 0.5, x, ratios);
  const auto fwd = sepo::forward_rates(g, s, 0.5, x);
  const auto cor = sepo::corrector_rates(g, s, 0.5, x, ratios);
  double total = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int a = 0; a < 3; ++a) {
      if (a == x[i]) {
        continue;
      }
      CHECK(rev.rate(i, a) == doctest::Approx(ratios.at(i, a) * s.rate(0.5) / 3.0));
      CHECK(cor.rate(i, a) == doctest::Approx(rev.rate(i, a) + fwd.rate(i, a)));
      total += rev.rate(i, a);
    }
  }
  CHECK(rev.exit_rate() == doctest::Approx(total));
  CHECK(rev.diagonal() == doctest::Approx(-total));

  ratios.at(0, 1) = -1.0;
  CHECK_THROWS_AS(sepo::reverse_rates(g, s, 0.5, x, ratios), sepo::DomainError);
}

TEST_CASE("hamming helpers") {
  const sepo::Sequence a{0, 1, 2}, b{0, 2, 2}, c{1, 2, 2};
  CHECK(sepo::hamming_distance(a, b) == 1);
  CHECK(sepo::hamming_distance(a, c) == 2);
  CHECK(sepo::differing_position(a, b) == 1);
  CHECK_THROWS_AS(sepo::differing_position(a, c), sepo::AdjacencyError);
  CHECK_THROWS_AS(sepo::differing_position(a, a), sepo::AdjacencyError);
}

TEST_CASE("sequence spec validation and capacity") {
  const sepo::SequenceSpec spec(3, Vocab::make(4));
  CHECK(spec.state_count() == 64);
  CHECK_NOTHROW(spec.validate(sepo::Sequence{0, 3, 1}));
  CHECK_THROWS_AS(spec.validate(sepo::Sequence{0, 4, 1}), sepo::DomainError);
  CHECK_THROWS_AS(spec.validate(sepo::Sequence{0, 1}), sepo::DomainError);
  CHECK_THROWS_AS(spec.require_oracle_size(63), sepo::CapacityError);
  CHECK_THROWS_AS(static_cast<void>(sepo::SequenceSpec(80, Vocab::make(4)).state_count()), sepo::CapacityError);
}
