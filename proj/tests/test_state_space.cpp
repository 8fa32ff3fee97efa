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
#include <random>

#include <doctest.h>

#include "sepo/errors.hpp"
#include "sepo/state_space.hpp"
#include "support.hpp"

using sepo::IndexCodec;
using sepo::SequenceSpec;
using sepo::SimplexDist;
using sepo::Vocab;

TEST_CASE("codec is a bijection with the leading position most significant") {
  const SequenceSpec spec(3, Vocab::make(3));
  const IndexCodec codec(spec);
  CHECK(codec.size() == 27);
  CHECK(codec.encode(sepo::Sequence{1, 0, 2}) == 11);
  CHECK(codec.stride(0) == 9);
  for (std::uint64_t k = 0; k < codec.size(); ++k) {
    CHECK(codec.encode(codec.decode(k)) == k);
  }
}

TEST_CASE("simplex constructors") {
  const SequenceSpec spec(2, Vocab::make(2));
  const auto u = SimplexDist::uniform(spec);
  CHECK(u[3] == doctest::Approx(0.25));
  const auto pm = SimplexDist::point_mass(spec, sepo::Sequence{1, 0});
  CHECK(pm.prob(sepo::Sequence{1, 0}) == 1.0);
  CHECK(pm[0] == 0.0);
  const auto w = SimplexDist::from_weights(spec, {1, 1, 2, 0});
  CHECK(w[2] == doctest::Approx(0.5));
  const double ninf = -std::numeric_limits<double>::infinity();
  const std::vector<double> logits{0.0, std::log(3.0), ninf, 0.0};
  const auto l = SimplexDist::from_logits(spec, logits);
  CHECK(l[1] == doctest::Approx(0.6));
  CHECK(l[2] == 0.0);
  CHECK_THROWS_AS(SimplexDist(spec, {0.5, 0.5, 0.5, -0.5}), sepo::DomainError);
  CHECK_THROWS_AS(SimplexDist(spec, {0.5, 0.5, 0.5, 0.0}), sepo::DomainError);
  CHECK_THROWS_AS(SimplexDist::from_weights(spec, {0, 0, 0, 0}), sepo::DomainError);
}

TEST_CASE("divergences on hand examples") {
  const std::vector<double> p{0.5, 0.5, 0.0}, q{0.25, 0.25, 0.5};
  CHECK(sepo::total_variation(p, q) == doctest::Approx(0.5));
  CHECK(sepo::kl_divergence(p, q) == doctest::Approx(std::log(2.0)));
  CHECK(std::isinf(sepo::kl_divergence(q, p)));
  CHECK(sepo::kl_divergence(p, p) == 0.0);
}

TEST_CASE("factorized propagation matches the explicit product kernel") {
  const SequenceSpec spec(2, Vocab::make(3));
  const IndexCodec codec(spec);
  std::mt19937_64 rng(11);
  const auto p = sepo::testing::random_simplex(9, rng);
  sepo::TokenMatrix k(3);
  for (int j = 0; j < 3; ++j) {
    const auto col = sepo::testing::random_simplex(3, rng);
    for (int i = 0; i < 3; ++i) {
      k(i, j) = col[i];
    }
  }
  const auto got = sepo::propagate_factorized(spec, p, k);
  for (std::uint64_t y = 0; y < 9; ++y) {
    const auto ys = codec.decode(y);
    double want = 0.0;
    for (std::uint64_t x = 0; x < 9; ++x) {
      const auto xs = codec.decode(x);
      want += k(ys[0], xs[0]) * k(ys[1], xs[1]) * p[x];
    }
    CHECK(got[y] == doctest::Approx(want).epsilon(1e-13));
  }
}
