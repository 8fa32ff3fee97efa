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
#include <doctest.h>

#include "sepo/errors.hpp"
#include "sepo/rewards.hpp"

using namespace sepo;

TEST_CASE("motif count counts overlapping occurrences") {
  const auto r = motif_count({0, 0});
  CHECK(r(Sequence{0, 0, 0, 1}) == 2.0);
  CHECK(r(Sequence{1, 1}) == 0.0);
  CHECK(motif_count({0, 1})(Sequence{0, 1, 0, 1}) == 2.0);
  CHECK(motif_count({0, 1, 2})(Sequence{0, 1}) == 0.0);
  CHECK_THROWS_AS(static_cast<void>(motif_count({})), ConfigError);
}

TEST_CASE("target composition and parity") {
  const auto c = target_composition(1, 0.5);
  CHECK(c(Sequence{1, 1, 0, 0}) == 0.0);
  CHECK(c(Sequence{1, 1, 1, 1}) == doctest::Approx(-0.5));
  CHECK(parity(0)(Sequence{1, 1}) == 1.0);
  CHECK(parity(1)(Sequence{1, 1}) == 0.0);
  CHECK(parity(1)(Sequence{2, 1}) == 1.0);
  CHECK_THROWS_AS(static_cast<void>(parity(2)), ConfigError);
}

TEST_CASE("reward registry") {
  CHECK(make_reward("motif_count", {{"pattern", "1 2"}})(Sequence{1, 2, 1, 2}) == 2.0);
  CHECK(make_reward("target_composition", {{"token", "2"}, {"target", "0.25"}})(Sequence{2, 0, 0, 0}) == 0.0);
  CHECK(make_reward("parity", {})(Sequence{0, 2}) == 1.0);
  CHECK_THROWS_AS(static_cast<void>(make_reward("nope", {})), ConfigError);
  CHECK_THROWS_AS(static_cast<void>(make_reward("parity", {{"colour", "red"}})), ConfigError);
  CHECK_THROWS_AS(static_cast<void>(make_reward("target_composition", {{"target", "half"}})), ConfigError);
  CHECK_THROWS_AS(static_cast<void>(make_reward("motif_count", {{"pattern", "0 x"}})), ConfigError);
  for (const auto& name : reward_names()) {
    CHECK_NOTHROW(static_cast<void>(make_reward(name, {})));
  }
}

TEST_CASE("reward table follows the codec order") {
  const SequenceSpec spec(2, Vocab::make(2));
  const auto t = reward_table(spec, motif_count({0, 1}));
  CHECK(t == std::vector<double>{0.0, 1.0, 0.0, 0.0});
}
