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

#ifndef SEPO_VERIFY_HPP
#define SEPO_VERIFY_HPP

#include <string>
#include <vector>

namespace sepo {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Oracle-backed invariant suite behind `sepo oracle-verify`. Deterministic; a few seconds.
std::vector<CheckResult> run_oracle_suite(unsigned long long seed = 0);

}  // namespace sepo

#endif  // SEPO_VERIFY_HPP
