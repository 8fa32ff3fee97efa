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

#ifndef SEPO_CLI_HPP
#define SEPO_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace sepo {

/// Exit statuses of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitConfig = 2;

/**
 * Runs one `sepo` subcommand. `args` excludes the program name.
 *
 * Subcommands: pretrain, finetune, sample, evaluate, oracle-verify.
 */
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sepo

#endif  // SEPO_CLI_HPP
