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

#ifndef SEPO_IO_HPP
#define SEPO_IO_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "sepo/ctmc.hpp"

namespace sepo {

/// One sequence per line, tokens as space-separated integers; `#` lines are comments.
std::vector<Sequence> read_sequences(std::istream& in, const SequenceSpec& spec);
std::vector<Sequence> read_sequences_file(const std::string& path, const SequenceSpec& spec);

/// Writes `# <header>` when the header is nonempty, then one line per sequence.
void write_sequences(std::ostream& out, const std::vector<Sequence>& seqs, const std::string& header = "");
void write_sequences_file(const std::string& path, const std::vector<Sequence>& seqs, const std::string& header = "");

}  // namespace sepo

#endif  // SEPO_IO_HPP
