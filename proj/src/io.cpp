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

#include "sepo/io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "sepo/errors.hpp"

namespace sepo {

std::vector<Sequence> read_sequences(std::istream& in, const SequenceSpec& spec) {
  std::vector<Sequence> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') {
      continue;
    }
    std::istringstream ls(line);
    Sequence x;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        x.push_back(std::stoi(tok, &used));
        if (used != tok.size()) {
          throw ConfigError("");
        }
      } catch (const std::exception&) {
        throw ConfigError("sequence file line " + std::to_string(lineno) + ": bad token '" + tok + "'");
      }
    }
    try {
      spec.validate(x);
    } catch (const DomainError& e) {
      throw ConfigError("sequence file line " + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<Sequence> read_sequences_file(const std::string& path, const SequenceSpec& spec) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read sequence file: " + path);
  }
  return read_sequences(in, spec);
}

void write_sequences(std::ostream& out, const std::vector<Sequence>& seqs, const std::string& header) {
  if (!header.empty()) {
    out << "# " << header << '\n';
  }
  for (const auto& x : seqs) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      out << (i ? " " : "") << x[i];
    }
    out << '\n';
  }
}

void write_sequences_file(const std::string& path, const std::vector<Sequence>& seqs, const std::string& header) {
  std::ofstream out(path);
  if (!out) {
    throw ConfigError("cannot write sequence file: " + path);
  }
  write_sequences(out, seqs, header);
}

}  // namespace sepo
