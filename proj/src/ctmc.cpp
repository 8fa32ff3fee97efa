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

#include "sepo/ctmc.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "sepo/errors.hpp"

namespace sepo {

Vocab Vocab::make(int size, std::optional<Token> mask) {
  if (size < 2) {
    throw ConfigError("vocabulary size must be at least 2, got " + std::to_string(size));
  }
  if (mask && (*mask < 0 || *mask >= size)) {
    throw ConfigError("mask index " + std::to_string(*mask) + " outside vocabulary of size " + std::to_string(size));
  }
  return Vocab{size, mask};
}

SequenceSpec::SequenceSpec(int length, Vocab vocab) : length_(length), vocab_(vocab) {
  if (length < 1) {
    throw ConfigError("sequence length must be at least 1");
  }
  vocab_ = Vocab::make(vocab.size, vocab.mask);
}

std::uint64_t SequenceSpec::state_count() const {
  constexpr std::uint64_t kLimit = std::uint64_t{1} << 62;
  std::uint64_t d = 1;
  for (int i = 0; i < length_; ++i) {
    if (d > kLimit / static_cast<std::uint64_t>(vocab_.size)) {
      throw CapacityError("state space m^n is not representable");
    }
    d *= static_cast<std::uint64_t>(vocab_.size);
  }
  return d;
}

void SequenceSpec::require_oracle_size(std::uint64_t cap) const {
  const auto d = state_count();
  if (d > cap) {
    throw CapacityError("state space of size " + std::to_string(d) + " exceeds oracle capacity " +
                        std::to_string(cap));
  }
}

void SequenceSpec::validate(std::span<const Token> x) const {
  if (static_cast<int>(x.size()) != length_) {
    throw DomainError("sequence has length " + std::to_string(x.size()) + ", expected " + std::to_string(length_));
  }
  for (const auto a : x) {
    if (a < 0 || a >= vocab_.size) {
      throw DomainError("token " + std::to_string(a) + " outside vocabulary");
    }
  }
}

NoiseSchedule::NoiseSchedule(ScheduleKind kind, double sigma_min, double sigma_max, double horizon)
    : kind_(kind), sigma_min_(sigma_min), sigma_max_(sigma_max), horizon_(horizon) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw ConfigError("schedule horizon must be positive");
  }
  if (!(sigma_min >= 0.0) || !(sigma_max >= 0.0) || !std::isfinite(sigma_min) || !std::isfinite(sigma_max)) {
    throw ConfigError("schedule rates must be finite and nonnegative");
  }
  if (kind == ScheduleKind::geometric && (sigma_min <= 0.0 || sigma_max <= 0.0)) {
    throw ConfigError("geometric schedule needs strictly positive rates");
  }
}

double NoiseSchedule::rate(double tau) const {
  const double s = tau / horizon_;
  switch (kind_) {
    case ScheduleKind::linear:
      return sigma_min_ + (sigma_max_ - sigma_min_) * s;
    case ScheduleKind::geometric:
      return std::pow(sigma_min_, 1.0 - s) * std::pow(sigma_max_, s);
  }
  return 0.0;
}

double NoiseSchedule::cumulative(double tau) const {
  switch (kind_) {
    case ScheduleKind::linear:
      return sigma_min_ * tau + (sigma_max_ - sigma_min_) * tau * tau / (2.0 * horizon_);
    case ScheduleKind::geometric: {
      const double log_ratio = std::log(sigma_max_ / sigma_min_);
      if (std::abs(log_ratio) < 1e-12) {
        return sigma_min_ * tau;
      }
      return sigma_min_ * horizon_ / log_ratio * std::expm1(log_ratio * tau / horizon_);
    }
  }
  return 0.0;
}

std::uint64_t NoiseSchedule::fingerprint() const {
  // FNV-1a over the raw parameter bits.
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  mix(static_cast<std::uint64_t>(kind_));
  mix(std::bit_cast<std::uint64_t>(sigma_min_));
  mix(std::bit_cast<std::uint64_t>(sigma_max_));
  mix(std::bit_cast<std::uint64_t>(horizon_));
  return h;
}

TokenMatrix TokenMatrix::operator*(const TokenMatrix& rhs) const {
  TokenMatrix out(m_);
  for (int i = 0; i < m_; ++i) {
    for (int k = 0; k < m_; ++k) {
      const double a = (*this)(i, k);
      for (int j = 0; j < m_; ++j) {
        out(i, j) += a * rhs(k, j);
      }
    }
  }
  return out;
}

TokenGenerator build_generator(GeneratorKind kind, const Vocab& vocab) {
  const auto v = Vocab::make(vocab.size, vocab.mask);
  const int m = v.size;
  TokenGenerator g;
  g.kind_ = kind;
  g.vocab_ = v;
  g.base_ = TokenMatrix(m);
  switch (kind) {
    case GeneratorKind::uniform:
      for (int target = 0; target < m; ++target) {
        for (int source = 0; source < m; ++source) {
          g.base_(target, source) = target == source ? -static_cast<double>(m - 1) / m : 1.0 / m;
        }
      }
      break;
    case GeneratorKind::absorbing: {
      if (!v.mask) {
        throw ConfigError("absorbing generator requires a mask index");
      }
      const int mask = *v.mask;
      for (int source = 0; source < m; ++source) {
        if (source == mask) {
          continue;
        }
        g.base_(mask, source) = 1.0;
        g.base_(source, source) = -1.0;
      }
      break;
    }
  }
  return g;
}

TokenMatrix transition_kernel(const TokenGenerator& g, const NoiseSchedule& sched, double tau_start,
                              double tau_end) {
  if (tau_start > tau_end) {
    throw OrderingError("transition_kernel requires tau_start <= tau_end");
  }
  if (tau_start < 0.0 || tau_end > sched.horizon() * (1.0 + 1e-12)) {
    throw DomainError("transition_kernel times must lie in [0, T]");
  }
  const int m = g.vocab().size;
  const double noise = sched.cumulative(tau_end) - sched.cumulative(tau_start);
  const double survive = std::exp(-noise);
  const double moved = -std::expm1(-noise);
  TokenMatrix k(m);
  switch (g.kind()) {
    case GeneratorKind::uniform:
      for (int target = 0; target < m; ++target) {
        for (int source = 0; source < m; ++source) {
          k(target, source) = moved / m + (target == source ? survive : 0.0);
        }
      }
      break;
    case GeneratorKind::absorbing: {
      const int mask = *g.vocab().mask;
      for (int source = 0; source < m; ++source) {
        if (source == mask) {
          k(mask, mask) = 1.0;
        } else {
          k(source, source) = survive;
          k(mask, source) = moved;
        }
      }
      break;
    }
  }
  return k;
}

NeighborTable::NeighborTable(Sequence anchor, int vocab_size, double tau)
    : anchor_(std::move(anchor)), m_(vocab_size), tau_(tau), values_(anchor_.size() * vocab_size, 0.0) {}

double RateTable::exit_rate(int pos) const {
  double total = 0.0;
  const Token own = rates_.anchor()[pos];
  for (Token a = 0; a < rates_.vocab_size(); ++a) {
    if (a != own) {
      total += rates_.at(pos, a);
    }
  }
  return total;
}

double RateTable::exit_rate() const {
  double total = 0.0;
  for (int i = 0; i < rates_.length(); ++i) {
    total += exit_rate(i);
  }
  return total;
}

RateTable forward_rates(const TokenGenerator& g, const NoiseSchedule& sched, double tau, std::span<const Token> x) {
  const int m = g.vocab().size;
  const double sigma = sched.rate(tau);
  NeighborTable out(Sequence(x.begin(), x.end()), m, tau);
  for (int i = 0; i < static_cast<int>(x.size()); ++i) {
    for (Token a = 0; a < m; ++a) {
      if (a != x[i]) {
        out.at(i, a) = sigma * g.rate(a, x[i]);
      }
    }
  }
  return RateTable(std::move(out));
}

RateTable reverse_rates(const TokenGenerator& g, const NoiseSchedule& sched, double tau, std::span<const Token> x,
                        const NeighborTable& ratios) {
  const int m = g.vocab().size;
  const double sigma = sched.rate(tau);
  NeighborTable out(Sequence(x.begin(), x.end()), m, tau);
  for (int i = 0; i < static_cast<int>(x.size()); ++i) {
    for (Token a = 0; a < m; ++a) {
      if (a == x[i]) {
        continue;
      }
      const double forward = g.rate(x[i], a);
      if (forward == 0.0) {
        continue;
      }
      const double r = ratios.at(i, a);
      if (r < 0.0 || std::isnan(r)) {
        throw DomainError("negative concrete-score ratio");
      }
      out.at(i, a) = r * sigma * forward;
    }
  }
  return RateTable(std::move(out));
}

RateTable corrector_rates(const TokenGenerator& g, const NoiseSchedule& sched, double tau, std::span<const Token> x,
                          const NeighborTable& ratios) {
  auto fwd = forward_rates(g, sched, tau, x).table();
  const auto rev = reverse_rates(g, sched, tau, x, ratios);
  for (int i = 0; i < fwd.length(); ++i) {
    for (Token a = 0; a < fwd.vocab_size(); ++a) {
      fwd.at(i, a) += rev.rate(i, a);
    }
  }
  return RateTable(std::move(fwd));
}

int hamming_distance(std::span<const Token> a, std::span<const Token> b) {
  if (a.size() != b.size()) {
    throw DomainError("hamming_distance: length mismatch");
  }
  int dist = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dist += a[i] != b[i] ? 1 : 0;
  }
  return dist;
}

int differing_position(std::span<const Token> x, std::span<const Token> y) {
  if (x.size() != y.size()) {
    throw AdjacencyError("sequences of different length are not neighbours");
  }
  int pos = -1;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] != y[i]) {
      if (pos >= 0) {
        throw AdjacencyError("sequences differ at more than one position");
      }
      pos = static_cast<int>(i);
    }
  }
  if (pos < 0) {
    throw AdjacencyError("a sequence is not its own neighbour");
  }
  return pos;
}

}  // namespace sepo
