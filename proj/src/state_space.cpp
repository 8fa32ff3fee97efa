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

#include "sepo/state_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sepo/errors.hpp"

namespace sepo {

IndexCodec::IndexCodec(SequenceSpec spec) : spec_(std::move(spec)), size_(spec_.state_count()) {
  const int n = spec_.length();
  strides_.assign(n, 1);
  for (int i = n - 2; i >= 0; --i) {
    strides_[i] = strides_[i + 1] * static_cast<std::uint64_t>(spec_.vocab_size());
  }
}

std::uint64_t IndexCodec::encode(std::span<const Token> x) const {
  spec_.validate(x);
  std::uint64_t index = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    index += static_cast<std::uint64_t>(x[i]) * strides_[i];
  }
  return index;
}

Sequence IndexCodec::decode(std::uint64_t index) const {
  Sequence x(spec_.length());
  decode_into(index, x);
  return x;
}

void IndexCodec::decode_into(std::uint64_t index, std::span<Token> out) const {
  if (index >= size_) {
    throw DomainError("state index out of range");
  }
  const auto m = static_cast<std::uint64_t>(spec_.vocab_size());
  for (int i = spec_.length() - 1; i >= 0; --i) {
    out[i] = static_cast<Token>(index % m);
    index /= m;
  }
}

SimplexDist::SimplexDist(SequenceSpec spec, std::vector<double> probs, double tol)
    : spec_(std::move(spec)), probs_(std::move(probs)) {
  if (probs_.size() != spec_.state_count()) {
    throw DomainError("distribution length does not match the state space");
  }
  double total = 0.0;
  for (const double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw DomainError("distribution entries must be finite and nonnegative");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > tol) {
    throw DomainError("distribution does not sum to one");
  }
}

SimplexDist SimplexDist::uniform(const SequenceSpec& spec) {
  const auto d = spec.state_count();
  return SimplexDist(spec, std::vector<double>(d, 1.0 / static_cast<double>(d)));
}

SimplexDist SimplexDist::point_mass(const SequenceSpec& spec, std::span<const Token> x) {
  const IndexCodec codec(spec);
  std::vector<double> probs(codec.size(), 0.0);
  probs[codec.encode(x)] = 1.0;
  return SimplexDist(spec, std::move(probs));
}

SimplexDist SimplexDist::from_weights(const SequenceSpec& spec, std::vector<double> weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw DomainError("weights must have a positive finite sum");
  }
  for (auto& w : weights) {
    if (w < 0.0) {
      throw DomainError("weights must be nonnegative");
    }
    w /= total;
  }
  return SimplexDist(spec, std::move(weights));
}

SimplexDist SimplexDist::from_logits(const SequenceSpec& spec, std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  if (!std::isfinite(top)) {
    throw DomainError("logits need at least one finite entry");
  }
  std::vector<double> weights(logits.size());
  std::transform(logits.begin(), logits.end(), weights.begin(), [top](double l) { return std::exp(l - top); });
  return from_weights(spec, std::move(weights));
}

double SimplexDist::prob(std::span<const Token> x) const { return probs_[IndexCodec(spec_).encode(x)]; }

std::vector<double> propagate_factorized(const SequenceSpec& spec, std::span<const double> probs,
                                         const TokenMatrix& kernel) {
  const IndexCodec codec(spec);
  const int m = spec.vocab_size();
  std::vector<double> cur(probs.begin(), probs.end());
  std::vector<double> next(cur.size());
  for (int pos = 0; pos < spec.length(); ++pos) {
    const auto stride = codec.stride(pos);
    const auto block = stride * static_cast<std::uint64_t>(m);
    std::fill(next.begin(), next.end(), 0.0);
    for (std::uint64_t base = 0; base < cur.size(); base += block) {
      for (std::uint64_t off = 0; off < stride; ++off) {
        for (int source = 0; source < m; ++source) {
          const double mass = cur[base + source * stride + off];
          if (mass == 0.0) {
            continue;
          }
          for (int target = 0; target < m; ++target) {
            next[base + target * stride + off] += kernel(target, source) * mass;
          }
        }
      }
    }
    std::swap(cur, next);
  }
  return cur;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw DomainError("total_variation: size mismatch");
  }
  double tv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    tv += std::abs(p[i] - q[i]);
  }
  return 0.5 * tv;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw DomainError("kl_divergence: size mismatch");
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) {
      continue;
    }
    if (q[i] <= 0.0) {
      return std::numeric_limits<double>::infinity();
    }
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

}  // namespace sepo
