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

#include "sepo/score.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "sepo/errors.hpp"

namespace sepo {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_time(double tau, double horizon) {
  if (!(tau >= -1e-12) || !(tau <= horizon * (1.0 + 1e-12))) {
    throw DomainError("score time " + std::to_string(tau) + " outside [0, T]");
  }
}

std::string hex_double(double v) {
  if (std::isinf(v)) {
    return v < 0 ? "-inf" : "inf";
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "-inf") {
    return kNegInf;
  }
  if (s == "inf") {
    return std::numeric_limits<double>::infinity();
  }
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw ConfigError("malformed number in checkpoint: " + s);
  }
  return v;
}

}  // namespace

std::vector<double> SparseGradient::to_dense(std::size_t size) const {
  std::vector<double> out(size, 0.0);
  for (const auto& [k, v] : entries) {
    out.at(k) += v;
  }
  return out;
}

double ScoreModel::ratio(std::span<const Token> x, std::span<const Token> y, double tau) const {
  const int pos = differing_position(x, y);
  return eval(x, tau).at(pos, y[pos]);
}

bool ScoreModel::is_free(std::span<const Token> x, std::span<const Token> y, double tau) const {
  return ratio(x, y, tau) > 0.0;
}

// ---------------------------------------------------------------------------------------------
// ScoreParams

ScoreParams::ScoreParams(SequenceSpec spec, GeneratorKind kind, double horizon, Layout layout)
    : spec_(std::move(spec)), kind_(kind), horizon_(horizon), layout_(layout) {
  if (layout_.buckets < 1) {
    throw ConfigError("score table needs at least one time bucket");
  }
  if (!(horizon_ > 0.0)) {
    throw ConfigError("score horizon must be positive");
  }
  if (kind_ == GeneratorKind::absorbing && !spec_.vocab().mask) {
    throw ConfigError("absorbing score table requires a mask index");
  }
  const int m = spec_.vocab_size();
  const int positions = layout_.shared_positions ? 1 : spec_.length();
  table_.assign(static_cast<std::size_t>(layout_.buckets) * positions * m * m, 0.0);
  for (int b = 0; b < layout_.buckets; ++b) {
    for (int i = 0; i < positions; ++i) {
      for (Token a = 0; a < m; ++a) {
        for (Token c = 0; c < m; ++c) {
          if (a != c && !allowed(a, c)) {
            table_[index(b, i, a, c)] = kNegInf;
          }
        }
      }
    }
  }
}

int ScoreParams::bucket(double tau) const {
  check_time(tau, horizon_);
  const int b = static_cast<int>(std::floor(tau / horizon_ * layout_.buckets));
  return std::clamp(b, 0, layout_.buckets - 1);
}

std::size_t ScoreParams::index(int bucket, int pos, Token current, Token proposed) const {
  const auto m = static_cast<std::size_t>(spec_.vocab_size());
  const std::size_t positions = layout_.shared_positions ? 1 : static_cast<std::size_t>(spec_.length());
  const std::size_t p = layout_.shared_positions ? 0 : static_cast<std::size_t>(pos);
  return ((static_cast<std::size_t>(bucket) * positions + p) * m + static_cast<std::size_t>(current)) * m +
         static_cast<std::size_t>(proposed);
}

bool ScoreParams::allowed(Token current, Token proposed) const {
  if (current == proposed) {
    return false;
  }
  if (kind_ == GeneratorKind::absorbing) {
    const Token mask = *spec_.vocab().mask;
    return current == mask && proposed != mask;
  }
  return true;
}

void ScoreParams::set_log_value(int bucket, int pos, Token current, Token proposed, double value) {
  if (!allowed(current, proposed)) {
    throw DomainError("cannot set a pinned score entry");
  }
  if (!std::isfinite(value)) {
    throw DomainError("score entries must be finite");
  }
  table_[index(bucket, pos, current, proposed)] = value;
}

NeighborTable ScoreParams::eval(std::span<const Token> x, double tau) const {
  spec_.validate(x);
  const int b = bucket(tau);
  const int m = spec_.vocab_size();
  NeighborTable out(Sequence(x.begin(), x.end()), m, tau);
  for (int i = 0; i < spec_.length(); ++i) {
    for (Token a = 0; a < m; ++a) {
      if (a != x[i]) {
        out.at(i, a) = std::exp(table_[index(b, i, x[i], a)]);
      }
    }
  }
  return out;
}

bool ScoreParams::is_free(std::span<const Token> x, std::span<const Token> y, double /*tau*/) const {
  const int pos = differing_position(x, y);
  return allowed(x[pos], y[pos]);
}

std::unique_ptr<ScoreModel> ScoreParams::with_parameters(std::span<const double> params) const {
  if (params.size() != table_.size()) {
    throw DomainError("parameter vector has the wrong length");
  }
  auto copy = std::make_unique<ScoreParams>(*this);
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (std::isfinite(copy->table_[k])) {
      copy->table_[k] = params[k];
    }
  }
  return copy;
}

void ScoreParams::accumulate_grad_log(std::span<const Token> x, std::span<const Token> y, double tau, double coeff,
                                      std::span<double> out) const {
  const int pos = differing_position(x, y);
  const auto k = index(bucket(tau), pos, x[pos], y[pos]);
  if (std::isfinite(table_[k])) {
    out[k] += coeff;
  }
}

void ScoreParams::apply_update(std::span<const double> step) {
  if (step.size() != table_.size()) {
    throw DomainError("update vector has the wrong length");
  }
  for (std::size_t k = 0; k < step.size(); ++k) {
    if (std::isfinite(table_[k])) {
      table_[k] += step[k];
    }
  }
}

std::uint64_t ScoreParams::content_hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const double v : table_) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffU;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

void ScoreParams::save(std::ostream& out, std::uint64_t schedule_fingerprint) const {
  out << "sepo-score-v1"
      << " m=" << spec_.vocab_size() << " n=" << spec_.length()
      << " mask=" << (spec_.vocab().mask ? std::to_string(*spec_.vocab().mask) : std::string("none"))
      << " kind=" << (kind_ == GeneratorKind::uniform ? "uniform" : "absorbing") << " buckets=" << layout_.buckets
      << " shared=" << (layout_.shared_positions ? 1 : 0) << " horizon=" << hex_double(horizon_)
      << " schedule=" << std::hex << schedule_fingerprint << std::dec << " entries=" << table_.size() << '\n';
  for (const double v : table_) {
    out << hex_double(v) << '\n';
  }
}

ScoreParams ScoreParams::load(std::istream& in, std::uint64_t* schedule_fingerprint) {
  std::string header;
  if (!std::getline(in, header)) {
    throw ConfigError("empty checkpoint");
  }
  std::istringstream hs(header);
  std::string magic;
  hs >> magic;
  if (magic != "sepo-score-v1") {
    throw ConfigError("not a score checkpoint");
  }
  std::map<std::string, std::string> fields;
  std::string tok;
  while (hs >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("malformed checkpoint header field: " + tok);
    }
    fields[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  auto field = [&fields](const std::string& key) {
    const auto it = fields.find(key);
    if (it == fields.end()) {
      throw ConfigError("checkpoint header lacks '" + key + "'");
    }
    return it->second;
  };
  const int m = std::stoi(field("m"));
  const int n = std::stoi(field("n"));
  const auto mask_field = field("mask");
  std::optional<Token> mask;
  if (mask_field != "none") {
    mask = std::stoi(mask_field);
  }
  const auto kind_field = field("kind");
  GeneratorKind kind;
  if (kind_field == "uniform") {
    kind = GeneratorKind::uniform;
  } else if (kind_field == "absorbing") {
    kind = GeneratorKind::absorbing;
  } else {
    throw ConfigError("unknown generator kind in checkpoint: " + kind_field);
  }
  Layout layout{std::stoi(field("buckets")), field("shared") == "1"};
  const double horizon = parse_double(field("horizon"));
  if (schedule_fingerprint) {
    *schedule_fingerprint = std::stoull(field("schedule"), nullptr, 16);
  }
  ScoreParams params(SequenceSpec(n, Vocab::make(m, mask)), kind, horizon, layout);
  const auto entries = std::stoull(field("entries"));
  if (entries != params.table_.size()) {
    throw ConfigError("checkpoint entry count does not match its header");
  }
  std::string line;
  for (auto& v : params.table_) {
    if (!std::getline(in, line)) {
      throw ConfigError("truncated checkpoint");
    }
    v = parse_double(line);
  }
  return params;
}

void ScoreParams::save_file(const std::string& path, std::uint64_t schedule_fingerprint) const {
  std::ofstream out(path);
  if (!out) {
    throw ConfigError("cannot open checkpoint for writing: " + path);
  }
  save(out, schedule_fingerprint);
}

ScoreParams ScoreParams::load_file(const std::string& path, std::uint64_t* schedule_fingerprint) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open checkpoint: " + path);
  }
  return load(in, schedule_fingerprint);
}

bool operator==(const ScoreParams& a, const ScoreParams& b) {
  if (!(a.spec_ == b.spec_) || a.kind_ != b.kind_ || a.layout_.buckets != b.layout_.buckets ||
      a.layout_.shared_positions != b.layout_.shared_positions ||
      std::bit_cast<std::uint64_t>(a.horizon_) != std::bit_cast<std::uint64_t>(b.horizon_) ||
      a.table_.size() != b.table_.size()) {
    return false;
  }
  for (std::size_t k = 0; k < a.table_.size(); ++k) {
    if (std::bit_cast<std::uint64_t>(a.table_[k]) != std::bit_cast<std::uint64_t>(b.table_[k])) {
      return false;
    }
  }
  return true;
}

NeighborTable eval_score(const ScoreParams& params, std::span<const Token> x, double tau) {
  return params.eval(x, tau);
}

SparseGradient grad_log_score(const ScoreParams& params, std::span<const Token> x, double tau,
                              std::span<const Token> y) {
  const int pos = differing_position(x, y);
  SparseGradient g;
  const auto k = params.index(params.bucket(tau), pos, x[pos], y[pos]);
  if (params.allowed(x[pos], y[pos])) {
    g.entries.emplace_back(k, 1.0);
  }
  return g;
}

// ---------------------------------------------------------------------------------------------
// TeacherScore

TeacherScore::TeacherScore(TokenGenerator generator, NoiseSchedule schedule, SequenceSpec spec,
                           std::vector<double> logits, std::uint64_t cap)
    : generator_(std::move(generator)),
      schedule_(schedule),
      spec_(std::move(spec)),
      codec_((spec_.require_oracle_size(cap), spec_)),
      logits_(std::move(logits)) {
  if (logits_.size() != codec_.size()) {
    throw DomainError("teacher logits must have one entry per state");
  }
  if (!(generator_.vocab() == spec_.vocab())) {
    throw ConfigError("generator and sequence vocabularies differ");
  }
  const auto p0 = SimplexDist::from_logits(spec_, logits_);
  p0_.assign(p0.probs().begin(), p0.probs().end());
}

std::shared_ptr<const std::vector<double>> TeacherScore::marginal_cached(double tau) const {
  check_time(tau, schedule_.horizon());
  {
    const std::lock_guard lock(cache_->mutex);
    const auto it = cache_->entries.find(tau);
    if (it != cache_->entries.end()) {
      return it->second;
    }
  }
  auto probs = std::make_shared<const std::vector<double>>(
      propagate_factorized(spec_, p0_, transition_kernel(generator_, schedule_, 0.0, std::max(tau, 0.0))));
  const std::lock_guard lock(cache_->mutex);
  if (cache_->entries.size() >= 256) {
    cache_->entries.clear();
  }
  cache_->entries.emplace(tau, probs);
  return probs;
}

SimplexDist TeacherScore::marginal(double tau) const { return SimplexDist(spec_, *marginal_cached(tau), 1e-8); }

NeighborTable TeacherScore::eval(std::span<const Token> x, double tau) const {
  spec_.validate(x);
  const auto probs = marginal_cached(tau);
  const auto ix = codec_.encode(x);
  const double px = (*probs)[ix];
  if (!(px > 0.0)) {
    throw DomainError("teacher score undefined at a zero-probability state");
  }
  const int m = spec_.vocab_size();
  NeighborTable out(Sequence(x.begin(), x.end()), m, tau);
  for (int i = 0; i < spec_.length(); ++i) {
    const auto stride = codec_.stride(i);
    for (Token a = 0; a < m; ++a) {
      if (a == x[i]) {
        continue;
      }
      const auto iy = ix - static_cast<std::uint64_t>(x[i]) * stride + static_cast<std::uint64_t>(a) * stride;
      out.at(i, a) = (*probs)[iy] / px;
    }
  }
  return out;
}

double TeacherScore::ratio(std::span<const Token> x, std::span<const Token> y, double tau) const {
  const auto probs = marginal_cached(tau);
  const double px = (*probs)[codec_.encode(x)];
  if (!(px > 0.0)) {
    throw DomainError("teacher score undefined at a zero-probability state");
  }
  return (*probs)[codec_.encode(y)] / px;
}

std::unique_ptr<ScoreModel> TeacherScore::with_parameters(std::span<const double> params) const {
  return std::make_unique<TeacherScore>(generator_, schedule_, spec_, std::vector<double>(params.begin(), params.end()),
                                        codec_.size());
}

std::unique_ptr<ScoreModel> TeacherScore::clone() const {
  return std::make_unique<TeacherScore>(generator_, schedule_, spec_, logits_, codec_.size());
}

double TeacherScore::kernel_product(const TokenMatrix& kernel, std::span<const Token> target,
                                    std::uint64_t source) const {
  double prod = 1.0;
  const auto m = static_cast<std::uint64_t>(spec_.vocab_size());
  for (int i = spec_.length() - 1; i >= 0; --i) {
    prod *= kernel(target[i], static_cast<Token>(source % m));
    source /= m;
  }
  return prod;
}

void TeacherScore::accumulate_grad_log(std::span<const Token> x, std::span<const Token> y, double tau, double coeff,
                                       std::span<double> out) const {
  // d/d logit_k log p_tau(z) = K_tau(z | k) p0(k) / p_tau(z) - p0(k); the -p0(k) terms cancel
  // in log p_tau(y) - log p_tau(x).
  const auto probs = marginal_cached(tau);
  const double px = (*probs)[codec_.encode(x)];
  const double py = (*probs)[codec_.encode(y)];
  if (!(px > 0.0) || !(py > 0.0)) {
    throw DomainError("teacher log-score gradient undefined at a zero-probability state");
  }
  const auto kernel = transition_kernel(generator_, schedule_, 0.0, std::max(tau, 0.0));
  for (std::uint64_t k = 0; k < codec_.size(); ++k) {
    if (p0_[k] == 0.0) {
      continue;
    }
    out[k] += coeff * p0_[k] * (kernel_product(kernel, y, k) / py - kernel_product(kernel, x, k) / px);
  }
}

TeacherScore teacher_score(const TokenGenerator& g, const NoiseSchedule& sched, const SimplexDist& p0) {
  std::vector<double> logits(p0.size());
  for (std::size_t k = 0; k < p0.size(); ++k) {
    logits[k] = p0[k] > 0.0 ? std::log(p0[k]) : kNegInf;
  }
  return TeacherScore(g, sched, p0.spec(), std::move(logits));
}

}  // namespace sepo
