// SPDX-License-Identifier: Apache-2.0
#include "hybridgrad/policy.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace hybridgrad {

TabularPolicy::TabularPolicy(int vocab_size, int horizon, int eos_token)
    : vocab_size_(vocab_size), horizon_(horizon), eos_token_(eos_token) {
  if (vocab_size < 2) throw std::invalid_argument("TabularPolicy: vocab_size must be >= 2");
  if (horizon < 1) throw std::invalid_argument("TabularPolicy: horizon must be >= 1");
  if (eos_token < 0 || eos_token >= vocab_size)
    throw std::invalid_argument("TabularPolicy: eos_token out of vocabulary");
}

void TabularPolicy::check_context(const ContextKey& ctx) const {
  if (static_cast<int>(ctx.prefix.size()) >= horizon_)
    throw std::invalid_argument("TabularPolicy: context prefix length " +
                                std::to_string(ctx.prefix.size()) + " at or beyond horizon " +
                                std::to_string(horizon_));
  for (int tok : ctx.prefix)
    if (tok < 0 || tok >= vocab_size_)
      throw std::invalid_argument("TabularPolicy: prefix token out of vocabulary");
}

LogitVec TabularPolicy::logits(const ContextKey& ctx) const {
  check_context(ctx);
  const auto it = table_.find(ctx);
  if (it == table_.end()) return LogitVec::Zero(vocab_size_);
  return it->second;
}

void TabularPolicy::set_logits(const ContextKey& ctx, LogitVec z) {
  check_context(ctx);
  if (z.size() != vocab_size_)
    throw std::invalid_argument("TabularPolicy: logit vector length " + std::to_string(z.size()) +
                                " != vocab_size " + std::to_string(vocab_size_));
  if (!z.isFinite().all())
    throw std::invalid_argument("TabularPolicy: non-finite logit");
  table_[ctx] = std::move(z);
}

void TabularPolicy::add_to_logits(const ContextKey& ctx, const LogitVec& delta) {
  check_context(ctx);
  if (delta.size() != vocab_size_)
    throw std::invalid_argument("TabularPolicy: delta length != vocab_size");
  auto it = table_.find(ctx);
  if (it == table_.end()) it = table_.emplace(ctx, LogitVec::Zero(vocab_size_)).first;
  it->second += delta;
}

void ParamGrad::add_block(const ContextKey& ctx, const LogitVec& delta) {
  if (block_dim_ == 0) block_dim_ = delta.size();
  if (delta.size() != block_dim_)
    throw std::invalid_argument("ParamGrad: block length mismatch");
  auto it = blocks_.find(ctx);
  if (it == blocks_.end())
    blocks_.emplace(ctx, delta);
  else
    it->second += delta;
}

LogitVec ParamGrad::block(const ContextKey& ctx) const {
  const auto it = blocks_.find(ctx);
  if (it == blocks_.end()) return LogitVec::Zero(block_dim_);
  return it->second;
}

ParamGrad& ParamGrad::operator+=(const ParamGrad& other) {
  for (const auto& [ctx, v] : other.blocks_) add_block(ctx, v);
  return *this;
}

ParamGrad& ParamGrad::operator-=(const ParamGrad& other) {
  for (const auto& [ctx, v] : other.blocks_) add_block(ctx, (-v).eval());
  return *this;
}

ParamGrad& ParamGrad::operator*=(double s) {
  for (auto& [ctx, v] : blocks_) v *= s;
  return *this;
}

double ParamGrad::max_abs() const {
  double m = 0.0;
  for (const auto& [ctx, v] : blocks_) m = std::max(m, v.abs().maxCoeff());
  return m;
}

double max_abs_diff(const ParamGrad& a, const ParamGrad& b) {
  ParamGrad d = a;
  d -= b;
  return d.max_abs();
}

ProbVec token_distribution(const TabularPolicy& policy, const ContextKey& ctx) {
  return softmax(policy.logits(ctx));
}

LogitVec log_token_distribution(const TabularPolicy& policy, const ContextKey& ctx) {
  return log_softmax(policy.logits(ctx));
}

double log_token_prob(const TabularPolicy& policy, const ContextKey& ctx, int token) {
  if (token < 0 || token >= policy.vocab_size())
    throw std::invalid_argument("log_token_prob: token out of vocabulary");
  return log_token_distribution(policy, ctx)[token];
}

Trajectory sample_trajectory(const TabularPolicy& policy, int prompt_id, Rng& rng) {
  Trajectory traj;
  traj.prompt_id = prompt_id;
  ContextKey ctx{prompt_id, {}};
  for (int t = 0; t < policy.horizon(); ++t) {
    const LogitVec log_probs = log_token_distribution(policy, ctx);
    const int token = static_cast<int>(sample_categorical(log_probs.exp(), rng));
    traj.contexts.push_back(ctx);
    traj.tokens.push_back(token);
    traj.student_logp.push_back(log_probs[token]);
    if (token == policy.eos_token()) break;
    ctx.prefix.push_back(token);
  }
  return traj;
}

double log_prob(const TabularPolicy& policy, const Trajectory& traj) {
  double total = 0.0;
  for (int t = 0; t < traj.length(); ++t)
    total += log_token_prob(policy, traj.contexts[static_cast<std::size_t>(t)],
                            traj.tokens[static_cast<std::size_t>(t)]);
  return total;
}

LogitVec score_block(const TabularPolicy& policy, const ContextKey& ctx, int token) {
  if (token < 0 || token >= policy.vocab_size())
    throw std::invalid_argument("score_block: token out of vocabulary");
  LogitVec block = -token_distribution(policy, ctx);
  block[token] += 1.0;
  return block;
}

ParamGrad score_function(const TabularPolicy& policy, const ContextKey& ctx, int token) {
  ParamGrad grad(policy.vocab_size());
  grad.add_block(ctx, score_block(policy, ctx, token));
  return grad;
}

}  // namespace hybridgrad
