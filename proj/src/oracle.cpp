// SPDX-License-Identifier: Apache-2.0
#include "hybridgrad/oracle.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "hybridgrad/errors.hpp"

namespace hybridgrad {

namespace {

void check_enumeration_feasible(const TabularPolicy& policy, std::size_t cap) {
  double worst = 1.0;
  for (int t = 0; t < policy.horizon(); ++t) {
    worst *= static_cast<double>(policy.vocab_size());
    if (worst > static_cast<double>(cap))
      throw ResourceError("enumeration: |V|^horizon = " +
                          std::to_string(std::pow(policy.vocab_size(), policy.horizon())) +
                          " exceeds cap " + std::to_string(cap));
  }
}

void enumerate_recursive(const TabularPolicy& policy, const ContextKey& ctx, double prefix_prob,
                         EnumerationSpace& space) {
  const ProbVec probs = token_distribution(policy, ctx);
  const bool last_step = static_cast<int>(ctx.prefix.size()) + 1 == policy.horizon();
  for (int v = 0; v < policy.vocab_size(); ++v) {
    const double p = prefix_prob * probs[v];
    if (v == policy.eos_token() || last_step) {
      std::vector<int> seq = ctx.prefix;
      seq.push_back(v);
      space.sequences.push_back(std::move(seq));
      space.probabilities.push_back(p);
    } else {
      ContextKey next = ctx;
      next.prefix.push_back(v);
      enumerate_recursive(policy, next, p, space);
    }
  }
}

double weighted_reward_or_zero(std::span<const RewardSpec> rewards, int prompt_id,
                               const std::vector<int>& tokens) {
  return rewards.empty() ? 0.0 : total_weighted_reward(rewards, prompt_id, tokens);
}

// sum_t c_t - lambda * W for one enumerated sequence.
double total_cost(const TabularPolicy& student, const TabularPolicy& teacher,
                  std::span<const RewardSpec> rewards, int prompt_id,
                  const std::vector<int>& tokens, double lambda) {
  double cost = 0.0;
  for (double c : step_costs(student, teacher, tokens, prompt_id)) cost += c;
  return cost - lambda * weighted_reward_or_zero(rewards, prompt_id, tokens);
}

// grad log pi(y|x) = sum_t score(ctx_t, y_t), shared by every oracle below.
ParamGrad path_score(const TabularPolicy& policy, int prompt_id, const std::vector<int>& tokens) {
  ParamGrad grad(policy.vocab_size());
  ContextKey ctx{prompt_id, {}};
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    grad.add_block(ctx, score_block(policy, ctx, tokens[t]));
    if (t + 1 < tokens.size()) ctx.prefix.push_back(tokens[t]);
  }
  return grad;
}

}  // namespace

EnumerationSpace enumerate_sequences(const TabularPolicy& policy, int prompt_id,
                                     std::size_t cap) {
  check_enumeration_feasible(policy, cap);
  EnumerationSpace space;
  space.vocab_size = policy.vocab_size();
  space.horizon = policy.horizon();
  space.eos_token = policy.eos_token();
  space.prompt_id = prompt_id;
  enumerate_recursive(policy, ContextKey{prompt_id, {}}, 1.0, space);
  return space;
}

std::vector<ContextKey> reachable_contexts(const TabularPolicy& policy, int prompt_id,
                                           std::size_t cap) {
  const EnumerationSpace space = enumerate_sequences(policy, prompt_id, cap);
  std::set<ContextKey> contexts;
  for (const std::vector<int>& seq : space.sequences) {
    ContextKey ctx{prompt_id, {}};
    for (std::size_t t = 0; t < seq.size(); ++t) {
      contexts.insert(ctx);
      if (t + 1 < seq.size()) ctx.prefix.push_back(seq[t]);
    }
  }
  return {contexts.begin(), contexts.end()};
}

double exact_objective(const TabularPolicy& student, const TabularPolicy& teacher,
                       std::span<const RewardSpec> rewards, int prompt_id, double lambda) {
  const EnumerationSpace space = enumerate_sequences(student, prompt_id);
  double objective = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i)
    objective += space.probabilities[i] *
                 total_cost(student, teacher, rewards, prompt_id, space.sequences[i], lambda);
  return objective;
}

double exact_trajectory_kl(const TabularPolicy& student, const TabularPolicy& teacher,
                           int prompt_id) {
  return exact_objective(student, teacher, {}, prompt_id, 0.0);
}

ParamGrad exact_gradient_fd(const TabularPolicy& student, const TabularPolicy& teacher,
                            std::span<const RewardSpec> rewards, int prompt_id, double lambda,
                            double h) {
  if (!(h > 0.0)) throw std::invalid_argument("exact_gradient_fd: h must be > 0");

  // Materialize the full gradient domain so absent (uniform) blocks get
  // perturbed too.
  TabularPolicy probe = student;
  const std::vector<ContextKey> contexts = reachable_contexts(student, prompt_id);
  for (const ContextKey& ctx : contexts)
    if (!probe.has_entry(ctx)) probe.set_logits(ctx, LogitVec::Zero(probe.vocab_size()));

  ParamGrad grad(probe.vocab_size());
  for (const ContextKey& ctx : contexts) {
    const LogitVec original = probe.logits(ctx);
    LogitVec block(probe.vocab_size());
    for (int v = 0; v < probe.vocab_size(); ++v) {
      LogitVec bumped = original;
      bumped[v] = original[v] + h;
      probe.set_logits(ctx, bumped);
      const double plus = exact_objective(probe, teacher, rewards, prompt_id, lambda);
      bumped[v] = original[v] - h;
      probe.set_logits(ctx, bumped);
      const double minus = exact_objective(probe, teacher, rewards, prompt_id, lambda);
      block[v] = (plus - minus) / (2.0 * h);
    }
    probe.set_logits(ctx, original);
    grad.add_block(ctx, block);
  }
  return grad;
}

AnalyticGradient exact_gradient_analytic_parts(const TabularPolicy& student,
                                               const TabularPolicy& teacher,
                                               std::span<const RewardSpec> rewards, int prompt_id,
                                               double lambda) {
  const EnumerationSpace space = enumerate_sequences(student, prompt_id);

  ParamGrad score_only(student.vocab_size());
  ParamGrad pathwise(student.vocab_size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    const double p = space.probabilities[i];
    const double cost =
        total_cost(student, teacher, rewards, prompt_id, space.sequences[i], lambda);
    // grad C(y) = grad log pi(y): teacher and reward carry no parameters.
    const ParamGrad score = path_score(student, prompt_id, space.sequences[i]);
    score_only += (p * cost) * score;
    pathwise += p * score;
  }

  AnalyticGradient parts;
  parts.full_identity = score_only + pathwise;
  parts.score_only = std::move(score_only);
  parts.pathwise_max_abs = pathwise.max_abs();
  return parts;
}

ParamGrad exact_gradient_analytic(const TabularPolicy& student, const TabularPolicy& teacher,
                                  std::span<const RewardSpec> rewards, int prompt_id,
                                  double lambda) {
  return exact_gradient_analytic_parts(student, teacher, rewards, prompt_id, lambda)
      .full_identity;
}

EstimatorExpectation estimator_expectation_parts(const TabularPolicy& student,
                                                 std::span<const TabularPolicy> teachers,
                                                 std::span<const double> weights,
                                                 std::span<const RewardSpec> rewards,
                                                 int prompt_id, double gamma, double lambda,
                                                 int topk,
                                                 const DenseKernelFn& dense_kernel_override) {
  const EnumerationSpace space = enumerate_sequences(student, prompt_id);

  const auto dense_block = [&](const ContextKey& ctx) {
    if (dense_kernel_override && topk == kTopkFull) {
      LogitVec block = LogitVec::Zero(student.vocab_size());
      const LogitVec student_logits = student.logits(ctx);
      for (std::size_t m = 0; m < teachers.size(); ++m)
        block += weights[m] * dense_kernel_override(student_logits, teachers[m].logits(ctx));
      return block;
    }
    return dense_term_block(student, teachers, weights, ctx, topk);
  };

  EstimatorExpectation expectation;
  expectation.dense = ParamGrad(student.vocab_size());
  expectation.sparse = ParamGrad(student.vocab_size());

  // Dense blocks repeat across sequences sharing a prefix; cache per context.
  std::map<ContextKey, LogitVec> dense_cache;

  for (std::size_t i = 0; i < space.size(); ++i) {
    const double p = space.probabilities[i];
    const std::vector<int>& seq = space.sequences[i];

    std::vector<double> costs(seq.size(), 0.0);
    for (std::size_t m = 0; m < teachers.size(); ++m) {
      const std::vector<double> cm = step_costs(student, teachers[m], seq, prompt_id);
      for (std::size_t t = 0; t < seq.size(); ++t) costs[t] += weights[m] * cm[t];
    }
    const double weighted_reward = weighted_reward_or_zero(rewards, prompt_id, seq);
    const std::vector<double> returns =
        discounted_future_returns(costs, lambda * weighted_reward, gamma);

    ContextKey ctx{prompt_id, {}};
    for (std::size_t t = 0; t < seq.size(); ++t) {
      auto it = dense_cache.find(ctx);
      if (it == dense_cache.end()) it = dense_cache.emplace(ctx, dense_block(ctx)).first;
      expectation.dense.add_block(ctx, p * it->second);
      expectation.sparse.add_block(ctx, (p * returns[t]) * score_block(student, ctx, seq[t]));
      if (t + 1 < seq.size()) ctx.prefix.push_back(seq[t]);
    }
  }
  return expectation;
}

ParamGrad estimator_expectation(const TabularPolicy& student,
                                std::span<const TabularPolicy> teachers,
                                std::span<const double> weights,
                                std::span<const RewardSpec> rewards, int prompt_id, double gamma,
                                double lambda, int topk) {
  return estimator_expectation_parts(student, teachers, weights, rewards, prompt_id, gamma,
                                     lambda, topk)
      .total();
}

double verify_vanishing_score(const TabularPolicy& policy, const ContextKey& ctx) {
  const ProbVec probs = token_distribution(policy, ctx);
  LogitVec sum = LogitVec::Zero(policy.vocab_size());
  for (int v = 0; v < policy.vocab_size(); ++v) sum += probs[v] * score_block(policy, ctx, v);
  return sum.abs().maxCoeff();
}

ParamGrad cost_score_correlation(const TabularPolicy& student, const TabularPolicy& teacher,
                                 int prompt_id, int k, int t) {
  if (k < 1 || t < 1 || t > student.horizon())
    throw std::invalid_argument("cost_score_correlation: steps must satisfy 1 <= k, t <= horizon");
  const EnumerationSpace space = enumerate_sequences(student, prompt_id);

  ParamGrad corr(student.vocab_size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    const std::vector<int>& seq = space.sequences[i];
    if (static_cast<int>(seq.size()) < t || static_cast<int>(seq.size()) < k) continue;
    const std::vector<double> costs = step_costs(student, teacher, seq, prompt_id);
    const ContextKey ctx{prompt_id,
                         std::vector<int>(seq.begin(), seq.begin() + (t - 1))};
    corr.add_block(ctx, (space.probabilities[i] * costs[static_cast<std::size_t>(k - 1)]) *
                            score_block(student, ctx, seq[static_cast<std::size_t>(t - 1)]));
  }
  return corr;
}

double verify_causality(const TabularPolicy& student, const TabularPolicy& teacher, int prompt_id,
                        int k, int t) {
  if (!(1 <= k && k < t && t <= student.horizon()))
    throw std::invalid_argument("verify_causality: need 1 <= k < t <= horizon");
  return cost_score_correlation(student, teacher, prompt_id, k, t).max_abs();
}

ParamGrad rlhf_gradient(const TabularPolicy& student, const TabularPolicy& teacher,
                        std::span<const RewardSpec> rewards, int prompt_id, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("rlhf_gradient: beta must be > 0");

  // beta * grad KL - grad E[W], each piece from its own enumeration pass.
  const ParamGrad kl_grad = exact_gradient_analytic(student, teacher, {}, prompt_id, 0.0);

  const EnumerationSpace space = enumerate_sequences(student, prompt_id);
  ParamGrad reward_grad(student.vocab_size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    const double w = weighted_reward_or_zero(rewards, prompt_id, space.sequences[i]);
    if (w != 0.0)
      reward_grad +=
          (space.probabilities[i] * w) * path_score(student, prompt_id, space.sequences[i]);
  }
  return beta * kl_grad - reward_grad;
}

}  // namespace hybridgrad
