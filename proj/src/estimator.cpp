// SPDX-License-Identifier: Apache-2.0
#include "hybridgrad/estimator.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

#include "hybridgrad/errors.hpp"

namespace hybridgrad {

namespace {

void check_teachers(const TabularPolicy& student, std::span<const TabularPolicy> teachers,
                    std::span<const double> weights) {
  if (teachers.empty()) throw ConfigError("estimator: no teachers supplied");
  if (teachers.size() != weights.size())
    throw ConfigError("estimator: " + std::to_string(teachers.size()) + " teachers but " +
                      std::to_string(weights.size()) + " weights");
  for (const TabularPolicy& teacher : teachers)
    if (teacher.vocab_size() != student.vocab_size() ||
        teacher.horizon() != student.horizon() || teacher.eos_token() != student.eos_token())
      throw ConfigError("estimator: teacher disagrees with student on vocabulary/horizon/eos");
  for (double w : weights)
    if (!(w >= 0.0) || !std::isfinite(w))
      throw ConfigError("estimator: teacher weights must be finite and >= 0");
}

// Per-rollout accumulation, kept split so dense/sparse norms can be reported.
struct RolloutGrad {
  ParamGrad dense;
  ParamGrad sparse;
  double total_cost = 0.0;  // sum_t c_t - lambda * reward; baseline statistic
  double reward = 0.0;      // unweighted total reward
};

}  // namespace

void validate_config(const HybridConfig& cfg, int vocab_size) {
  if (!(cfg.lambda0 >= 0.0) || !std::isfinite(cfg.lambda0))
    throw ConfigError("config: lambda0 must be finite and >= 0");
  if (!(cfg.alpha >= 0.0) || !std::isfinite(cfg.alpha))
    throw ConfigError("config: alpha must be finite and >= 0");
  if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0))
    throw ConfigError("config: gamma must lie in [0, 1]");
  if (cfg.group_size < 1) throw ConfigError("config: group_size must be >= 1");
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate))
    throw ConfigError("config: learning_rate must be finite and > 0");
  if (cfg.topk != kTopkFull && (cfg.topk < 1 || cfg.topk > vocab_size))
    throw ConfigError("config: topk must be 'full' or in [1, vocab_size]");
  if (cfg.teacher_weights.empty()) throw ConfigError("config: no teacher weights");
  for (double w : cfg.teacher_weights)
    if (!(w >= 0.0) || !std::isfinite(w))
      throw ConfigError("config: teacher weights must be finite and >= 0");
}

double lambda_schedule(const HybridConfig& cfg, int step) {
  if (step < 0) throw std::invalid_argument("lambda_schedule: negative step");
  return cfg.lambda0 * (1.0 + cfg.alpha * static_cast<double>(step));
}

HybridConfig preset(std::string_view name) {
  HybridConfig cfg;
  if (name == "kd") {
    cfg.gamma = 0.0;
    cfg.lambda0 = 0.0;
  } else if (name == "onpolicy_kd_reward") {
    cfg.gamma = 0.0;
    cfg.lambda0 = 1.0;
  } else if (name == "full_hybrid") {
    cfg.gamma = 1.0;
    cfg.lambda0 = 1.0;
  } else if (name == "pure_rl") {
    cfg.dense_enabled = false;
    cfg.gamma = 0.0;
    cfg.lambda0 = 1.0;
  } else {
    throw ConfigError("preset: unknown name '" + std::string(name) +
                      "' (kd, onpolicy_kd_reward, full_hybrid, pure_rl)");
  }
  return cfg;
}

ParamGrad GradAccumulator::finalize() const {
  if (count == 0) throw std::invalid_argument("GradAccumulator: nothing accumulated");
  ParamGrad averaged = grad;
  averaged *= 1.0 / static_cast<double>(count);
  return averaged;
}

LogitVec dense_term_block(const TabularPolicy& student, std::span<const TabularPolicy> teachers,
                          std::span<const double> weights, const ContextKey& ctx, int topk) {
  check_teachers(student, teachers, weights);
  const LogitVec student_logits = student.logits(ctx);
  LogitVec block = LogitVec::Zero(student.vocab_size());
  for (std::size_t m = 0; m < teachers.size(); ++m) {
    const LogitVec teacher_logits = teachers[m].logits(ctx);
    if (topk == kTopkFull) {
      block += weights[m] * dense_logit_gradient_full(student_logits, teacher_logits);
    } else {
      block += weights[m] * densify(dense_logit_gradient_topk(student_logits, teacher_logits,
                                                              topk));
    }
  }
  return block;
}

ParamGrad dense_term(const TabularPolicy& student, std::span<const TabularPolicy> teachers,
                     std::span<const double> weights, const ContextKey& ctx, int topk) {
  ParamGrad grad(student.vocab_size());
  grad.add_block(ctx, dense_term_block(student, teachers, weights, ctx, topk));
  return grad;
}

ParamGrad sparse_term(const ParamGrad& score, double future_return) {
  return future_return * score;
}

HybridGradientStats hybrid_gradient_stats(const TabularPolicy& student,
                                          std::span<const TabularPolicy> teachers,
                                          std::span<const double> weights,
                                          std::span<const RewardSpec> rewards, int prompt_id,
                                          const HybridConfig& cfg, Rng& rng, int iteration,
                                          int threads) {
  validate_config(cfg, student.vocab_size());
  check_teachers(student, teachers, weights);
  const double lambda = lambda_schedule(cfg, iteration);
  const int group = cfg.group_size;

  // Trajectories are drawn first from the caller's generator, so the group
  // is identical regardless of how the scoring below is parallelized.
  std::vector<Trajectory> trajs;
  trajs.reserve(static_cast<std::size_t>(group));
  for (int i = 0; i < group; ++i) trajs.push_back(sample_trajectory(student, prompt_id, rng));

  std::vector<RolloutGrad> parts(static_cast<std::size_t>(group));
  const auto score_rollout = [&](int i) {
    Trajectory& traj = trajs[static_cast<std::size_t>(i)];
    RolloutGrad& part = parts[static_cast<std::size_t>(i)];
    const int steps = traj.length();

    // Weighted per-step log-ratio costs against the teacher mixture.
    std::vector<double> costs(static_cast<std::size_t>(steps), 0.0);
    for (std::size_t m = 0; m < teachers.size(); ++m) {
      const std::vector<double> cm = step_costs(student, teachers[m], traj.tokens, prompt_id);
      for (int t = 0; t < steps; ++t) costs[static_cast<std::size_t>(t)] += weights[m] * cm[static_cast<std::size_t>(t)];
    }
    traj.costs = costs;
    traj.teacher_logp.resize(static_cast<std::size_t>(steps));
    for (int t = 0; t < steps; ++t)
      traj.teacher_logp[static_cast<std::size_t>(t)] =
          traj.student_logp[static_cast<std::size_t>(t)] - costs[static_cast<std::size_t>(t)];

    traj.rewards.clear();
    for (const RewardSpec& spec : rewards)
      traj.rewards.push_back(evaluate_reward(spec, prompt_id, traj.tokens));
    const double weighted_reward =
        rewards.empty() ? 0.0 : total_weighted_reward(rewards, prompt_id, traj.tokens);
    part.reward = weighted_reward;

    const std::vector<double> returns =
        discounted_future_returns(costs, lambda * weighted_reward, cfg.gamma);

    part.dense = ParamGrad(student.vocab_size());
    part.sparse = ParamGrad(student.vocab_size());
    double cost_sum = 0.0;
    for (int t = 0; t < steps; ++t) {
      const ContextKey& ctx = traj.contexts[static_cast<std::size_t>(t)];
      if (cfg.dense_enabled)
        part.dense.add_block(ctx, dense_term_block(student, teachers, weights, ctx, cfg.topk));
      part.sparse.add_block(
          ctx, returns[static_cast<std::size_t>(t)] *
                   score_block(student, ctx, traj.tokens[static_cast<std::size_t>(t)]));
      cost_sum += costs[static_cast<std::size_t>(t)];
    }
    part.total_cost = cost_sum - lambda * weighted_reward;
  };

  if (threads <= 1 || group == 1) {
    for (int i = 0; i < group; ++i) score_rollout(i);
  } else {
    const int workers = std::min(threads, group);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int i = w; i < group; i += workers) score_rollout(i);
      });
    for (std::thread& t : pool) t.join();
  }

  // Optional leave-one-out baseline: subtract the mean total cost of the
  // other rollouts from every return of rollout i. The baseline is
  // independent of rollout i, so the expected gradient is unchanged.
  if (cfg.baseline && group > 1) {
    double cost_total = 0.0;
    for (const RolloutGrad& part : parts) cost_total += part.total_cost;
    for (int i = 0; i < group; ++i) {
      RolloutGrad& part = parts[static_cast<std::size_t>(i)];
      const double loo_mean =
          (cost_total - part.total_cost) / static_cast<double>(group - 1);
      const Trajectory& traj = trajs[static_cast<std::size_t>(i)];
      for (int t = 0; t < traj.length(); ++t)
        part.sparse.add_block(
            traj.contexts[static_cast<std::size_t>(t)],
            -loo_mean * score_block(student, traj.contexts[static_cast<std::size_t>(t)],
                                    traj.tokens[static_cast<std::size_t>(t)]));
    }
  }

  // Fixed-order reduction over rollouts.
  HybridGradientStats stats;
  stats.lambda = lambda;
  ParamGrad dense_total(student.vocab_size());
  ParamGrad sparse_total(student.vocab_size());
  double reward_total = 0.0;
  for (const RolloutGrad& part : parts) {
    dense_total += part.dense;
    sparse_total += part.sparse;
    reward_total += part.reward;
  }
  const double inv_group = 1.0 / static_cast<double>(group);
  dense_total *= inv_group;
  sparse_total *= inv_group;
  stats.dense_norm = dense_total.max_abs();
  stats.sparse_norm = sparse_total.max_abs();
  stats.mean_reward = reward_total * inv_group;
  stats.gradient = dense_total + sparse_total;
  stats.total_norm = stats.gradient.max_abs();
  return stats;
}

ParamGrad hybrid_gradient(const TabularPolicy& student, std::span<const TabularPolicy> teachers,
                          std::span<const double> weights, std::span<const RewardSpec> rewards,
                          int prompt_id, const HybridConfig& cfg, Rng& rng, int iteration,
                          int threads) {
  return hybrid_gradient_stats(student, teachers, weights, rewards, prompt_id, cfg, rng,
                               iteration, threads)
      .gradient;
}

void apply_update(TabularPolicy& student, const ParamGrad& grad, double learning_rate) {
  if (!(learning_rate > 0.0))
    throw std::invalid_argument("apply_update: learning_rate must be > 0");
  for (const auto& [ctx, block] : grad.blocks())
    student.add_to_logits(ctx, (-learning_rate * block).eval());
}

}  // namespace hybridgrad
