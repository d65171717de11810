// SPDX-License-Identifier: Apache-2.0
//
// Assembles per-step analytic (dense) and return-weighted score (sparse)
// gradient terms into the group-rollout update: sample K responses, score
// every (response, step) pair, average, and descend.
//
// Rollouts within one call may execute in parallel with independent
// per-rollout generators; the reduction is in fixed rollout order and block
// maps are key-sorted, so results are bit-identical for any thread count.
#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "hybridgrad/policy.hpp"
#include "hybridgrad/returns.hpp"

namespace hybridgrad {

/// Sentinel for HybridConfig::topk: use the full-vocabulary dense kernel.
inline constexpr int kTopkFull = 0;

/// The knobs of one estimator/training setup.
struct HybridConfig {
  double lambda0 = 0.0;      ///< reward weight at step 0
  double alpha = 0.0;        ///< schedule slope: lambda(t) = lambda0 * (1 + alpha * t)
  double gamma = 1.0;        ///< discount on future divergence costs
  int group_size = 1;        ///< rollouts per prompt per iteration (K)
  int topk = kTopkFull;      ///< Top-K size for the dense kernel, kTopkFull = full
  double learning_rate = 0.1;
  bool baseline = false;     ///< leave-one-out group baseline on the sparse term
  bool dense_enabled = true; ///< false = pure policy gradient, no imitation term
  std::vector<double> teacher_weights = {1.0};
  std::uint64_t seed = 0;
};

/// Throws ConfigError on out-of-range values (gamma outside [0,1],
/// lambda0/alpha < 0, group_size < 1, topk outside [1,|V|], ...).
void validate_config(const HybridConfig& cfg, int vocab_size);

/// lambda(t) = lambda0 * (1 + alpha * t); nondecreasing in t.
double lambda_schedule(const HybridConfig& cfg, int step);

/// Named configuration presets:
///   kd                 gamma=0, lambda=0   (imitation only)
///   onpolicy_kd_reward gamma=0, lambda>0   (imitation + terminal reward)
///   full_hybrid        gamma=1, lambda>0   (full trajectory credit)
///   pure_rl            dense term disabled, lambda>0
HybridConfig preset(std::string_view name);

/// Running sum of per-rollout gradients; finalize() averages over the group.
struct GradAccumulator {
  ParamGrad grad;
  int count = 0;

  void add(const ParamGrad& g) {
    grad += g;
    ++count;
  }
  ParamGrad finalize() const;
};

/// Analytic imitation gradient at one context: the ctx block equals
/// sum_m weight_m * dense_logit_gradient_full(student logits, teacher_m
/// logits); for tabular parameters the logit gradient is the parameter
/// gradient of that block. topk != kTopkFull sparsifies the block.
ParamGrad dense_term(const TabularPolicy& student, std::span<const TabularPolicy> teachers,
                     std::span<const double> weights, const ContextKey& ctx,
                     int topk = kTopkFull);

/// The ctx block of dense_term, as a plain vector.
LogitVec dense_term_block(const TabularPolicy& student, std::span<const TabularPolicy> teachers,
                          std::span<const double> weights, const ContextKey& ctx,
                          int topk = kTopkFull);

/// future_return * score: the Monte Carlo gradient contribution of one step.
ParamGrad sparse_term(const ParamGrad& score, double future_return);

/// Per-iteration byproducts wanted by the metrics stream.
struct HybridGradientStats {
  ParamGrad gradient;        ///< group-averaged dense + sparse gradient
  double lambda = 0.0;       ///< scheduled reward weight used this iteration
  double dense_norm = 0.0;   ///< max-abs of the averaged dense part
  double sparse_norm = 0.0;  ///< max-abs of the averaged sparse part
  double total_norm = 0.0;
  double mean_reward = 0.0;  ///< mean spec-weighted reward over the group (schedule not applied)
};

/// One iteration of the group-rollout estimator: sample cfg.group_size
/// trajectories from the student, compute per-step costs against the
/// weighted teachers and discounted future returns, accumulate dense +
/// sparse terms at every visited context, and average over the group.
/// `iteration` selects the scheduled lambda(t).
HybridGradientStats hybrid_gradient_stats(const TabularPolicy& student,
                                          std::span<const TabularPolicy> teachers,
                                          std::span<const double> weights,
                                          std::span<const RewardSpec> rewards, int prompt_id,
                                          const HybridConfig& cfg, Rng& rng, int iteration = 0,
                                          int threads = 1);

ParamGrad hybrid_gradient(const TabularPolicy& student, std::span<const TabularPolicy> teachers,
                          std::span<const double> weights, std::span<const RewardSpec> rewards,
                          int prompt_id, const HybridConfig& cfg, Rng& rng, int iteration = 0,
                          int threads = 1);

/// Plain gradient descent: logits(ctx) -= learning_rate * grad block for
/// every touched block; untouched contexts are unchanged.
void apply_update(TabularPolicy& student, const ParamGrad& grad, double learning_rate);

}  // namespace hybridgrad
