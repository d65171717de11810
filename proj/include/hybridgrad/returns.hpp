// SPDX-License-Identifier: Apache-2.0
//
// Per-step divergence costs, terminal rewards, and discounted future
// returns for sampled trajectories. Pure functions over trajectory data.
#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hybridgrad/policy.hpp"

namespace hybridgrad {

enum class RewardKind {
  kConstant,          // r = value
  kTargetTokenCount,  // r = number of occurrences of target_token
  kExactMatch,        // r = value if tokens == target_sequence else 0
  kCustom,            // r = fn(prompt_id, tokens)
};

/// One black-box terminal reward with its weight lambda_n >= 0.
struct RewardSpec {
  RewardKind kind = RewardKind::kConstant;
  double value = 1.0;
  int target_token = 0;
  std::vector<int> target_sequence;
  std::function<double(int, const std::vector<int>&)> fn;
  double weight = 1.0;
};

double evaluate_reward(const RewardSpec& spec, int prompt_id, const std::vector<int>& tokens);

/// sum_n lambda_n * r_n(prompt, tokens). A single spec with weight lambda is
/// the plain weighted-reward objective term.
double total_weighted_reward(std::span<const RewardSpec> specs, int prompt_id,
                             const std::vector<int>& tokens);

/// Per-step log-ratio costs c_t = log pi_student(y_t|ctx_t) - log
/// pi_teacher(y_t|ctx_t) along a token sequence. Policies must agree on
/// vocabulary, horizon, and EOS token.
std::vector<double> step_costs(const TabularPolicy& student, const TabularPolicy& teacher,
                               const std::vector<int>& tokens, int prompt_id);

/// Discounted future returns. Entry t (0-based) is
///
///   G_{t+1} = sum_{k=t+1..T-1} gamma^{k-t} costs[k] - total_weighted_reward
///
/// so the last entry is -total_weighted_reward (empty sum). The immediate
/// next cost is discounted by gamma relative to the current step, and the
/// reward term is applied undiscounted at every step. Computed by the
/// backward recurrence G_t + R = gamma * (costs[t+1] + (G_{t+1} + R)) in
/// O(T).
std::vector<double> discounted_future_returns(std::span<const double> costs,
                                              double total_weighted_reward, double gamma);

}  // namespace hybridgrad
