// SPDX-License-Identifier: Apache-2.0
#include "hybridgrad/returns.hpp"

#include <algorithm>
#include <stdexcept>

#include "hybridgrad/errors.hpp"

namespace hybridgrad {

double evaluate_reward(const RewardSpec& spec, int prompt_id, const std::vector<int>& tokens) {
  switch (spec.kind) {
    case RewardKind::kConstant:
      return spec.value;
    case RewardKind::kTargetTokenCount:
      return static_cast<double>(std::count(tokens.begin(), tokens.end(), spec.target_token));
    case RewardKind::kExactMatch:
      return tokens == spec.target_sequence ? spec.value : 0.0;
    case RewardKind::kCustom:
      if (!spec.fn) throw ConfigError("reward: custom kind without an evaluator");
      return spec.fn(prompt_id, tokens);
  }
  throw ConfigError("reward: unknown kind");
}

double total_weighted_reward(std::span<const RewardSpec> specs, int prompt_id,
                             const std::vector<int>& tokens) {
  if (specs.empty()) throw ConfigError("total_weighted_reward: no reward specs");
  double total = 0.0;
  for (const RewardSpec& spec : specs) total += spec.weight * evaluate_reward(spec, prompt_id, tokens);
  return total;
}

std::vector<double> step_costs(const TabularPolicy& student, const TabularPolicy& teacher,
                               const std::vector<int>& tokens, int prompt_id) {
  if (student.vocab_size() != teacher.vocab_size() || student.horizon() != teacher.horizon() ||
      student.eos_token() != teacher.eos_token())
    throw ConfigError("step_costs: student and teacher disagree on vocabulary/horizon/eos");

  std::vector<double> costs;
  costs.reserve(tokens.size());
  ContextKey ctx{prompt_id, {}};
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const int token = tokens[t];
    costs.push_back(log_token_prob(student, ctx, token) - log_token_prob(teacher, ctx, token));
    if (t + 1 < tokens.size()) ctx.prefix.push_back(token);
  }
  return costs;
}

std::vector<double> discounted_future_returns(std::span<const double> costs,
                                              double total_weighted_reward, double gamma) {
  if (gamma < 0.0 || gamma > 1.0)
    throw std::invalid_argument("discounted_future_returns: gamma outside [0, 1]");
  if (costs.empty())
    throw std::invalid_argument("discounted_future_returns: empty cost list");

  const std::size_t n = costs.size();
  std::vector<double> returns(n);
  double future = 0.0;  // gamma-weighted sum of costs strictly after step t
  returns[n - 1] = -total_weighted_reward;
  for (std::size_t t = n - 1; t-- > 0;) {
    future = gamma * (costs[t + 1] + future);
    returns[t] = future - total_weighted_reward;
  }
  return returns;
}

}  // namespace hybridgrad
