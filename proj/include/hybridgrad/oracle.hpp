// SPDX-License-Identifier: Apache-2.0
//
// Exact ground truth by exhaustive trajectory enumeration on small
// instances: the exact objective, exact gradients computed by two
// independent routes (analytic identity and central finite differences),
// exact expectations of the estimator's dense and sparse terms, and
// executable residual checks for the vanishing-score and causality
// identities.
//
// Everything here is read-only over the policies and deterministic:
// sequences are enumerated depth-first in token order and all reductions run
// in fixed key order.
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "hybridgrad/estimator.hpp"
#include "hybridgrad/policy.hpp"
#include "hybridgrad/returns.hpp"

namespace hybridgrad {

/// Hard bound on the number of terminated sequences an enumeration may
/// produce before it aborts with ResourceError.
inline constexpr std::size_t kEnumerationCap = 1'000'000;

/// Every terminated sequence of a policy with its exact probability.
struct EnumerationSpace {
  int vocab_size = 0;
  int horizon = 0;
  int eos_token = 0;
  int prompt_id = 0;
  std::vector<std::vector<int>> sequences;
  std::vector<double> probabilities;

  std::size_t size() const { return sequences.size(); }
};

/// Enumerate all terminated sequences (ending in EOS or force-terminated at
/// the horizon) with probability prod_t pi(y_t | ctx_t). Throws
/// ResourceError when the worst-case count |V|^horizon exceeds `cap`.
EnumerationSpace enumerate_sequences(const TabularPolicy& policy, int prompt_id,
                                     std::size_t cap = kEnumerationCap);

/// Every context at which some enumerated sequence places a step, in sorted
/// key order. This is the gradient domain: absent (uniform) blocks included.
std::vector<ContextKey> reachable_contexts(const TabularPolicy& policy, int prompt_id,
                                           std::size_t cap = kEnumerationCap);

/// J = sum_y P(y) * (sum_t c_t(y) - lambda * W(y)) with W the spec-weighted
/// reward; at lambda = 0 this is the exact trajectory KL to the teacher.
double exact_objective(const TabularPolicy& student, const TabularPolicy& teacher,
                       std::span<const RewardSpec> rewards, int prompt_id, double lambda);

/// Exact trajectory KL(student || teacher) for one prompt.
double exact_trajectory_kl(const TabularPolicy& student, const TabularPolicy& teacher,
                           int prompt_id);

/// Central finite differences of exact_objective with respect to every logit
/// of every reachable context (absent blocks materialized first).
ParamGrad exact_gradient_fd(const TabularPolicy& student, const TabularPolicy& teacher,
                            std::span<const RewardSpec> rewards, int prompt_id, double lambda,
                            double h);

/// The two algebraic routes to the exact gradient, plus the residual of the
/// pathwise term E_y[grad C(y)] which vanishes identically.
struct AnalyticGradient {
  ParamGrad full_identity;  ///< E[grad C + C * grad log pi]
  ParamGrad score_only;     ///< E[C * grad log pi]
  double pathwise_max_abs = 0.0;
};

AnalyticGradient exact_gradient_analytic_parts(const TabularPolicy& student,
                                               const TabularPolicy& teacher,
                                               std::span<const RewardSpec> rewards, int prompt_id,
                                               double lambda);

/// E_y[grad C(y) + C(y) * grad log pi(y)], summed exactly over the
/// enumeration space.
ParamGrad exact_gradient_analytic(const TabularPolicy& student, const TabularPolicy& teacher,
                                  std::span<const RewardSpec> rewards, int prompt_id,
                                  double lambda);

/// Replacement hook for the dense kernel inside estimator_expectation_parts;
/// used by the verification harness to prove a corrupted kernel is caught.
/// Only honored on the full-vocabulary path (topk == kTopkFull).
using DenseKernelFn = std::function<LogitVec(const LogitVec& student_logits,
                                             const LogitVec& teacher_logits)>;

/// Exact expectation of the estimator's dense and sparse contributions:
/// probability-weighted sums over every trajectory and step, no sampling.
struct EstimatorExpectation {
  ParamGrad dense;
  ParamGrad sparse;

  ParamGrad total() const { return dense + sparse; }
};

EstimatorExpectation estimator_expectation_parts(
    const TabularPolicy& student, std::span<const TabularPolicy> teachers,
    std::span<const double> weights, std::span<const RewardSpec> rewards, int prompt_id,
    double gamma, double lambda, int topk = kTopkFull,
    const DenseKernelFn& dense_kernel_override = {});

/// dense + sparse expectation; at gamma = 1 and topk = full this equals the
/// exact objective gradient.
ParamGrad estimator_expectation(const TabularPolicy& student,
                                std::span<const TabularPolicy> teachers,
                                std::span<const double> weights,
                                std::span<const RewardSpec> rewards, int prompt_id, double gamma,
                                double lambda, int topk = kTopkFull);

/// max-abs of sum_v pi(v|ctx) * score(ctx, v); identically zero.
double verify_vanishing_score(const TabularPolicy& policy, const ContextKey& ctx);

/// Exact E_y[c_k * grad log pi(y_t | ctx_t)] over trajectories of length
/// >= t (steps are 1-indexed). Unrestricted in k vs t; the k == t diagonal
/// is the visit-weighted dense term and is generically nonzero.
ParamGrad cost_score_correlation(const TabularPolicy& student, const TabularPolicy& teacher,
                                 int prompt_id, int k, int t);

/// Residual of the causality identity: past costs (k < t) are uncorrelated
/// with the step-t score. Returns the max-abs of the exact correlation;
/// throws unless 1 <= k < t <= horizon.
double verify_causality(const TabularPolicy& student, const TabularPolicy& teacher, int prompt_id,
                        int k, int t);

/// Exact gradient of the KL-regularized reward objective in minimization
/// form, beta * KL(student||teacher) - E[W], computed directly from its two
/// pieces. Equals beta * exact_gradient_analytic(..., lambda = 1/beta).
ParamGrad rlhf_gradient(const TabularPolicy& student, const TabularPolicy& teacher,
                        std::span<const RewardSpec> rewards, int prompt_id, double beta);

}  // namespace hybridgrad
