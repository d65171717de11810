// SPDX-License-Identifier: Apache-2.0
#include "hybridgrad/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "hybridgrad/oracle.hpp"
#include "hybridgrad/serialization.hpp"

namespace hybridgrad {

namespace {

constexpr double kLemmaTol = 1e-12;
constexpr double kExactRouteTol = 1e-10;
constexpr double kFdRelTol = 1e-5;
constexpr double kKernelFdRelTol = 1e-6;
constexpr double kZeroSumTol = 1e-10;
constexpr double kTopkTol = 1e-12;

struct Instance {
  TabularPolicy student;
  TabularPolicy teacher;
  std::vector<RewardSpec> rewards;
  double lambda = 0.0;
};

TabularPolicy random_policy(const VerifyOptions& opt, std::uint64_t seed) {
  PolicyInit init;
  init.kind = PolicyInit::Kind::kRandom;
  init.seed = seed;
  init.scale = opt.logit_scale;
  return build_policy(init, opt.vocab_size, opt.horizon, /*eos_token=*/opt.vocab_size - 1);
}

Instance make_instance(const VerifyOptions& opt, std::uint64_t seed, int index) {
  Instance inst{random_policy(opt, derive_seed(seed, 2 * static_cast<std::uint64_t>(index))),
                random_policy(opt, derive_seed(seed, 2 * static_cast<std::uint64_t>(index) + 1)),
                {},
                0.0};
  Rng rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(index)));
  RewardSpec reward;
  reward.kind = RewardKind::kTargetTokenCount;
  reward.target_token = static_cast<int>(rng() % static_cast<std::uint64_t>(opt.vocab_size));
  reward.weight = 1.0;
  inst.rewards.push_back(reward);
  const double lambdas[] = {0.0, 0.5, 2.0};
  inst.lambda = lambdas[index % 3];
  return inst;
}

double relative_diff(const ParamGrad& a, const ParamGrad& b) {
  const double scale = std::max({a.max_abs(), b.max_abs(), 1e-12});
  return max_abs_diff(a, b) / scale;
}

double relative_diff(const LogitVec& a, const LogitVec& b) {
  const double scale = std::max({a.abs().maxCoeff(), b.abs().maxCoeff(), 1e-12});
  return (a - b).abs().maxCoeff() / scale;
}

// Central finite differences of kl(softmax(z_s), softmax(z_t)) in z_s.
LogitVec kernel_fd_gradient(const LogitVec& student_logits, const LogitVec& teacher_logits,
                            double h) {
  LogitVec grad(student_logits.size());
  const ProbVec q = softmax(teacher_logits);
  for (Eigen::Index v = 0; v < student_logits.size(); ++v) {
    LogitVec z = student_logits;
    z[v] = student_logits[v] + h;
    const double plus = kl_divergence(softmax(z), q);
    z[v] = student_logits[v] - h;
    const double minus = kl_divergence(softmax(z), q);
    grad[v] = (plus - minus) / (2.0 * h);
  }
  return grad;
}

SuiteResult finish(SuiteResult suite) {
  suite.pass = suite.max_residual <= suite.tolerance;
  return suite;
}

SuiteResult lemma1_suite(const std::vector<Instance>& instances, int prompt_id) {
  SuiteResult suite{.name = "lemma1_vanishing_score", .tolerance = kLemmaTol};
  for (const Instance& inst : instances)
    for (const ContextKey& ctx : reachable_contexts(inst.student, prompt_id)) {
      suite.max_residual =
          std::max(suite.max_residual, verify_vanishing_score(inst.student, ctx));
      ++suite.cases;
    }
  return finish(suite);
}

SuiteResult lemma2_suite(const std::vector<Instance>& instances, int prompt_id) {
  SuiteResult suite{.name = "lemma2_causality", .tolerance = kLemmaTol};
  for (const Instance& inst : instances)
    for (int t = 2; t <= inst.student.horizon(); ++t)
      for (int k = 1; k < t; ++k) {
        suite.max_residual = std::max(
            suite.max_residual, verify_causality(inst.student, inst.teacher, prompt_id, k, t));
        ++suite.cases;
      }
  return finish(suite);
}

SuiteResult prop1_suite(const std::vector<Instance>& instances, int prompt_id) {
  SuiteResult suite{.name = "prop1_dense_equals_expected_cost_score", .tolerance = kLemmaTol};
  for (const Instance& inst : instances) {
    const std::vector<TabularPolicy> teachers{inst.teacher};
    const std::vector<double> weights{1.0};
    for (const ContextKey& ctx : reachable_contexts(inst.student, prompt_id)) {
      const LogitVec dense = dense_term_block(inst.student, teachers, weights, ctx);
      const ProbVec p = token_distribution(inst.student, ctx);
      const LogitVec log_p = log_token_distribution(inst.student, ctx);
      const LogitVec log_q = log_token_distribution(inst.teacher, ctx);
      LogitVec expected = LogitVec::Zero(p.size());
      for (int v = 0; v < inst.student.vocab_size(); ++v)
        expected += p[v] * (log_p[v] - log_q[v]) * score_block(inst.student, ctx, v);
      suite.max_residual = std::max(suite.max_residual, (dense - expected).abs().maxCoeff());
      ++suite.cases;
    }
  }
  return finish(suite);
}

SuiteResult prop2_fd_suite(std::uint64_t seed) {
  SuiteResult suite{.name = "prop2_kernel_vs_finite_differences", .tolerance = kKernelFdRelTol};
  Rng rng(derive_seed(seed, 42));
  for (int i = 0; i < 100; ++i) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng() % 7);  // |V| in 2..8
    const LogitVec zs = random_logits(n, 2.0, rng);
    const LogitVec zt = random_logits(n, 2.0, rng);
    const LogitVec analytic = dense_logit_gradient_full(zs, zt);
    const LogitVec fd = kernel_fd_gradient(zs, zt, 1e-5);
    suite.max_residual = std::max(suite.max_residual, relative_diff(analytic, fd));
    ++suite.cases;
  }
  return finish(suite);
}

SuiteResult prop2_zero_sum_suite(std::uint64_t seed) {
  SuiteResult suite{.name = "prop2_gradient_zero_sum", .tolerance = kZeroSumTol};
  Rng rng(derive_seed(seed, 43));
  for (int i = 0; i < 100; ++i) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng() % 31);
    const LogitVec grad =
        dense_logit_gradient_full(random_logits(n, 4.0, rng), random_logits(n, 4.0, rng));
    suite.max_residual = std::max(suite.max_residual, std::abs(grad.sum()));
    ++suite.cases;
  }
  return finish(suite);
}

SuiteResult prop2_fixed_point_suite(std::uint64_t seed) {
  SuiteResult suite{.name = "prop2_zero_at_equal_distributions", .tolerance = kZeroSumTol};
  Rng rng(derive_seed(seed, 44));
  for (int i = 0; i < 100; ++i) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng() % 7);
    const LogitVec z = random_logits(n, 2.0, rng);
    // Same distribution, different logit representative (shift invariance).
    const LogitVec shifted = z + uniform_symmetric(rng, 3.0);
    suite.max_residual =
        std::max(suite.max_residual, dense_logit_gradient_full(z, shifted).abs().maxCoeff());
    ++suite.cases;
  }
  return finish(suite);
}

SuiteResult theorem1_suite(const std::vector<Instance>& instances, int prompt_id,
                           bool corrupt_dense) {
  SuiteResult suite{.name = "theorem1_estimator_equals_exact_gradient",
                    .tolerance = kExactRouteTol};
  DenseKernelFn kernel;
  if (corrupt_dense) {
    kernel = [](const LogitVec& zs, const LogitVec& zt) {
      LogitVec grad = dense_logit_gradient_full(zs, zt);
      grad[0] += 1e-3;  // negative control: a broken kernel must be caught
      return grad;
    };
    suite.note = "corrupt_dense active";
  }
  for (const Instance& inst : instances) {
    const std::vector<TabularPolicy> teachers{inst.teacher};
    const std::vector<double> weights{1.0};
    const ParamGrad expectation =
        estimator_expectation_parts(inst.student, teachers, weights, inst.rewards, prompt_id,
                                    /*gamma=*/1.0, inst.lambda, kTopkFull, kernel)
            .total();
    const ParamGrad analytic = exact_gradient_analytic(inst.student, inst.teacher, inst.rewards,
                                                       prompt_id, inst.lambda);
    suite.max_residual = std::max(suite.max_residual, max_abs_diff(expectation, analytic));
    ++suite.cases;
  }
  return finish(suite);
}

SuiteResult theorem1_fd_suite(const std::vector<Instance>& instances, int prompt_id) {
  SuiteResult suite{.name = "theorem1_exact_routes_vs_finite_differences",
                    .tolerance = kFdRelTol};
  for (const Instance& inst : instances) {
    const std::vector<TabularPolicy> teachers{inst.teacher};
    const std::vector<double> weights{1.0};
    const ParamGrad fd = exact_gradient_fd(inst.student, inst.teacher, inst.rewards, prompt_id,
                                           inst.lambda, 1e-5);
    const ParamGrad analytic = exact_gradient_analytic(inst.student, inst.teacher, inst.rewards,
                                                       prompt_id, inst.lambda);
    const ParamGrad expectation = estimator_expectation(
        inst.student, teachers, weights, inst.rewards, prompt_id, 1.0, inst.lambda);
    suite.max_residual = std::max({suite.max_residual, relative_diff(analytic, fd),
                                   relative_diff(expectation, fd)});
    ++suite.cases;
  }
  return finish(suite);
}

SuiteResult rlhf_suite(const std::vector<Instance>& instances, int prompt_id) {
  SuiteResult suite{.name = "rlhf_equivalence_beta_inverse_lambda", .tolerance = kExactRouteTol};
  for (const Instance& inst : instances)
    for (const double beta : {0.5, 1.0, 2.0}) {
      const ParamGrad direct =
          rlhf_gradient(inst.student, inst.teacher, inst.rewards, prompt_id, beta);
      const ParamGrad scaled =
          beta * exact_gradient_analytic(inst.student, inst.teacher, inst.rewards, prompt_id,
                                         1.0 / beta);
      suite.max_residual = std::max(suite.max_residual, max_abs_diff(direct, scaled));
      ++suite.cases;
    }
  return finish(suite);
}

SuiteResult topk_suite(std::uint64_t seed) {
  SuiteResult suite{.name = "topk_full_consistency", .tolerance = kTopkTol};
  Rng rng(derive_seed(seed, 45));
  for (const Eigen::Index n : {4, 16, 64, 512}) {
    for (int i = 0; i < 8; ++i) {
      const LogitVec zs = random_logits(n, 3.0, rng);
      const LogitVec zt = random_logits(n, 3.0, rng);
      const LogitVec full = dense_logit_gradient_full(zs, zt);
      const LogitVec densified = densify(dense_logit_gradient_topk(zs, zt, n));
      suite.max_residual = std::max(suite.max_residual, (full - densified).abs().maxCoeff());
      ++suite.cases;
    }
  }
  return finish(suite);
}

SuiteResult score_fd_suite(std::uint64_t seed, const VerifyOptions& opt) {
  SuiteResult suite{.name = "score_function_vs_finite_differences",
                    .tolerance = kKernelFdRelTol};
  constexpr double h = 1e-6;
  for (int i = 0; i < 20; ++i) {
    TabularPolicy policy = random_policy(opt, derive_seed(seed, 500 + static_cast<std::uint64_t>(i)));
    Rng rng(derive_seed(seed, 600 + static_cast<std::uint64_t>(i)));
    const ContextKey ctx{0, {}};
    const int token = static_cast<int>(rng() % static_cast<std::uint64_t>(policy.vocab_size()));
    const LogitVec analytic = score_block(policy, ctx, token);

    const LogitVec original = policy.logits(ctx);
    LogitVec fd(policy.vocab_size());
    for (int v = 0; v < policy.vocab_size(); ++v) {
      LogitVec bumped = original;
      bumped[v] = original[v] + h;
      policy.set_logits(ctx, bumped);
      const double plus = log_token_prob(policy, ctx, token);
      bumped[v] = original[v] - h;
      policy.set_logits(ctx, bumped);
      const double minus = log_token_prob(policy, ctx, token);
      fd[v] = (plus - minus) / (2.0 * h);
    }
    policy.set_logits(ctx, original);
    suite.max_residual = std::max(suite.max_residual, relative_diff(analytic, fd));
    ++suite.cases;
  }
  return finish(suite);
}

std::string format_scientific(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", x);
  return buf;
}

}  // namespace

bool VerifyReport::all_pass() const {
  return std::all_of(suites.begin(), suites.end(),
                     [](const SuiteResult& s) { return s.pass; });
}

std::string VerifyReport::to_string() const {
  std::ostringstream out;
  std::size_t width = 0;
  for (const SuiteResult& s : suites) width = std::max(width, s.name.size());
  for (const SuiteResult& s : suites) {
    out << (s.pass ? "[PASS] " : "[FAIL] ") << s.name
        << std::string(width - s.name.size() + 2, ' ') << "cases=" << s.cases
        << "  max_residual=" << format_scientific(s.max_residual)
        << "  tol=" << format_scientific(s.tolerance);
    if (!s.note.empty()) out << "  (" << s.note << ")";
    out << '\n';
  }
  out << "overall: " << (all_pass() ? "PASS" : "FAIL") << '\n';
  return out.str();
}

VerifyReport run_verify(const ExperimentConfig& cfg) {
  const VerifyOptions& opt = cfg.verify;
  const int prompt_id = 0;

  std::vector<Instance> instances;
  instances.reserve(static_cast<std::size_t>(opt.instances));
  for (int i = 0; i < opt.instances; ++i) instances.push_back(make_instance(opt, cfg.seed, i));

  VerifyReport report;
  report.suites.push_back(lemma1_suite(instances, prompt_id));
  report.suites.push_back(lemma2_suite(instances, prompt_id));
  report.suites.push_back(prop1_suite(instances, prompt_id));
  report.suites.push_back(prop2_fd_suite(cfg.seed));
  report.suites.push_back(prop2_zero_sum_suite(cfg.seed));
  report.suites.push_back(prop2_fixed_point_suite(cfg.seed));
  report.suites.push_back(theorem1_suite(instances, prompt_id, opt.corrupt_dense));
  report.suites.push_back(theorem1_fd_suite(instances, prompt_id));
  report.suites.push_back(rlhf_suite(instances, prompt_id));
  report.suites.push_back(topk_suite(cfg.seed));
  return report;
}

VerifyReport run_gradcheck(const ExperimentConfig& cfg) {
  VerifyReport report;
  report.suites.push_back(prop2_fd_suite(cfg.seed));
  report.suites.push_back(prop2_zero_sum_suite(cfg.seed));
  report.suites.push_back(prop2_fixed_point_suite(cfg.seed));
  report.suites.push_back(score_fd_suite(cfg.seed, cfg.verify));
  return report;
}

}  // namespace hybridgrad
