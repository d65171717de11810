// SPDX-License-Identifier: Apache-2.0
#include "hybridgrad/train.hpp"

#include <chrono>

#include "hybridgrad/estimator.hpp"
#include "hybridgrad/oracle.hpp"
#include "hybridgrad/serialization.hpp"

namespace hybridgrad {

namespace {

// Weighted exact KL against the teacher mixture, averaged over the prompts.
double exact_kl_metric(const TabularPolicy& student, std::span<const TabularPolicy> teachers,
                       std::span<const double> weights, std::span<const int> prompts) {
  double total = 0.0;
  for (const int prompt : prompts)
    for (std::size_t m = 0; m < teachers.size(); ++m)
      total += weights[m] * exact_trajectory_kl(student, teachers[m], prompt);
  return total / static_cast<double>(prompts.size());
}

}  // namespace

TrainResult run_train(const ExperimentConfig& cfg) {
  validate(cfg);

  TabularPolicy student = build_student(cfg);
  const std::vector<TabularPolicy> teachers = build_teachers(cfg);
  const std::vector<double> weights = teacher_weights(cfg);
  const int threads = cfg.verification_mode ? 1 : cfg.threads;

  std::filesystem::create_directories(cfg.out_dir);
  MetricsWriter writer(cfg.metrics_path());

  TrainResult result{std::move(student), {}, cfg.metrics_path(), cfg.policy_path()};
  Rng rng(cfg.seed);

  for (int iteration = 0; iteration < cfg.iterations; ++iteration) {
    const auto started = std::chrono::steady_clock::now();
    const int prompt =
        cfg.prompts[static_cast<std::size_t>(rng() % cfg.prompts.size())];

    const HybridGradientStats stats =
        hybrid_gradient_stats(result.student, teachers, weights, cfg.rewards, prompt, cfg.hybrid,
                              rng, iteration, threads);
    apply_update(result.student, stats.gradient, cfg.hybrid.learning_rate);

    MetricsRecord record;
    record.iteration = iteration;
    record.lambda = stats.lambda;
    if (cfg.enumeration)
      record.exact_kl = exact_kl_metric(result.student, teachers, weights, cfg.prompts);
    record.mean_reward = stats.mean_reward;
    record.grad_norm_dense = stats.dense_norm;
    record.grad_norm_sparse = stats.sparse_norm;
    record.grad_norm_total = stats.total_norm;
    if (!cfg.verification_mode) {
      const auto elapsed = std::chrono::steady_clock::now() - started;
      record.wall_ms =
          std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(elapsed).count();
    }
    writer.append(record);
    result.metrics.push_back(record);
  }

  save_policy(result.student, result.policy_path);
  return result;
}

}  // namespace hybridgrad
