// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration: one flat key/value file with [sections] drives
// an entire run. Keys are documented in docs/config.md. The only
// environment override honored anywhere is HYBRIDGRAD_OUT for the output
// directory.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hybridgrad/estimator.hpp"
#include "hybridgrad/returns.hpp"

namespace hybridgrad {

/// How to construct a policy: all-uniform, random logits, or from a file.
struct PolicyInit {
  enum class Kind { kUniform, kRandom, kFile };
  Kind kind = Kind::kUniform;
  std::filesystem::path path;  // kFile
  std::uint64_t seed = 0;      // kRandom
  double scale = 1.0;          // kRandom: logits uniform in [-scale, scale]
  double weight = 1.0;         // teacher mixture weight
};

struct VerifyOptions {
  int instances = 20;        ///< randomized instances per suite
  int vocab_size = 3;
  int horizon = 3;
  double logit_scale = 2.0;  ///< random logits uniform in [-scale, scale]
  bool corrupt_dense = false;  ///< negative control: perturb the dense kernel
};

struct BenchOptions {
  std::vector<Eigen::Index> vocab_sizes = {1024, 32768, 128000};
  std::vector<Eigen::Index> topk_sizes = {16, 32, 256};
  int repetitions = 200;  ///< kernel invocations per timing sample
};

struct ExperimentConfig {
  // [policy]
  int vocab_size = 3;
  int horizon = 3;
  int eos_token = 2;
  PolicyInit student;
  std::vector<PolicyInit> teachers = {PolicyInit{}};

  // [rewards]
  std::vector<RewardSpec> rewards;

  // [estimator]
  HybridConfig hybrid;

  // [run]
  int iterations = 100;
  std::vector<int> prompts = {0};
  bool enumeration = true;       ///< record exact trajectory KL per iteration
  int threads = 1;
  bool verification_mode = true; ///< force threads=1 and zero wall-clock in
                                 ///< metrics so outputs are byte-reproducible

  // [verify] / [bench]
  VerifyOptions verify;
  BenchOptions bench;

  // [output]
  std::filesystem::path out_dir = "out";
  std::string metrics_file = "metrics.jsonl";
  std::string policy_file = "final_policy.txt";
  std::string csv_file = "metrics.csv";

  std::uint64_t seed = 0;

  std::filesystem::path metrics_path() const { return out_dir / metrics_file; }
  std::filesystem::path policy_path() const { return out_dir / policy_file; }
  std::filesystem::path csv_path() const { return out_dir / csv_file; }
};

/// Parse a config file. Throws ConfigError with file:line on malformed
/// input, unknown keys, or out-of-range values; also verifies that every
/// referenced policy file exists.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Range-check a fully assembled config (used by load_config and by tests
/// that build configs programmatically).
void validate(const ExperimentConfig& cfg);

inline constexpr int kDefaultPrompts[] = {0};

/// Materialize a policy per its init spec. Random init fills every
/// non-terminal context of the prefix tree, for each listed prompt, with
/// logits uniform in [-scale, scale], depth-first in token order.
TabularPolicy build_policy(const PolicyInit& init, int vocab_size, int horizon, int eos_token,
                           std::span<const int> prompts = kDefaultPrompts);

/// The configured student policy.
TabularPolicy build_student(const ExperimentConfig& cfg);

/// All teachers of a config, in order.
std::vector<TabularPolicy> build_teachers(const ExperimentConfig& cfg);

/// Teacher mixture weights, aligned with build_teachers.
std::vector<double> teacher_weights(const ExperimentConfig& cfg);

}  // namespace hybridgrad
