// SPDX-License-Identifier: Apache-2.0
//
// The outer training loop: per iteration sample a prompt, run the group
// rollout estimator, descend, and append one metrics record.
#pragma once

#include <filesystem>
#include <vector>

#include "hybridgrad/config.hpp"
#include "hybridgrad/metrics.hpp"
#include "hybridgrad/policy.hpp"

namespace hybridgrad {

struct TrainResult {
  TabularPolicy student;
  std::vector<MetricsRecord> metrics;
  std::filesystem::path metrics_path;
  std::filesystem::path policy_path;
};

/// Run cfg.iterations training iterations. Metrics stream to the JSON-lines
/// file as they are produced; the final student policy is serialized at the
/// end. In verification mode the run is single-threaded and wall-clock
/// fields are zeroed so identical (config, seed) runs produce byte-identical
/// outputs.
TrainResult run_train(const ExperimentConfig& cfg);

}  // namespace hybridgrad
