// SPDX-License-Identifier: Apache-2.0
//
// CPU benchmark of the full-vocabulary vs Top-K dense gradient kernels,
// in double and single precision. Alongside the timings it asserts the
// kernel contracts: exactly K stored nonzeros, and Top-K densifying to the
// full gradient when K equals the vocabulary.
#pragma once

#include <string>
#include <vector>

#include "hybridgrad/config.hpp"

namespace hybridgrad {

struct BenchCase {
  Eigen::Index vocab_size = 0;
  Eigen::Index topk = 0;
  double full_ns = 0.0;       ///< ns per full-kernel call (double)
  double topk_ns = 0.0;       ///< ns per Top-K call (double)
  double full_f32_ns = 0.0;
  double topk_f32_ns = 0.0;
  Eigen::Index nonzeros = 0;  ///< stored slots in the Top-K gradient
  double storage_ratio = 0.0; ///< vocab_size / topk
  bool nonzeros_ok = false;
};

struct BenchReport {
  std::vector<BenchCase> cases;
  double equality_residual = 0.0;  ///< max |full - densify(topk(K=|V|))|
  bool contracts_ok = false;

  std::string to_string() const;
};

BenchReport run_bench(const ExperimentConfig& cfg);

}  // namespace hybridgrad
