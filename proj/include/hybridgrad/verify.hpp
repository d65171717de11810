// SPDX-License-Identifier: Apache-2.0
//
// Randomized verification suites: executable forms of the vanishing-score
// and causality identities, the dense-term/token-KL equivalence, the
// logit-gradient formula, the gradient decomposition, the RLHF
// proportionality, and Top-K/full consistency. Every suite reports its
// worst residual against a pinned tolerance; the report is byte-identical
// for a fixed (config, seed).
#pragma once

#include <string>
#include <vector>

#include "hybridgrad/config.hpp"

namespace hybridgrad {

struct SuiteResult {
  std::string name;
  int cases = 0;
  double max_residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string note;
};

struct VerifyReport {
  std::vector<SuiteResult> suites;

  bool all_pass() const;
  std::string to_string() const;
};

/// Run every verification suite on cfg.verify.instances random instances.
VerifyReport run_verify(const ExperimentConfig& cfg);

/// Only the finite-difference vs analytic kernel checks (logit gradient and
/// score function).
VerifyReport run_gradcheck(const ExperimentConfig& cfg);

}  // namespace hybridgrad
