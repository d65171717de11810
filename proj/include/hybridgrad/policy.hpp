// SPDX-License-Identifier: Apache-2.0
//
// Exactly representable autoregressive policies over a small vocabulary.
//
// A TabularPolicy stores one logit vector per full context (prompt id plus
// token prefix, no truncation); contexts without a stored entry act as the
// all-zeros logit vector, i.e. the uniform distribution. Generation stops at
// the designated EOS token or, force-terminated, at the horizon, which makes
// the policy a proper distribution over terminated sequences.
//
// Policies are read-shared during rollout generation; parameter updates must
// happen under exclusive access between iterations.
#pragma once

#include <compare>
#include <map>
#include <vector>

#include "hybridgrad/prob_kernels.hpp"
#include "hybridgrad/random.hpp"

namespace hybridgrad {

/// Conditioning pair: which prompt, and the tokens generated so far.
struct ContextKey {
  int prompt_id = 0;
  std::vector<int> prefix;

  friend auto operator<=>(const ContextKey&, const ContextKey&) = default;
};

class TabularPolicy {
 public:
  TabularPolicy(int vocab_size, int horizon, int eos_token);

  int vocab_size() const { return vocab_size_; }
  int horizon() const { return horizon_; }
  int eos_token() const { return eos_token_; }

  /// Stored logits, or the all-zeros vector when the context is absent.
  LogitVec logits(const ContextKey& ctx) const;
  bool has_entry(const ContextKey& ctx) const { return table_.count(ctx) > 0; }

  void set_logits(const ContextKey& ctx, LogitVec z);
  /// In-place logits += delta, materializing the entry if absent.
  void add_to_logits(const ContextKey& ctx, const LogitVec& delta);

  /// Stored entries in sorted key order.
  const std::map<ContextKey, LogitVec>& table() const { return table_; }

 private:
  void check_context(const ContextKey& ctx) const;

  int vocab_size_;
  int horizon_;
  int eos_token_;
  std::map<ContextKey, LogitVec> table_;
};

/// Gradient container shaped like TabularPolicy parameters: one |V|-block per
/// context, absent blocks meaning zero. Blocks are kept in sorted key order
/// so reductions are deterministic.
class ParamGrad {
 public:
  ParamGrad() = default;
  explicit ParamGrad(Eigen::Index block_dim) : block_dim_(block_dim) {}

  Eigen::Index block_dim() const { return block_dim_; }
  bool empty() const { return blocks_.empty(); }

  /// block(ctx) += delta, materializing the block if absent.
  void add_block(const ContextKey& ctx, const LogitVec& delta);
  /// Zero vector when the block is absent.
  LogitVec block(const ContextKey& ctx) const;
  const std::map<ContextKey, LogitVec>& blocks() const { return blocks_; }

  ParamGrad& operator+=(const ParamGrad& other);
  ParamGrad& operator-=(const ParamGrad& other);
  ParamGrad& operator*=(double s);

  friend ParamGrad operator*(double s, ParamGrad g) {
    g *= s;
    return g;
  }
  friend ParamGrad operator+(ParamGrad a, const ParamGrad& b) {
    a += b;
    return a;
  }
  friend ParamGrad operator-(ParamGrad a, const ParamGrad& b) {
    a -= b;
    return a;
  }

  double max_abs() const;

 private:
  Eigen::Index block_dim_ = 0;
  std::map<ContextKey, LogitVec> blocks_;
};

/// max_ij |a_ij - b_ij| over the union of blocks.
double max_abs_diff(const ParamGrad& a, const ParamGrad& b);

/// A sampled response: tokens, their contexts, and per-step bookkeeping.
/// costs[t] == student_logp[t] - teacher_logp[t] once both are filled.
struct Trajectory {
  int prompt_id = 0;
  std::vector<int> tokens;
  std::vector<ContextKey> contexts;
  std::vector<double> student_logp;
  std::vector<double> teacher_logp;
  std::vector<double> costs;
  std::vector<double> rewards;  // one entry per reward function

  int length() const { return static_cast<int>(tokens.size()); }
};

/// Next-token distribution at a context: softmax of the stored logits
/// (uniform when the context is absent). Throws when the prefix is at or
/// beyond the horizon.
ProbVec token_distribution(const TabularPolicy& policy, const ContextKey& ctx);

/// Elementwise log of token_distribution, computed stably from the logits.
LogitVec log_token_distribution(const TabularPolicy& policy, const ContextKey& ctx);

/// log pi(token | ctx).
double log_token_prob(const TabularPolicy& policy, const ContextKey& ctx, int token);

/// Draw one response: tokens sampled sequentially from token_distribution,
/// stopping at the EOS token or force-terminated at the horizon. Fills
/// tokens, contexts, and student_logp.
Trajectory sample_trajectory(const TabularPolicy& policy, int prompt_id, Rng& rng);

/// log pi(y | x) = sum_t log pi(y_t | ctx_t), recomputed from the policy.
double log_prob(const TabularPolicy& policy, const Trajectory& traj);

/// onehot(token) - pi(.|ctx): the ctx block of the score function.
LogitVec score_block(const TabularPolicy& policy, const ContextKey& ctx, int token);

/// Gradient of log pi(token | ctx) with respect to the policy table. Only
/// the ctx block is nonzero; its expectation under pi(.|ctx) is zero.
ParamGrad score_function(const TabularPolicy& policy, const ContextKey& ctx, int token);

}  // namespace hybridgrad
