// SPDX-License-Identifier: Apache-2.0
//
// Stateless numeric kernels over vocabulary-sized vectors: softmax, KL
// divergence, and the analytic logit-level gradient of KL(p||q) with respect
// to the student logits, in full-vocabulary and Top-K forms.
//
// All kernels are pure functions templated on the scalar type; double is the
// default throughout the library, the float instantiations exist for the
// benchmark. Safe to call concurrently from any number of threads.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace hybridgrad {

template <typename Scalar>
using Vec = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

/// Dense real vector of log-odds over the vocabulary.
using LogitVec = Vec<double>;
/// Dense probability vector over the vocabulary (entries >= 0, sum == 1).
using ProbVec = Vec<double>;

/// Floor applied to teacher probabilities inside log q. Softmax of finite
/// logits is strictly positive, so the floor is inert on kernel-internal
/// paths; it only guards externally supplied probability vectors.
inline constexpr double kTeacherProbFloor = 1e-12;

/// Sparse logit-gradient: semantically a length-`dim` vector that is zero
/// everywhere except at `indices` (strictly increasing, unique).
template <typename Scalar>
struct SparseGrad {
  Eigen::Array<Eigen::Index, Eigen::Dynamic, 1> indices;
  Vec<Scalar> values;
  Eigen::Index dim = 0;

  Eigen::Index nonzeros() const { return indices.size(); }
};

using SparseGradVec = SparseGrad<double>;

namespace detail {

template <typename Derived>
void require_logits(const Eigen::ArrayBase<Derived>& z, const char* who) {
  if (z.size() < 2)
    throw std::invalid_argument(std::string(who) + ": vector needs at least 2 entries");
  if (!z.isFinite().all())
    throw std::invalid_argument(std::string(who) + ": non-finite logit");
}

template <typename DA, typename DB>
void require_same_size(const Eigen::ArrayBase<DA>& a, const Eigen::ArrayBase<DB>& b,
                       const char* who) {
  if (a.size() != b.size())
    throw std::invalid_argument(std::string(who) + ": length mismatch (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                                ")");
}

// Sequential left-to-right sum. Keeps the full kernel and the K = |V| Top-K
// kernel on the identical summation order.
template <typename Scalar>
Scalar ordered_sum(const Vec<Scalar>& v) {
  Scalar acc = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) acc += v[i];
  return acc;
}

}  // namespace detail

/// log softmax(z), stabilized by max subtraction.
template <typename Derived>
Vec<typename Derived::Scalar> log_softmax(const Eigen::ArrayBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  detail::require_logits(logits, "log_softmax");
  Vec<Scalar> shifted = logits - logits.maxCoeff();
  return shifted - std::log(shifted.exp().sum());
}

/// softmax(z). Shift invariant: softmax(z + c*1) == softmax(z).
template <typename Derived>
Vec<typename Derived::Scalar> softmax(const Eigen::ArrayBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  detail::require_logits(logits, "softmax");
  Vec<Scalar> e = (logits - logits.maxCoeff()).exp();
  return e / e.sum();
}

/// D_KL(p || q) = sum_i p_i (log p_i - log q_i).
///
/// Zero entries of p contribute zero; q is clamped below at
/// kTeacherProbFloor inside the log.
template <typename DP, typename DQ>
typename DP::Scalar kl_divergence(const Eigen::ArrayBase<DP>& p, const Eigen::ArrayBase<DQ>& q) {
  using Scalar = typename DP::Scalar;
  detail::require_same_size(p, q, "kl_divergence");
  Scalar acc = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const Scalar pi = p[i];
    if (pi > Scalar(0))
      acc += pi * (std::log(pi) - std::log(std::max<Scalar>(q[i], Scalar(kTeacherProbFloor))));
  }
  return acc;
}

/// Gradient of D_KL(softmax(z_s) || softmax(z_t)) with respect to z_s:
///
///   grad = p (*) (log p - log q - KL(p||q))
///
/// where p = softmax(z_s), q = softmax(z_t). The components sum to zero
/// (softmax shift invariance) and the gradient vanishes exactly at p == q.
template <typename DS, typename DT>
Vec<typename DS::Scalar> dense_logit_gradient_full(const Eigen::ArrayBase<DS>& student_logits,
                                                   const Eigen::ArrayBase<DT>& teacher_logits) {
  using Scalar = typename DS::Scalar;
  detail::require_same_size(student_logits, teacher_logits, "dense_logit_gradient_full");
  detail::require_logits(student_logits, "dense_logit_gradient_full");
  detail::require_logits(teacher_logits, "dense_logit_gradient_full");

  const Vec<Scalar> log_p = log_softmax(student_logits);
  const Vec<Scalar> log_q = log_softmax(teacher_logits);
  const Vec<Scalar> p = log_p.exp();
  const Vec<Scalar> log_ratio = log_p - log_q;
  const Scalar kl = detail::ordered_sum<Scalar>(p * log_ratio);
  return p * (log_ratio - kl);
}

/// Positions of the k largest entries of v, ties broken toward the lower
/// index; the result is sorted ascending.
template <typename Derived>
std::vector<Eigen::Index> top_k_indices(const Eigen::ArrayBase<Derived>& v, Eigen::Index k) {
  if (k < 1 || k > v.size())
    throw std::invalid_argument("top_k_indices: k out of range [1, " + std::to_string(v.size()) +
                                "]");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(v.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  const auto larger = [&v](Eigen::Index a, Eigen::Index b) {
    if (v[a] != v[b]) return v[a] > v[b];
    return a < b;
  };
  std::nth_element(idx.begin(), idx.begin() + (k - 1), idx.end(), larger);
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Top-K form of dense_logit_gradient_full.
///
/// The K retained positions are the largest *student* logits; probabilities
/// are taken raw from the full softmax (no renormalization) and the KL
/// constant is the sum restricted to the retained positions, which biases
/// the result when the tail mass is not negligible. Off-index entries are
/// exactly zero. With k == |V| the result densifies to the full gradient.
template <typename DS, typename DT>
SparseGrad<typename DS::Scalar> dense_logit_gradient_topk(
    const Eigen::ArrayBase<DS>& student_logits, const Eigen::ArrayBase<DT>& teacher_logits,
    Eigen::Index k) {
  using Scalar = typename DS::Scalar;
  detail::require_same_size(student_logits, teacher_logits, "dense_logit_gradient_topk");
  detail::require_logits(student_logits, "dense_logit_gradient_topk");
  detail::require_logits(teacher_logits, "dense_logit_gradient_topk");
  if (k < 1 || k > student_logits.size())
    throw std::invalid_argument("dense_logit_gradient_topk: K out of range [1, " +
                                std::to_string(student_logits.size()) + "]");

  const std::vector<Eigen::Index> idx = top_k_indices(student_logits, k);

  const Vec<Scalar> log_p = log_softmax(student_logits);
  const Vec<Scalar> log_q = log_softmax(teacher_logits);

  SparseGrad<Scalar> out;
  out.dim = student_logits.size();
  out.indices.resize(k);
  out.values.resize(k);

  Vec<Scalar> p(k);
  Vec<Scalar> log_ratio(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const Eigen::Index i = idx[static_cast<std::size_t>(j)];
    out.indices[j] = i;
    p[j] = std::exp(log_p[i]);
    log_ratio[j] = log_p[i] - log_q[i];
  }
  const Scalar kl_approx = detail::ordered_sum<Scalar>(p * log_ratio);
  out.values = p * (log_ratio - kl_approx);
  return out;
}

template <typename Scalar>
Vec<Scalar> densify(const SparseGrad<Scalar>& g) {
  Vec<Scalar> out = Vec<Scalar>::Zero(g.dim);
  for (Eigen::Index j = 0; j < g.indices.size(); ++j) out[g.indices[j]] = g.values[j];
  return out;
}

}  // namespace hybridgrad
