// SPDX-License-Identifier: Apache-2.0
#include "hybridgrad/bench.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>

#include "hybridgrad/random.hpp"

namespace hybridgrad {

namespace {

template <typename Scalar>
struct LogitPair {
  Vec<Scalar> student;
  Vec<Scalar> teacher;
};

template <typename Scalar>
LogitPair<Scalar> make_logits(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  const LogitVec zs = random_logits(n, 4.0, rng);
  const LogitVec zt = random_logits(n, 4.0, rng);
  return {zs.cast<Scalar>(), zt.cast<Scalar>()};
}

// ns per call; the checksum keeps the kernel from being optimized away.
template <typename Fn>
double time_ns(int repetitions, double& checksum, Fn&& fn) {
  const auto started = std::chrono::steady_clock::now();
  for (int r = 0; r < repetitions; ++r) checksum += fn();
  const auto elapsed = std::chrono::steady_clock::now() - started;
  return std::chrono::duration_cast<std::chrono::duration<double, std::nano>>(elapsed).count() /
         static_cast<double>(repetitions);
}

std::string format_ns(double ns) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%12.1f", ns);
  return buf;
}

}  // namespace

std::string BenchReport::to_string() const {
  std::ostringstream out;
  out << "dense gradient kernel benchmark (ns per call)\n";
  out << "    vocab   topk      full(f64)      topk(f64)      full(f32)      topk(f32)"
         "  nonzeros  storage_ratio\n";
  for (const BenchCase& c : cases) {
    char head[32];
    std::snprintf(head, sizeof(head), "%9lld %6lld", static_cast<long long>(c.vocab_size),
                  static_cast<long long>(c.topk));
    out << head << "  " << format_ns(c.full_ns) << "  " << format_ns(c.topk_ns) << "  "
        << format_ns(c.full_f32_ns) << "  " << format_ns(c.topk_f32_ns) << "  "
        << static_cast<long long>(c.nonzeros) << (c.nonzeros_ok ? "" : " (MISMATCH)") << "  "
        << c.storage_ratio << "\n";
  }
  char eq[64];
  std::snprintf(eq, sizeof(eq), "%.3e", equality_residual);
  out << "topk(K=|V|) vs full max residual: " << eq << "\n";
  out << "contracts: " << (contracts_ok ? "PASS" : "FAIL") << "\n";
  return out.str();
}

BenchReport run_bench(const ExperimentConfig& cfg) {
  const BenchOptions& opt = cfg.bench;
  BenchReport report;
  report.contracts_ok = true;
  double checksum = 0.0;

  for (const Eigen::Index vocab : opt.vocab_sizes) {
    const auto f64 = make_logits<double>(vocab, derive_seed(cfg.seed, static_cast<std::uint64_t>(vocab)));
    const auto f32 = make_logits<float>(vocab, derive_seed(cfg.seed, static_cast<std::uint64_t>(vocab)));

    double full_ns = 0.0, full_f32_ns = 0.0;
    {
      // Warm up once, then time the full kernel per vocabulary size.
      checksum += dense_logit_gradient_full(f64.student, f64.teacher)[0];
      full_ns = time_ns(opt.repetitions, checksum, [&] {
        return dense_logit_gradient_full(f64.student, f64.teacher)[0];
      });
      full_f32_ns = time_ns(opt.repetitions, checksum, [&] {
        return static_cast<double>(dense_logit_gradient_full(f32.student, f32.teacher)[0]);
      });
    }

    for (const Eigen::Index k : opt.topk_sizes) {
      if (k > vocab) continue;
      BenchCase bc;
      bc.vocab_size = vocab;
      bc.topk = k;
      bc.full_ns = full_ns;
      bc.full_f32_ns = full_f32_ns;

      const SparseGradVec grad = dense_logit_gradient_topk(f64.student, f64.teacher, k);
      bc.nonzeros = grad.nonzeros();
      bc.nonzeros_ok = bc.nonzeros == k;
      report.contracts_ok = report.contracts_ok && bc.nonzeros_ok;
      bc.storage_ratio = static_cast<double>(vocab) / static_cast<double>(k);

      bc.topk_ns = time_ns(opt.repetitions, checksum, [&] {
        return dense_logit_gradient_topk(f64.student, f64.teacher, k).values[0];
      });
      bc.topk_f32_ns = time_ns(opt.repetitions, checksum, [&] {
        return static_cast<double>(dense_logit_gradient_topk(f32.student, f32.teacher, k).values[0]);
      });
      report.cases.push_back(bc);
    }
  }

  // Correctness at K = |V| on the smallest configured vocabulary.
  if (!opt.vocab_sizes.empty()) {
    Eigen::Index vocab = opt.vocab_sizes.front();
    for (const Eigen::Index v : opt.vocab_sizes) vocab = std::min(vocab, v);
    const auto pair = make_logits<double>(vocab, derive_seed(cfg.seed, 7777));
    const LogitVec full = dense_logit_gradient_full(pair.student, pair.teacher);
    const LogitVec densified = densify(dense_logit_gradient_topk(pair.student, pair.teacher, vocab));
    report.equality_residual = (full - densified).abs().maxCoeff();
    report.contracts_ok = report.contracts_ok && report.equality_residual <= 1e-12;
  }

  // Fold the checksum into the report so the timed work cannot be elided.
  if (!std::isfinite(checksum)) report.contracts_ok = false;
  return report;
}

}  // namespace hybridgrad
