// SPDX-License-Identifier: Apache-2.0
//
// Command line driver.
//
//   hybridgrad verify     run the full verification suite
//   hybridgrad gradcheck  finite-difference vs analytic kernel checks only
//   hybridgrad train      run the training loop, stream metrics
//   hybridgrad bench      time the full vs Top-K dense gradient kernels
//   hybridgrad export-csv flatten a metrics file to CSV
//
// Exit codes: 0 pass, 1 contract breach, 2 configuration error, 3 resource
// limit exceeded.
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hybridgrad/bench.hpp"
#include "hybridgrad/config.hpp"
#include "hybridgrad/errors.hpp"
#include "hybridgrad/metrics.hpp"
#include "hybridgrad/oracle.hpp"
#include "hybridgrad/train.hpp"
#include "hybridgrad/verify.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "Experiment config file");
  cmd->add_option("--seed", opts.seed, "Override the config seed");
  cmd->add_option("--out", opts.out_dir, "Override the output directory");
  cmd->add_option("--threads", opts.threads, "Worker threads (default 1)");
}

hybridgrad::ExperimentConfig assemble(const CommonOptions& opts) {
  hybridgrad::ExperimentConfig cfg;
  if (!opts.config_path.empty()) cfg = hybridgrad::load_config(opts.config_path);

  if (opts.seed) {
    cfg.seed = *opts.seed;
    cfg.hybrid.seed = *opts.seed;
  }
  if (opts.out_dir) {
    cfg.out_dir = *opts.out_dir;
  } else if (const char* env = std::getenv("HYBRIDGRAD_OUT"); env && *env) {
    cfg.out_dir = env;
  }
  if (opts.threads) cfg.threads = *opts.threads;
  hybridgrad::validate(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybridgrad: hybrid imitation/reinforcement gradient estimation on tabular "
               "autoregressive policies"};
  app.require_subcommand(1);

  CommonOptions verify_opts, gradcheck_opts, train_opts, bench_opts, export_opts;
  std::string metrics_override, csv_override;

  CLI::App* verify_cmd = app.add_subcommand("verify", "Run the verification suites");
  add_common(verify_cmd, verify_opts);
  CLI::App* gradcheck_cmd =
      app.add_subcommand("gradcheck", "Finite-difference vs analytic kernel checks");
  add_common(gradcheck_cmd, gradcheck_opts);
  CLI::App* train_cmd = app.add_subcommand("train", "Run the training loop");
  add_common(train_cmd, train_opts);
  CLI::App* bench_cmd = app.add_subcommand("bench", "Benchmark the dense gradient kernels");
  add_common(bench_cmd, bench_opts);
  CLI::App* export_cmd = app.add_subcommand("export-csv", "Flatten metrics JSON-lines to CSV");
  add_common(export_cmd, export_opts);
  export_cmd->add_option("--metrics", metrics_override, "Metrics file (default from config)");
  export_cmd->add_option("--csv", csv_override, "CSV output path (default from config)");

  try {
    app.parse(argc, argv);

    if (verify_cmd->parsed()) {
      const hybridgrad::VerifyReport report = hybridgrad::run_verify(assemble(verify_opts));
      std::cout << report.to_string();
      return report.all_pass() ? 0 : 1;
    }
    if (gradcheck_cmd->parsed()) {
      const hybridgrad::VerifyReport report = hybridgrad::run_gradcheck(assemble(gradcheck_opts));
      std::cout << report.to_string();
      return report.all_pass() ? 0 : 1;
    }
    if (train_cmd->parsed()) {
      const hybridgrad::ExperimentConfig cfg = assemble(train_opts);
      const hybridgrad::TrainResult result = hybridgrad::run_train(cfg);
      std::cout << "iterations: " << result.metrics.size() << '\n'
                << "metrics:    " << result.metrics_path.string() << '\n'
                << "policy:     " << result.policy_path.string() << '\n';
      if (!result.metrics.empty() && result.metrics.back().exact_kl)
        std::cout << "final exact KL: " << *result.metrics.back().exact_kl << '\n';
      return 0;
    }
    if (bench_cmd->parsed()) {
      const hybridgrad::BenchReport report = hybridgrad::run_bench(assemble(bench_opts));
      std::cout << report.to_string();
      return report.contracts_ok ? 0 : 1;
    }
    if (export_cmd->parsed()) {
      const hybridgrad::ExperimentConfig cfg = assemble(export_opts);
      const std::filesystem::path metrics =
          metrics_override.empty() ? cfg.metrics_path() : std::filesystem::path(metrics_override);
      const std::filesystem::path csv =
          csv_override.empty() ? cfg.csv_path() : std::filesystem::path(csv_override);
      hybridgrad::emit_plot_data(metrics, csv);
      std::cout << "wrote " << csv.string() << '\n';
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const hybridgrad::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const hybridgrad::ResourceError& e) {
    std::cerr << "resource error: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
