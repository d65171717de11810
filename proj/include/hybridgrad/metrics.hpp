// SPDX-License-Identifier: Apache-2.0
//
// Per-iteration training metrics. Written as JSON-lines (one record per
// line, flushed per line so a crash loses at most the current record); CSV
// is an export format only. CSV doubles carry 17 significant digits so both
// files parse back to identical values.
#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <vector>

namespace hybridgrad {

struct MetricsRecord {
  int iteration = 0;
  double lambda = 0.0;
  std::optional<double> exact_kl;  ///< present when enumeration is on
  double mean_reward = 0.0;
  double grad_norm_dense = 0.0;
  double grad_norm_sparse = 0.0;
  double grad_norm_total = 0.0;
  double wall_ms = 0.0;  ///< zero in verification mode
};

/// Single-writer append-only JSON-lines stream.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path);
  void append(const MetricsRecord& record);

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

/// Parse a JSON-lines metrics file; malformed lines raise ConfigError with
/// the file name and line number.
std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path);

/// Flat CSV export of a metrics file (header + one row per record).
void emit_plot_data(const std::filesystem::path& metrics_path,
                    const std::filesystem::path& csv_path);

}  // namespace hybridgrad
