// SPDX-License-Identifier: Apache-2.0
#include "hybridgrad/metrics.hpp"

#include <cstdio>
#include <string>

#include <json.hpp>

#include "hybridgrad/errors.hpp"

namespace hybridgrad {

namespace {

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

MetricsWriter::MetricsWriter(const std::filesystem::path& path) : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::trunc);
  if (!out_) throw ConfigError("cannot open metrics file for writing: " + path.string());
}

void MetricsWriter::append(const MetricsRecord& record) {
  nlohmann::ordered_json line{
      {"iteration", record.iteration},
      {"lambda", record.lambda},
  };
  if (record.exact_kl) line["exact_kl"] = *record.exact_kl;
  line["mean_reward"] = record.mean_reward;
  line["grad_norm_dense"] = record.grad_norm_dense;
  line["grad_norm_sparse"] = record.grad_norm_sparse;
  line["grad_norm_total"] = record.grad_norm_total;
  line["wall_ms"] = record.wall_ms;
  out_ << line.dump() << '\n';
  out_.flush();
  if (!out_) throw ConfigError("write failed for metrics file: " + path_.string());
}

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open metrics file: " + path.string());

  std::vector<MetricsRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(line);
      MetricsRecord record;
      record.iteration = parsed.at("iteration").get<int>();
      record.lambda = parsed.at("lambda").get<double>();
      if (parsed.contains("exact_kl")) record.exact_kl = parsed.at("exact_kl").get<double>();
      record.mean_reward = parsed.at("mean_reward").get<double>();
      record.grad_norm_dense = parsed.at("grad_norm_dense").get<double>();
      record.grad_norm_sparse = parsed.at("grad_norm_sparse").get<double>();
      record.grad_norm_total = parsed.at("grad_norm_total").get<double>();
      record.wall_ms = parsed.at("wall_ms").get<double>();
      records.push_back(record);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": malformed metrics line: " + e.what());
    }
  }
  return records;
}

void emit_plot_data(const std::filesystem::path& metrics_path,
                    const std::filesystem::path& csv_path) {
  const std::vector<MetricsRecord> records = read_metrics(metrics_path);
  if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
  std::ofstream out(csv_path, std::ios::trunc);
  if (!out) throw ConfigError("cannot open CSV file for writing: " + csv_path.string());

  out << "iteration,lambda,exact_kl,mean_reward,grad_norm_dense,grad_norm_sparse,"
         "grad_norm_total,wall_ms\n";
  for (const MetricsRecord& r : records) {
    out << r.iteration << ',' << format_double(r.lambda) << ','
        << (r.exact_kl ? format_double(*r.exact_kl) : "") << ','
        << format_double(r.mean_reward) << ',' << format_double(r.grad_norm_dense) << ','
        << format_double(r.grad_norm_sparse) << ',' << format_double(r.grad_norm_total) << ','
        << format_double(r.wall_ms) << '\n';
  }
  if (!out) throw ConfigError("write failed for CSV file: " + csv_path.string());
}

}  // namespace hybridgrad
