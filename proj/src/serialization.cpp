// SPDX-License-Identifier: Apache-2.0
#include "hybridgrad/serialization.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "hybridgrad/errors.hpp"

namespace hybridgrad {

namespace {

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

[[noreturn]] void fail(const std::string& name, int line, const std::string& what) {
  throw ConfigError(name + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

void save_policy(const TabularPolicy& policy, std::ostream& out) {
  out << policy.vocab_size() << ' ' << policy.horizon() << ' ' << policy.eos_token() << '\n';
  for (const auto& [ctx, logits] : policy.table()) {
    out << ctx.prompt_id << ' ' << ctx.prefix.size();
    for (int tok : ctx.prefix) out << ' ' << tok;
    for (Eigen::Index v = 0; v < logits.size(); ++v) out << ' ' << format_double(logits[v]);
    out << '\n';
  }
}

void save_policy(const TabularPolicy& policy, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open policy file for writing: " + path.string());
  save_policy(policy, out);
  if (!out) throw ConfigError("write failed for policy file: " + path.string());
}

TabularPolicy load_policy(std::istream& in, const std::string& name) {
  std::string line;
  int line_no = 0;

  const auto next_content_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      const auto pos = line.find_first_not_of(" \t\r");
      if (pos == std::string::npos || line[pos] == '#') continue;
      return true;
    }
    return false;
  };

  if (!next_content_line()) throw ConfigError(name + ": empty policy file");
  int vocab_size = 0, horizon = 0, eos_token = 0;
  {
    std::istringstream header(line);
    if (!(header >> vocab_size >> horizon >> eos_token))
      fail(name, line_no, "malformed header, expected 'vocab_size horizon eos_token'");
  }

  TabularPolicy policy = [&] {
    try {
      return TabularPolicy(vocab_size, horizon, eos_token);
    } catch (const std::invalid_argument& e) {
      fail(name, line_no, e.what());
    }
  }();

  while (next_content_line()) {
    std::istringstream row(line);
    ContextKey ctx;
    std::size_t prefix_len = 0;
    if (!(row >> ctx.prompt_id >> prefix_len))
      fail(name, line_no, "malformed context line, expected 'prompt_id prefix_len ...'");
    ctx.prefix.resize(prefix_len);
    for (std::size_t i = 0; i < prefix_len; ++i)
      if (!(row >> ctx.prefix[i])) fail(name, line_no, "truncated prefix");
    LogitVec logits(vocab_size);
    for (int v = 0; v < vocab_size; ++v)
      if (!(row >> logits[v])) fail(name, line_no, "expected " + std::to_string(vocab_size) +
                                                       " logits after the prefix");
    double extra;
    if (row >> extra) fail(name, line_no, "trailing values after the logits");
    try {
      policy.set_logits(ctx, std::move(logits));
    } catch (const std::invalid_argument& e) {
      fail(name, line_no, e.what());
    }
  }
  return policy;
}

TabularPolicy load_policy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open policy file: " + path.string());
  return load_policy(in, path.string());
}

}  // namespace hybridgrad
