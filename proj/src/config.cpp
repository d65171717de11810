// SPDX-License-Identifier: Apache-2.0
#include "hybridgrad/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "hybridgrad/errors.hpp"
#include "hybridgrad/random.hpp"

namespace hybridgrad {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

struct KeyValue {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;
};

std::vector<KeyValue> parse_ini(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());

  std::vector<KeyValue> entries;
  std::string section;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // strip comments
    for (const char marker : {'#', ';'}) {
      const auto pos = line.find(marker);
      if (pos != std::string::npos) line.erase(pos);
    }
    const std::string content = trim(line);
    if (content.empty()) continue;
    if (content.front() == '[') {
      if (content.back() != ']')
        throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                          ": unterminated section header");
      section = trim(content.substr(1, content.size() - 2));
      continue;
    }
    const auto eq = content.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    entries.push_back(
        {section, trim(content.substr(0, eq)), trim(content.substr(eq + 1)), line_no});
  }
  return entries;
}

[[noreturn]] void bad(const std::filesystem::path& path, const KeyValue& kv,
                      const std::string& what) {
  throw ConfigError(path.string() + ":" + std::to_string(kv.line) + ": " + kv.key + ": " + what);
}

double parse_double(const std::filesystem::path& path, const KeyValue& kv,
                    const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) bad(path, kv, "trailing characters in number '" + text + "'");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    bad(path, kv, "not a number: '" + text + "'");
  }
}

long long parse_int(const std::filesystem::path& path, const KeyValue& kv,
                    const std::string& text) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size()) bad(path, kv, "trailing characters in integer '" + text + "'");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    bad(path, kv, "not an integer: '" + text + "'");
  }
}

bool parse_bool(const std::filesystem::path& path, const KeyValue& kv, const std::string& text) {
  if (text == "on" || text == "true" || text == "1") return true;
  if (text == "off" || text == "false" || text == "0") return false;
  bad(path, kv, "expected on/off, got '" + text + "'");
}

// Spec strings look like: "random seed=7 scale=1.5 weight=0.5" or
// "file=teacher.txt weight=1" or just "uniform".
std::vector<std::pair<std::string, std::string>> parse_attr_list(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> attrs;
  std::istringstream in(text);
  std::string word;
  while (in >> word) {
    const auto eq = word.find('=');
    if (eq == std::string::npos)
      attrs.emplace_back(word, "");
    else
      attrs.emplace_back(word.substr(0, eq), word.substr(eq + 1));
  }
  return attrs;
}

PolicyInit parse_policy_init(const std::filesystem::path& path, const KeyValue& kv,
                             bool allow_weight) {
  PolicyInit init;
  bool kind_seen = false;
  for (const auto& [key, value] : parse_attr_list(kv.value)) {
    if (key == "uniform" && value.empty()) {
      init.kind = PolicyInit::Kind::kUniform;
      kind_seen = true;
    } else if (key == "random" && value.empty()) {
      init.kind = PolicyInit::Kind::kRandom;
      kind_seen = true;
    } else if (key == "file") {
      init.kind = PolicyInit::Kind::kFile;
      init.path = value;
      kind_seen = true;
    } else if (key == "seed") {
      init.seed = static_cast<std::uint64_t>(parse_int(path, kv, value));
    } else if (key == "scale") {
      init.scale = parse_double(path, kv, value);
    } else if (key == "weight" && allow_weight) {
      init.weight = parse_double(path, kv, value);
    } else {
      bad(path, kv, "unknown policy attribute '" + key + "'");
    }
  }
  if (!kind_seen) bad(path, kv, "policy spec needs uniform | random | file=PATH");
  if (init.kind == PolicyInit::Kind::kFile && init.path.empty())
    bad(path, kv, "file policy spec needs a path");
  return init;
}

RewardSpec parse_reward_spec(const std::filesystem::path& path, const KeyValue& kv) {
  RewardSpec spec;
  bool kind_seen = false;
  for (const auto& [key, value] : parse_attr_list(kv.value)) {
    if (key == "constant" && value.empty()) {
      spec.kind = RewardKind::kConstant;
      kind_seen = true;
    } else if (key == "target_token_count" && value.empty()) {
      spec.kind = RewardKind::kTargetTokenCount;
      kind_seen = true;
    } else if (key == "exact_match" && value.empty()) {
      spec.kind = RewardKind::kExactMatch;
      kind_seen = true;
    } else if (key == "value") {
      spec.value = parse_double(path, kv, value);
    } else if (key == "token") {
      spec.target_token = static_cast<int>(parse_int(path, kv, value));
    } else if (key == "tokens") {
      spec.target_sequence.clear();
      for (const std::string& tok : split(value, ','))
        spec.target_sequence.push_back(static_cast<int>(parse_int(path, kv, tok)));
    } else if (key == "weight") {
      spec.weight = parse_double(path, kv, value);
    } else {
      bad(path, kv, "unknown reward attribute '" + key + "'");
    }
  }
  if (!kind_seen)
    bad(path, kv, "reward spec needs constant | target_token_count | exact_match");
  return spec;
}

}  // namespace

ExperimentConfig load_config(const std::filesystem::path& path) {
  ExperimentConfig cfg;
  cfg.teachers.clear();
  bool student_seen = false;

  for (const KeyValue& kv : parse_ini(path)) {
    const std::string where = kv.section + "." + kv.key;
    if (where == "policy.vocab_size") {
      cfg.vocab_size = static_cast<int>(parse_int(path, kv, kv.value));
    } else if (where == "policy.horizon") {
      cfg.horizon = static_cast<int>(parse_int(path, kv, kv.value));
    } else if (where == "policy.eos_token") {
      cfg.eos_token = static_cast<int>(parse_int(path, kv, kv.value));
    } else if (where == "policy.student") {
      cfg.student = parse_policy_init(path, kv, /*allow_weight=*/false);
      student_seen = true;
    } else if (where == "policy.teacher") {
      cfg.teachers.push_back(parse_policy_init(path, kv, /*allow_weight=*/true));
    } else if (where == "rewards.reward") {
      cfg.rewards.push_back(parse_reward_spec(path, kv));
    } else if (where == "estimator.preset") {
      const HybridConfig base = preset(kv.value);
      cfg.hybrid.gamma = base.gamma;
      cfg.hybrid.lambda0 = base.lambda0;
      cfg.hybrid.dense_enabled = base.dense_enabled;
    } else if (where == "estimator.lambda0") {
      cfg.hybrid.lambda0 = parse_double(path, kv, kv.value);
    } else if (where == "estimator.alpha") {
      cfg.hybrid.alpha = parse_double(path, kv, kv.value);
    } else if (where == "estimator.gamma") {
      cfg.hybrid.gamma = parse_double(path, kv, kv.value);
    } else if (where == "estimator.group_size") {
      cfg.hybrid.group_size = static_cast<int>(parse_int(path, kv, kv.value));
    } else if (where == "estimator.topk") {
      cfg.hybrid.topk =
          kv.value == "full" ? kTopkFull : static_cast<int>(parse_int(path, kv, kv.value));
    } else if (where == "estimator.learning_rate") {
      cfg.hybrid.learning_rate = parse_double(path, kv, kv.value);
    } else if (where == "estimator.baseline") {
      cfg.hybrid.baseline = parse_bool(path, kv, kv.value);
    } else if (where == "estimator.dense") {
      cfg.hybrid.dense_enabled = parse_bool(path, kv, kv.value);
    } else if (where == "estimator.seed" || where == "run.seed") {
      cfg.seed = static_cast<std::uint64_t>(parse_int(path, kv, kv.value));
    } else if (where == "run.iterations") {
      cfg.iterations = static_cast<int>(parse_int(path, kv, kv.value));
    } else if (where == "run.prompts") {
      cfg.prompts.clear();
      for (const std::string& p : split(kv.value, ','))
        cfg.prompts.push_back(static_cast<int>(parse_int(path, kv, p)));
    } else if (where == "run.enumeration") {
      cfg.enumeration = parse_bool(path, kv, kv.value);
    } else if (where == "run.threads") {
      cfg.threads = static_cast<int>(parse_int(path, kv, kv.value));
    } else if (where == "run.verification_mode") {
      cfg.verification_mode = parse_bool(path, kv, kv.value);
    } else if (where == "verify.instances") {
      cfg.verify.instances = static_cast<int>(parse_int(path, kv, kv.value));
    } else if (where == "verify.vocab_size") {
      cfg.verify.vocab_size = static_cast<int>(parse_int(path, kv, kv.value));
    } else if (where == "verify.horizon") {
      cfg.verify.horizon = static_cast<int>(parse_int(path, kv, kv.value));
    } else if (where == "verify.logit_scale") {
      cfg.verify.logit_scale = parse_double(path, kv, kv.value);
    } else if (where == "verify.corrupt_dense") {
      cfg.verify.corrupt_dense = parse_bool(path, kv, kv.value);
    } else if (where == "bench.vocab_sizes") {
      cfg.bench.vocab_sizes.clear();
      for (const std::string& v : split(kv.value, ','))
        cfg.bench.vocab_sizes.push_back(parse_int(path, kv, v));
    } else if (where == "bench.topk_sizes") {
      cfg.bench.topk_sizes.clear();
      for (const std::string& v : split(kv.value, ','))
        cfg.bench.topk_sizes.push_back(parse_int(path, kv, v));
    } else if (where == "bench.repetitions") {
      cfg.bench.repetitions = static_cast<int>(parse_int(path, kv, kv.value));
    } else if (where == "output.dir") {
      cfg.out_dir = kv.value;
    } else if (where == "output.metrics_file") {
      cfg.metrics_file = kv.value;
    } else if (where == "output.policy_file") {
      cfg.policy_file = kv.value;
    } else if (where == "output.csv_file") {
      cfg.csv_file = kv.value;
    } else {
      bad(path, kv, "unknown key in section [" + kv.section + "]");
    }
  }

  if (!student_seen) cfg.student = PolicyInit{};
  if (cfg.teachers.empty()) cfg.teachers.push_back(PolicyInit{});
  cfg.hybrid.teacher_weights = teacher_weights(cfg);
  cfg.hybrid.seed = cfg.seed;

  // Resolve relative policy paths against the config file's directory.
  const std::filesystem::path base = path.has_parent_path() ? path.parent_path() : ".";
  const auto resolve = [&](PolicyInit& init) {
    if (init.kind == PolicyInit::Kind::kFile && init.path.is_relative())
      init.path = base / init.path;
  };
  resolve(cfg.student);
  for (PolicyInit& teacher : cfg.teachers) resolve(teacher);

  validate(cfg);
  return cfg;
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.vocab_size < 2) throw ConfigError("config: vocab_size must be >= 2");
  if (cfg.horizon < 1) throw ConfigError("config: horizon must be >= 1");
  if (cfg.eos_token < 0 || cfg.eos_token >= cfg.vocab_size)
    throw ConfigError("config: eos_token out of vocabulary");
  if (cfg.iterations < 1) throw ConfigError("config: iterations must be >= 1");
  if (cfg.prompts.empty()) throw ConfigError("config: prompts must be nonempty");
  if (cfg.threads < 1) throw ConfigError("config: threads must be >= 1");
  if (cfg.verify.instances < 1) throw ConfigError("config: verify.instances must be >= 1");
  if (cfg.verify.vocab_size < 2) throw ConfigError("config: verify.vocab_size must be >= 2");
  if (cfg.verify.horizon < 1) throw ConfigError("config: verify.horizon must be >= 1");
  if (cfg.bench.repetitions < 1) throw ConfigError("config: bench.repetitions must be >= 1");
  for (const Eigen::Index v : cfg.bench.vocab_sizes)
    if (v < 2) throw ConfigError("config: bench vocab sizes must be >= 2");
  for (const Eigen::Index k : cfg.bench.topk_sizes)
    if (k < 1) throw ConfigError("config: bench topk sizes must be >= 1");
  for (const RewardSpec& spec : cfg.rewards)
    if (!(spec.weight >= 0.0) || !std::isfinite(spec.weight))
      throw ConfigError("config: reward weights must be finite and >= 0");
  validate_config(cfg.hybrid, cfg.vocab_size);

  const auto check_file = [](const PolicyInit& init, const char* role) {
    if (init.kind == PolicyInit::Kind::kFile && !std::filesystem::exists(init.path))
      throw ConfigError(std::string("config: ") + role + " policy file does not exist: " +
                        init.path.string());
    if (!(init.scale >= 0.0) || !std::isfinite(init.scale))
      throw ConfigError(std::string("config: ") + role + " scale must be finite and >= 0");
  };
  check_file(cfg.student, "student");
  for (const PolicyInit& teacher : cfg.teachers) check_file(teacher, "teacher");
}

TabularPolicy build_policy(const PolicyInit& init, int vocab_size, int horizon, int eos_token,
                           std::span<const int> prompts) {
  switch (init.kind) {
    case PolicyInit::Kind::kUniform:
      return TabularPolicy(vocab_size, horizon, eos_token);
    case PolicyInit::Kind::kFile: {
      TabularPolicy policy = load_policy(init.path);
      if (policy.vocab_size() != vocab_size || policy.horizon() != horizon ||
          policy.eos_token() != eos_token)
        throw ConfigError("policy file " + init.path.string() +
                          " disagrees with configured vocab/horizon/eos");
      return policy;
    }
    case PolicyInit::Kind::kRandom:
      break;
  }

  // Random init: fill the whole non-terminal prefix tree, depth-first in
  // token order so a fixed seed gives a fixed policy.
  double contexts = 1.0;
  double layer = 1.0;
  for (int depth = 1; depth < horizon; ++depth) {
    layer *= static_cast<double>(vocab_size - 1);
    contexts += layer;
  }
  if (contexts * static_cast<double>(prompts.size()) > 200000.0)
    throw ResourceError("random policy init: prefix tree has ~" + std::to_string(contexts) +
                        " contexts per prompt; too large to materialize");

  TabularPolicy policy(vocab_size, horizon, eos_token);
  Rng rng(init.seed);
  const std::function<void(ContextKey&)> fill = [&](ContextKey& ctx) {
    policy.set_logits(ctx, random_logits(vocab_size, init.scale, rng));
    if (static_cast<int>(ctx.prefix.size()) + 1 >= horizon) return;
    for (int v = 0; v < vocab_size; ++v) {
      if (v == eos_token) continue;
      ctx.prefix.push_back(v);
      fill(ctx);
      ctx.prefix.pop_back();
    }
  };
  for (const int prompt : prompts) {
    ContextKey root{prompt, {}};
    fill(root);
  }
  return policy;
}

TabularPolicy build_student(const ExperimentConfig& cfg) {
  return build_policy(cfg.student, cfg.vocab_size, cfg.horizon, cfg.eos_token, cfg.prompts);
}

std::vector<TabularPolicy> build_teachers(const ExperimentConfig& cfg) {
  std::vector<TabularPolicy> teachers;
  teachers.reserve(cfg.teachers.size());
  for (const PolicyInit& init : cfg.teachers)
    teachers.push_back(build_policy(init, cfg.vocab_size, cfg.horizon, cfg.eos_token, cfg.prompts));
  return teachers;
}

std::vector<double> teacher_weights(const ExperimentConfig& cfg) {
  std::vector<double> weights;
  weights.reserve(cfg.teachers.size());
  for (const PolicyInit& init : cfg.teachers) weights.push_back(init.weight);
  return weights;
}

}  // namespace hybridgrad
