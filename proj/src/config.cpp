#include "tdr/config.hpp"

#include <charconv>
#include <sstream>

namespace tdr {

namespace {

std::string trim(std::string_view s) {
  size_t begin = 0;
  size_t end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) {
    ++begin;
  }
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) {
    --end;
  }
  return std::string(s.substr(begin, end - begin));
}

struct KeyContext {
  const std::string& origin;
  int line;
  const std::string& key;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(origin + ":" + std::to_string(line) + ": key \"" + key + "\": " + msg);
  }
};

int parse_int(const KeyContext& ctx, const std::string& value) {
  int out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    ctx.fail("expected an integer, got \"" + value + "\"");
  }
  return out;
}

uint64_t parse_u64(const KeyContext& ctx, const std::string& value) {
  uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    ctx.fail("expected an unsigned integer, got \"" + value + "\"");
  }
  return out;
}

double parse_real(const KeyContext& ctx, const std::string& value) {
  try {
    size_t used = 0;
    double out = std::stod(value, &used);
    if (used != value.size()) {
      ctx.fail("expected a number, got \"" + value + "\"");
    }
    return out;
  } catch (const std::exception&) {
    ctx.fail("expected a number, got \"" + value + "\"");
  }
}

bool parse_bool(const KeyContext& ctx, const std::string& value) {
  if (value == "true" || value == "1") {
    return true;
  }
  if (value == "false" || value == "0") {
    return false;
  }
  ctx.fail("expected true/false, got \"" + value + "\"");
}

}  // namespace

PipelineConfig parse_config(const std::string& text, const std::string& origin,
                            PipelineConfig base) {
  PipelineConfig config = std::move(base);

  std::istringstream stream(text);
  std::string raw_line;
  int line_no = 0;
  while (std::getline(stream, raw_line)) {
    ++line_no;
    std::string line = raw_line;
    if (size_t hash = line.find('#'); hash != std::string::npos) {
      line.resize(hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": expected key = value, got \"" + line + "\"");
    }
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    KeyContext ctx{origin, line_no, key};

    if (key == "batch_size") {
      config.train.batch_size = parse_int(ctx, value);
    } else if (key == "candidates_per_item") {
      config.train.candidates_per_item = parse_int(ctx, value);
    } else if (key == "steps") {
      config.train.steps = parse_int(ctx, value);
    } else if (key == "learning_rate") {
      config.train.learning_rate = parse_real(ctx, value);
    } else if (key == "seed") {
      config.train.seed = parse_u64(ctx, value);
    } else if (key == "iterations") {
      config.train.iterations = parse_int(ctx, value);
    } else if (key == "top_n") {
      config.train.top_n = parse_int(ctx, value);
    } else if (key == "objective") {
      if (value == "combined") {
        config.train.objective = Objective::kCombined;
      } else if (value == "kl") {
        config.train.objective = Objective::kKlBaseline;
      } else {
        ctx.fail("expected combined|kl, got \"" + value + "\"");
      }
    } else if (key == "kl_llm_temperature") {
      config.train.kl_llm_temperature = parse_real(ctx, value);
    } else if (key == "gamma") {
      config.train.loss.gamma = parse_real(ctx, value);
    } else if (key == "tau_cont") {
      config.train.loss.tau_cont = parse_real(ctx, value);
    } else if (key == "lambda") {
      config.train.loss.lambda = parse_real(ctx, value);
    } else if (key == "alpha") {
      config.train.loss.alpha = parse_real(ctx, value);
    } else if (key == "beta") {
      config.train.loss.beta = parse_real(ctx, value);
    } else if (key == "task_threshold") {
      config.train.loss.task_threshold = parse_real(ctx, value);
    } else if (key == "task_penalty") {
      config.train.loss.task_penalty = parse_real(ctx, value);
      config.scorer.task_penalty = config.train.loss.task_penalty;
    } else if (key == "in_batch_negatives") {
      config.train.loss.in_batch_negatives = parse_bool(ctx, value);
    } else if (key == "candidate_level_mask") {
      config.train.loss.candidate_level_mask = parse_bool(ctx, value);
    } else if (key == "scorer_kind") {
      if (value == "mock") {
        config.scorer.kind = ScorerKind::kMock;
      } else if (value == "http") {
        config.scorer.kind = ScorerKind::kHttp;
      } else {
        ctx.fail("expected mock|http, got \"" + value + "\"");
      }
    } else if (key == "scorer_endpoint") {
      config.scorer.endpoint = value;
    } else if (key == "scorer_max_parallel") {
      config.scorer.max_parallel = parse_int(ctx, value);
    } else if (key == "scorer_timeout_ms") {
      config.scorer.timeout_ms = parse_int(ctx, value);
    } else if (key == "scorer_retries") {
      config.scorer.retries = parse_int(ctx, value);
    } else if (key == "mock_feature_dim") {
      config.scorer.mock_feature_dim = parse_int(ctx, value);
    } else if (key == "mock_hash_seed") {
      config.scorer.mock_hash_seed = parse_u64(ctx, value);
    } else if (key == "mock_scale") {
      config.scorer.mock_scale = parse_real(ctx, value);
    } else if (key == "mock_floor") {
      config.scorer.mock_floor = parse_real(ctx, value);
    } else {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": unknown key \"" + key +
                        "\"");
    }
  }
  return config;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
  return parse_config(read_file(path), path.string(), std::move(base));
}

std::string config_to_string(const PipelineConfig& config) {
  std::string out;
  auto emit = [&out](const std::string& key, const std::string& value) {
    out += key + " = " + value + "\n";
  };
  emit("batch_size", std::to_string(config.train.batch_size));
  emit("candidates_per_item", std::to_string(config.train.candidates_per_item));
  emit("steps", std::to_string(config.train.steps));
  emit("learning_rate", format_double(config.train.learning_rate));
  emit("seed", std::to_string(config.train.seed));
  emit("iterations", std::to_string(config.train.iterations));
  emit("top_n", std::to_string(config.train.top_n));
  emit("objective", config.train.objective == Objective::kCombined ? "combined" : "kl");
  emit("kl_llm_temperature", format_double(config.train.kl_llm_temperature));
  emit("gamma", format_double(config.train.loss.gamma));
  emit("tau_cont", format_double(config.train.loss.tau_cont));
  emit("lambda", format_double(config.train.loss.lambda));
  emit("alpha", format_double(config.train.loss.alpha));
  emit("beta", format_double(config.train.loss.beta));
  emit("task_threshold", format_double(config.train.loss.task_threshold));
  emit("task_penalty", format_double(config.train.loss.task_penalty));
  emit("in_batch_negatives", config.train.loss.in_batch_negatives ? "true" : "false");
  emit("candidate_level_mask", config.train.loss.candidate_level_mask ? "true" : "false");
  emit("scorer_kind", config.scorer.kind == ScorerKind::kMock ? "mock" : "http");
  emit("scorer_endpoint", config.scorer.endpoint);
  emit("scorer_max_parallel", std::to_string(config.scorer.max_parallel));
  emit("scorer_timeout_ms", std::to_string(config.scorer.timeout_ms));
  emit("scorer_retries", std::to_string(config.scorer.retries));
  emit("mock_feature_dim", std::to_string(config.scorer.mock_feature_dim));
  emit("mock_hash_seed", std::to_string(config.scorer.mock_hash_seed));
  emit("mock_scale", format_double(config.scorer.mock_scale));
  emit("mock_floor", format_double(config.scorer.mock_floor));
  return out;
}

}  // namespace tdr
