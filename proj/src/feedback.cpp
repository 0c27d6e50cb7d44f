#include "tdr/feedback.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace tdr {

void validate(const ScorerConfig& config) {
  if (!(config.task_penalty < -100.0)) {
    throw ValidationError("ScorerConfig: task_penalty must be < -100");
  }
  if (config.max_parallel < 1) {
    throw ValidationError("ScorerConfig: max_parallel must be >= 1");
  }
  if (config.kind == ScorerKind::kHttp && config.endpoint.empty()) {
    throw ValidationError("ScorerConfig: http scorer requires an endpoint");
  }
  if (config.mock_feature_dim < 2) {
    throw ValidationError("ScorerConfig: mock_feature_dim must be >= 2");
  }
  if (config.mock_scale < 0.0 || config.mock_floor < 0.0) {
    throw ValidationError("ScorerConfig: mock_scale and mock_floor must be >= 0");
  }
  if (config.retries < 0) {
    throw ValidationError("ScorerConfig: retries must be >= 0");
  }
}

double task_wrap(double raw, std::string_view query_task, std::string_view candidate_task,
                 double penalty) {
  if (raw > 0.0) {
    throw ValidationError("task_wrap: raw log-prob must be <= 0");
  }
  return query_task == candidate_task ? raw : penalty;
}

double mock_score(const ScorerConfig& config, const QueryRecord& query, const Example& candidate) {
  if (query.output.empty()) {
    throw ValidationError("mock_score: query output must be non-empty");
  }
  FeatureExtractor fx{config.mock_feature_dim, config.mock_hash_seed};
  Vec fq = extract(fx, query.input + "\n" + query.output);
  Vec fc = extract(fx, candidate.input + "\n" + candidate.output);
  double cos = dot(fq, fc);  // unit-norm features, so this is cosine
  double dissim = config.mock_scale * (1.0 - cos);
  return -(dissim + config.mock_floor);
}

namespace {

// One item per request keeps failure isolation exact: a bad item can only
// take down its own slot.
HttpScoreResult http_score_one(httplib::Client& client, const ScoreRequestItem& item,
                               int retries) {
  nlohmann::json body;
  body["items"] = nlohmann::json::array({{
      {"query_input", item.query_input},
      {"query_output", item.query_output},
      {"candidate_input", item.candidate_input},
      {"candidate_output", item.candidate_output},
  }});
  std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= retries; ++attempt) {
    auto res = client.Post("/v1/score", payload, "application/json");
    if (!res) {
      last_error = "connection error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "http status " + std::to_string(res->status);
      continue;
    }
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      last_error = std::string("malformed response: ") + e.what();
      continue;
    }
    if (!reply.is_object() || !reply.contains("scores") || !reply["scores"].is_array() ||
        reply["scores"].size() != 1) {
      last_error = "malformed response: expected {\"scores\": [..]} with 1 entry";
      continue;
    }
    const auto& entry = reply["scores"][0];
    if (!entry.is_object() || !entry.contains("log_prob") || !entry["log_prob"].is_number()) {
      last_error = "malformed response: missing numeric log_prob";
      continue;
    }
    double log_prob = entry["log_prob"].get<double>();
    if (log_prob > 0.0) {
      // A well-formed reply that breaks the contract; retrying cannot fix it.
      return HttpScoreResult{false, 0.0,
                             "protocol violation: positive log_prob " + format_double(log_prob)};
    }
    return HttpScoreResult{true, log_prob, ""};
  }
  return HttpScoreResult{false, 0.0, last_error};
}

}  // namespace

std::vector<HttpScoreResult> http_score(const std::vector<ScoreRequestItem>& items,
                                        const ScorerConfig& config) {
  validate(config);
  if (config.endpoint.empty()) {
    throw ValidationError("http_score: endpoint not configured");
  }
  if (items.empty()) {
    throw ValidationError("http_score: batch must be non-empty");
  }

  std::vector<HttpScoreResult> results(items.size());
  size_t workers = std::min<size_t>(static_cast<size_t>(config.max_parallel), items.size());
  std::atomic<size_t> next{0};

  auto run = [&]() {
    httplib::Client client(config.endpoint);
    client.set_connection_timeout(0, config.timeout_ms * 1000);
    client.set_read_timeout(0, config.timeout_ms * 1000);
    client.set_write_timeout(0, config.timeout_ms * 1000);
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= items.size()) {
        break;
      }
      results[i] = http_score_one(client, items[i], config.retries);
    }
  };

  if (workers == 1) {
    run();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
      threads.emplace_back(run);
    }
    for (auto& t : threads) {
      t.join();
    }
  }
  return results;
}

std::vector<ScoreOutcome> score_candidates(const QueryRecord& query,
                                           const std::vector<Example>& candidates,
                                           const ScorerConfig& config) {
  validate(config);
  if (candidates.empty()) {
    throw ValidationError("score_candidates: candidate list must be non-empty");
  }

  std::vector<ScoreOutcome> outcomes(candidates.size());

  auto compose = [&](size_t i, double raw) {
    // Keep every stored value inside [task_penalty, 0].
    raw = std::max(raw, config.task_penalty);
    FeedbackScore fs;
    fs.candidate_id = candidates[i].id;
    fs.raw_log_prob = raw;
    fs.task_penalized = candidates[i].task != query.task;
    fs.value = task_wrap(raw, query.task, candidates[i].task, config.task_penalty);
    outcomes[i] = ScoreOutcome{true, std::move(fs), ""};
  };

  if (config.kind == ScorerKind::kMock) {
    for (size_t i = 0; i < candidates.size(); ++i) {
      compose(i, mock_score(config, query, candidates[i]));
    }
    return outcomes;
  }

  std::vector<ScoreRequestItem> items;
  items.reserve(candidates.size());
  for (const Example& c : candidates) {
    items.push_back(ScoreRequestItem{query.input, query.output, c.input, c.output});
  }
  std::vector<HttpScoreResult> raw = http_score(items, config);
  for (size_t i = 0; i < candidates.size(); ++i) {
    if (raw[i].ok) {
      compose(i, raw[i].log_prob);
    } else {
      outcomes[i] = ScoreOutcome{false, FeedbackScore{candidates[i].id, 0.0, false, 0.0},
                                 raw[i].error};
    }
  }
  return outcomes;
}

}  // namespace tdr
