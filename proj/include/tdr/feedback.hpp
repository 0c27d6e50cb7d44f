#pragma once

// Feedback scoring of (query, candidate) pairs: a deterministic analytic
// mock scorer for offline runs, an HTTP client for a real log-probability
// scoring service, and the task-penalty wrapper applied on top of either.

#include <string>
#include <vector>

#include "tdr/common.hpp"
#include "tdr/corpus.hpp"
#include "tdr/encoder.hpp"

namespace tdr {

struct FeedbackScore {
  std::string candidate_id;
  double raw_log_prob = 0.0;  // always <= 0
  bool task_penalized = false;
  double value = 0.0;  // raw_log_prob, or exactly the penalty when wrapped
};

enum class ScorerKind { kMock, kHttp };

struct ScorerConfig {
  double task_penalty = -10000.0;  // must stay < -100
  ScorerKind kind = ScorerKind::kMock;

  // http scorer
  std::string endpoint;
  int max_parallel = 4;
  int timeout_ms = 5000;
  int retries = 2;

  // mock scorer: score = -(scale * (1 - cos(f_q, f_c)) + floor) over a fixed
  // feature extractor, independent of any trained model.
  int mock_feature_dim = 256;
  uint64_t mock_hash_seed = 0x6d6f636bULL;
  double mock_scale = 5.0;
  double mock_floor = 0.05;
};

void validate(const ScorerConfig& config);

// Identity for same-task pairs, the penalty constant otherwise.
double task_wrap(double raw, std::string_view query_task, std::string_view candidate_task,
                 double penalty);

// Deterministic analytic stand-in for a frozen LLM: negated feature
// dissimilarity between query (input+output) and candidate (input+output),
// minus a floor constant. Always <= 0; identical texts score -floor.
double mock_score(const ScorerConfig& config, const QueryRecord& query, const Example& candidate);

struct ScoreRequestItem {
  std::string query_input;
  std::string query_output;
  std::string candidate_input;
  std::string candidate_output;
};

struct HttpScoreResult {
  bool ok = false;
  double log_prob = 0.0;
  std::string error;
};

// Scores a batch against the remote service. Results match input order
// regardless of completion order; a failed item (after bounded retries)
// carries a per-item error instead of aborting the batch. A positive
// log-prob from the server is a protocol violation for that item.
std::vector<HttpScoreResult> http_score(const std::vector<ScoreRequestItem>& items,
                                        const ScorerConfig& config);

struct ScoreOutcome {
  bool ok = false;
  FeedbackScore score;
  std::string error;
};

// Runs the configured scorer over all candidates, then applies the task
// wrapper. Output is parallel to the input candidate list.
std::vector<ScoreOutcome> score_candidates(const QueryRecord& query,
                                           const std::vector<Example>& candidates,
                                           const ScorerConfig& config);

}  // namespace tdr
