#pragma once

// Training-data generation: mine top-n candidates per query from the pool
// (self-excluded), score them with the configured feedback scorer, and
// persist the result as JSONL with provenance digests.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tdr/corpus.hpp"
#include "tdr/encoder.hpp"
#include "tdr/feedback.hpp"
#include "tdr/index.hpp"

namespace tdr {

struct ScoredCandidate {
  std::string id;
  double retriever_score = 0.0;
  double llm_score = 0.0;  // task-wrapped feedback value, in [task_penalty, 0]
};

struct ScoredCandidateSet {
  std::string query_id;
  std::string pool_hash;
  std::string model_fingerprint;
  std::vector<ScoredCandidate> candidates;  // descending retriever score, ties by id
};

// Mines and scores candidates for every query. Deterministic under the mock
// scorer. Candidates whose scoring fails are dropped with a warning; a query
// whose candidates all fail is dropped and logged.
std::vector<ScoredCandidateSet> generate_training_data(
    const Pool& pool, const std::vector<QueryRecord>& queries, const EmbeddingModel& model,
    int top_n, const ScorerConfig& scorer, CandidateTextMode mode = CandidateTextMode::kInputOutput);

// JSONL, one set per line, byte-stable field order:
//   {"query_id":..., "pool_hash":..., "model_fingerprint":..., "candidates":
//    [{"id":..., "retriever_score":..., "llm_score":...}]}
std::string scored_to_jsonl(const std::vector<ScoredCandidateSet>& sets);
void write_scored(const std::vector<ScoredCandidateSet>& sets, const std::filesystem::path& path);
std::vector<ScoredCandidateSet> read_scored(const std::filesystem::path& path);

// Verifies embedded provenance digests against the given artifacts. With
// strict=true a mismatch throws MismatchError; otherwise it only warns.
void check_scored_provenance(const std::vector<ScoredCandidateSet>& sets,
                             const std::optional<std::string>& expected_pool_hash,
                             const std::optional<std::string>& expected_model_fingerprint,
                             bool strict);

// Content fingerprint of a scored dataset (used in training-run records).
std::string scored_digest(const std::vector<ScoredCandidateSet>& sets);

}  // namespace tdr
