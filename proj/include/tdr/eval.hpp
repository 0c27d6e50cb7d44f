#pragma once

// Measures training effects (cross-task retrieval proportion, feedback-score
// statistics of retrieved examples), compares before/after reports, and
// assembles k-shot prompts for export.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tdr/corpus.hpp"
#include "tdr/encoder.hpp"
#include "tdr/feedback.hpp"
#include "tdr/index.hpp"

namespace tdr {

struct ScatterRow {
  std::string query_id;
  std::string candidate_id;
  double retriever_score = 0.0;
  double llm_score = 0.0;
};

struct TaskStats {
  double cross_task_proportion = 0.0;
  double mean_llm_score = 0.0;
  int pairs = 0;
};

struct RetrievalReport {
  int schema_version = 1;
  std::string checkpoint_fingerprint;
  int k = 0;
  int queries_evaluated = 0;
  int dropped_pairs = 0;
  bool wrapped_scores = false;  // raw scores by default
  double task_penalty = 0.0;    // echoed from the scorer config
  double cross_task_proportion = 0.0;
  double mean_llm_score_topk = 0.0;
  std::map<std::string, TaskStats> per_task;
  std::vector<ScatterRow> scatter;  // one row per retrieved (query, candidate)
};

// Retrieves top-k per query (self-excluded), labels each retrieved pair
// same-task vs cross-task, scores each pair with the configured scorer
// (raw log-probs by default; task-wrapped when wrapped_scores is set), and
// aggregates exactly.
RetrievalReport evaluate_retrieval(const EmbeddingModel& model, const Pool& pool,
                                   const std::vector<QueryRecord>& queries, int k,
                                   const ScorerConfig& scorer,
                                   CandidateTextMode mode = CandidateTextMode::kInputOutput,
                                   bool wrapped_scores = false);

std::string report_to_json(const RetrievalReport& report);
RetrievalReport report_from_json(const std::string& text, const std::string& origin);
void write_report(const RetrievalReport& report, const std::filesystem::path& path);
RetrievalReport read_report(const std::filesystem::path& path);

// CSV with header query_id,candidate_id,retriever_score,llm_score.
std::string scatter_to_csv(const RetrievalReport& report);

struct PromptTemplate {
  std::string block_separator = "\n\n";
  std::string io_separator = "\n";
  bool best_last = true;  // ascending retriever score, best example adjacent to the query
};

// Concatenates up to k retrieved examples as input/output blocks followed by
// the query input. `retrieved` is expected in retrieval order (best first).
std::string assemble_prompt(const QueryRecord& query, const std::vector<Example>& retrieved,
                            int k, const PromptTemplate& tmpl);

struct PairedSlot {
  std::string slot;  // query_id#rank
  double before_score = 0.0;
  double after_score = 0.0;
};

struct ComparisonSummary {
  double proportion_delta = 0.0;   // after - before
  double mean_score_delta = 0.0;   // after - before
  double fraction_improved = 0.0;  // share of slots with after > before
  std::vector<PairedSlot> slots;
};

// Requires identical k and query sets in both reports.
ComparisonSummary compare_reports(const RetrievalReport& before, const RetrievalReport& after);

std::string comparison_to_json(const ComparisonSummary& summary);
// CSV with header slot,before_score,after_score.
std::string comparison_to_csv(const ComparisonSummary& summary);

}  // namespace tdr
