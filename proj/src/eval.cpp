#include "tdr/eval.hpp"

#include <algorithm>
#include <iostream>
#include <set>

#include <json.hpp>

namespace tdr {

using ordered_json = nlohmann::ordered_json;

RetrievalReport evaluate_retrieval(const EmbeddingModel& model, const Pool& pool,
                                   const std::vector<QueryRecord>& queries, int k,
                                   const ScorerConfig& scorer, CandidateTextMode mode,
                                   bool wrapped_scores) {
  if (k < 1) {
    throw ValidationError("evaluate_retrieval: k must be >= 1");
  }
  if (queries.empty()) {
    throw ValidationError("evaluate_retrieval: query list is empty");
  }
  validate(scorer);

  VectorIndex index = build_index(model, pool, mode);

  RetrievalReport report;
  report.checkpoint_fingerprint = model_fingerprint(model);
  report.k = k;
  report.wrapped_scores = wrapped_scores;
  report.task_penalty = scorer.task_penalty;

  struct Agg {
    long cross = 0;
    long pairs = 0;
    double score_sum = 0.0;
  };
  Agg total;
  std::map<std::string, Agg> by_task;

  for (const QueryRecord& query : queries) {
    Vec qv = embed(model, query.input);
    std::vector<ScoredId> retrieved = top_k(index, qv, static_cast<size_t>(k), query.id);
    if (retrieved.empty()) {
      continue;
    }
    ++report.queries_evaluated;

    std::vector<Example> candidates;
    candidates.reserve(retrieved.size());
    for (const ScoredId& s : retrieved) {
      candidates.push_back(*pool.find(s.id));
    }
    std::vector<ScoreOutcome> outcomes = score_candidates(query, candidates, scorer);

    Agg& task_agg = by_task[query.task];
    for (size_t i = 0; i < retrieved.size(); ++i) {
      if (!outcomes[i].ok) {
        ++report.dropped_pairs;
        std::cerr << "[eval] query \"" << query.id << "\" candidate \"" << retrieved[i].id
                  << "\" dropped: " << outcomes[i].error << "\n";
        continue;
      }
      double llm = wrapped_scores ? outcomes[i].score.value : outcomes[i].score.raw_log_prob;
      bool cross = candidates[i].task != query.task;
      total.pairs += 1;
      total.cross += cross ? 1 : 0;
      total.score_sum += llm;
      task_agg.pairs += 1;
      task_agg.cross += cross ? 1 : 0;
      task_agg.score_sum += llm;
      report.scatter.push_back(ScatterRow{query.id, retrieved[i].id, retrieved[i].score, llm});
    }
  }

  if (total.pairs == 0) {
    throw Error("evaluate_retrieval: no retrieved pairs survived scoring");
  }
  report.cross_task_proportion = static_cast<double>(total.cross) / static_cast<double>(total.pairs);
  report.mean_llm_score_topk = total.score_sum / static_cast<double>(total.pairs);
  for (const auto& [task, agg] : by_task) {
    TaskStats stats;
    stats.pairs = static_cast<int>(agg.pairs);
    if (agg.pairs > 0) {
      stats.cross_task_proportion = static_cast<double>(agg.cross) / static_cast<double>(agg.pairs);
      stats.mean_llm_score = agg.score_sum / static_cast<double>(agg.pairs);
    }
    report.per_task[task] = stats;
  }
  return report;
}

std::string report_to_json(const RetrievalReport& report) {
  ordered_json obj;
  obj["schema_version"] = report.schema_version;
  obj["checkpoint_fingerprint"] = report.checkpoint_fingerprint;
  obj["k"] = report.k;
  obj["queries_evaluated"] = report.queries_evaluated;
  obj["dropped_pairs"] = report.dropped_pairs;
  obj["wrapped_scores"] = report.wrapped_scores;
  obj["task_penalty"] = report.task_penalty;
  obj["cross_task_proportion"] = report.cross_task_proportion;
  obj["mean_llm_score_topk"] = report.mean_llm_score_topk;
  ordered_json per_task = ordered_json::object();
  for (const auto& [task, stats] : report.per_task) {
    ordered_json entry;
    entry["cross_task_proportion"] = stats.cross_task_proportion;
    entry["mean_llm_score"] = stats.mean_llm_score;
    entry["pairs"] = stats.pairs;
    per_task[task] = std::move(entry);
  }
  obj["per_task"] = std::move(per_task);
  ordered_json scatter = ordered_json::array();
  for (const ScatterRow& row : report.scatter) {
    ordered_json entry;
    entry["query_id"] = row.query_id;
    entry["candidate_id"] = row.candidate_id;
    entry["retriever_score"] = row.retriever_score;
    entry["llm_score"] = row.llm_score;
    scatter.push_back(std::move(entry));
  }
  obj["scatter"] = std::move(scatter);
  return obj.dump(2) + "\n";
}

RetrievalReport report_from_json(const std::string& text, const std::string& origin) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(origin + ": " + e.what());
  }
  try {
    RetrievalReport report;
    report.schema_version = obj.at("schema_version").get<int>();
    if (report.schema_version != 1) {
      throw ParseError(origin + ": unsupported schema_version " +
                       std::to_string(report.schema_version));
    }
    report.checkpoint_fingerprint = obj.at("checkpoint_fingerprint").get<std::string>();
    report.k = obj.at("k").get<int>();
    report.queries_evaluated = obj.at("queries_evaluated").get<int>();
    report.dropped_pairs = obj.at("dropped_pairs").get<int>();
    report.wrapped_scores = obj.at("wrapped_scores").get<bool>();
    report.task_penalty = obj.at("task_penalty").get<double>();
    report.cross_task_proportion = obj.at("cross_task_proportion").get<double>();
    report.mean_llm_score_topk = obj.at("mean_llm_score_topk").get<double>();
    for (const auto& [task, entry] : obj.at("per_task").items()) {
      TaskStats stats;
      stats.cross_task_proportion = entry.at("cross_task_proportion").get<double>();
      stats.mean_llm_score = entry.at("mean_llm_score").get<double>();
      stats.pairs = entry.at("pairs").get<int>();
      report.per_task[task] = stats;
    }
    for (const auto& entry : obj.at("scatter")) {
      report.scatter.push_back(ScatterRow{
          entry.at("query_id").get<std::string>(),
          entry.at("candidate_id").get<std::string>(),
          entry.at("retriever_score").get<double>(),
          entry.at("llm_score").get<double>(),
      });
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(origin + ": " + e.what());
  }
}

void write_report(const RetrievalReport& report, const std::filesystem::path& path) {
  atomic_write_file(path, report_to_json(report));
}

RetrievalReport read_report(const std::filesystem::path& path) {
  return report_from_json(read_file(path), path.string());
}

std::string scatter_to_csv(const RetrievalReport& report) {
  std::string out = "query_id,candidate_id,retriever_score,llm_score\n";
  for (const ScatterRow& row : report.scatter) {
    out += row.query_id;
    out += ',';
    out += row.candidate_id;
    out += ',';
    out += format_double(row.retriever_score);
    out += ',';
    out += format_double(row.llm_score);
    out += '\n';
  }
  return out;
}

std::string assemble_prompt(const QueryRecord& query, const std::vector<Example>& retrieved,
                            int k, const PromptTemplate& tmpl) {
  if (retrieved.empty()) {
    throw ValidationError("assemble_prompt: retrieved list must be non-empty");
  }
  if (k < 1) {
    throw ValidationError("assemble_prompt: k must be >= 1");
  }
  size_t take = std::min<size_t>(static_cast<size_t>(k), retrieved.size());
  std::vector<const Example*> ordered;
  ordered.reserve(take);
  for (size_t i = 0; i < take; ++i) {
    ordered.push_back(&retrieved[i]);
  }
  if (tmpl.best_last) {
    std::reverse(ordered.begin(), ordered.end());
  }
  std::string out;
  for (const Example* ex : ordered) {
    out += ex->input;
    out += tmpl.io_separator;
    out += ex->output;
    out += tmpl.block_separator;
  }
  out += query.input;
  return out;
}

ComparisonSummary compare_reports(const RetrievalReport& before, const RetrievalReport& after) {
  if (before.k != after.k) {
    throw ValidationError("compare_reports: reports have different k");
  }
  auto slot_map = [](const RetrievalReport& report) {
    std::map<std::string, std::vector<const ScatterRow*>> rows;
    for (const ScatterRow& row : report.scatter) {
      rows[row.query_id].push_back(&row);
    }
    return rows;
  };
  auto rows_before = slot_map(before);
  auto rows_after = slot_map(after);

  std::set<std::string> ids_before;
  std::set<std::string> ids_after;
  for (const auto& [id, _] : rows_before) {
    ids_before.insert(id);
  }
  for (const auto& [id, _] : rows_after) {
    ids_after.insert(id);
  }
  if (ids_before != ids_after) {
    throw ValidationError("compare_reports: reports cover different query sets");
  }

  ComparisonSummary summary;
  summary.proportion_delta = after.cross_task_proportion - before.cross_task_proportion;
  summary.mean_score_delta = after.mean_llm_score_topk - before.mean_llm_score_topk;

  long improved = 0;
  for (const auto& [query_id, b_rows] : rows_before) {
    const auto& a_rows = rows_after[query_id];
    size_t slots = std::min(b_rows.size(), a_rows.size());
    for (size_t rank = 0; rank < slots; ++rank) {
      PairedSlot slot;
      slot.slot = query_id + "#" + std::to_string(rank);
      slot.before_score = b_rows[rank]->llm_score;
      slot.after_score = a_rows[rank]->llm_score;
      if (slot.after_score > slot.before_score) {
        ++improved;
      }
      summary.slots.push_back(std::move(slot));
    }
  }
  if (!summary.slots.empty()) {
    summary.fraction_improved =
        static_cast<double>(improved) / static_cast<double>(summary.slots.size());
  }
  return summary;
}

std::string comparison_to_json(const ComparisonSummary& summary) {
  ordered_json obj;
  obj["proportion_delta"] = summary.proportion_delta;
  obj["mean_score_delta"] = summary.mean_score_delta;
  obj["fraction_improved"] = summary.fraction_improved;
  obj["slots"] = summary.slots.size();
  return obj.dump(2) + "\n";
}

std::string comparison_to_csv(const ComparisonSummary& summary) {
  std::string out = "slot,before_score,after_score\n";
  for (const PairedSlot& slot : summary.slots) {
    out += slot.slot;
    out += ',';
    out += format_double(slot.before_score);
    out += ',';
    out += format_double(slot.after_score);
    out += '\n';
  }
  return out;
}

}  // namespace tdr
