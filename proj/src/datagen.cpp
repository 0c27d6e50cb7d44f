#include "tdr/datagen.hpp"

#include <iostream>

#include <json.hpp>

namespace tdr {

using ordered_json = nlohmann::ordered_json;

std::vector<ScoredCandidateSet> generate_training_data(const Pool& pool,
                                                       const std::vector<QueryRecord>& queries,
                                                       const EmbeddingModel& model, int top_n,
                                                       const ScorerConfig& scorer,
                                                       CandidateTextMode mode) {
  if (top_n < 2) {
    throw ValidationError("generate_training_data: top_n must be >= 2");
  }
  for (const QueryRecord& q : queries) {
    if (q.output.empty()) {
      throw ValidationError("generate_training_data: query \"" + q.id + "\" has empty output");
    }
  }
  validate(scorer);

  VectorIndex index = build_index(model, pool, mode);
  std::string pool_hash = pool_digest(pool);
  std::string fingerprint = model_fingerprint(model);

  std::vector<ScoredCandidateSet> sets;
  sets.reserve(queries.size());
  for (const QueryRecord& query : queries) {
    Vec qv = embed(model, query.input);
    std::vector<ScoredId> mined = top_k(index, qv, static_cast<size_t>(top_n), query.id);
    if (mined.empty()) {
      std::cerr << "[datagen] query \"" << query.id << "\" dropped: empty candidate set\n";
      continue;
    }

    std::vector<Example> candidates;
    candidates.reserve(mined.size());
    for (const ScoredId& s : mined) {
      candidates.push_back(*pool.find(s.id));
    }
    std::vector<ScoreOutcome> outcomes = score_candidates(query, candidates, scorer);

    ScoredCandidateSet set;
    set.query_id = query.id;
    set.pool_hash = pool_hash;
    set.model_fingerprint = fingerprint;
    for (size_t i = 0; i < mined.size(); ++i) {
      if (!outcomes[i].ok) {
        std::cerr << "[datagen] query \"" << query.id << "\" candidate \"" << mined[i].id
                  << "\" dropped: " << outcomes[i].error << "\n";
        continue;
      }
      set.candidates.push_back(
          ScoredCandidate{mined[i].id, mined[i].score, outcomes[i].score.value});
    }
    if (set.candidates.empty()) {
      std::cerr << "[datagen] query \"" << query.id << "\" dropped: all candidates failed\n";
      continue;
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

std::string scored_to_jsonl(const std::vector<ScoredCandidateSet>& sets) {
  std::string out;
  for (const ScoredCandidateSet& set : sets) {
    ordered_json obj;
    obj["query_id"] = set.query_id;
    obj["pool_hash"] = set.pool_hash;
    obj["model_fingerprint"] = set.model_fingerprint;
    ordered_json cands = ordered_json::array();
    for (const ScoredCandidate& c : set.candidates) {
      ordered_json entry;
      entry["id"] = c.id;
      entry["retriever_score"] = c.retriever_score;
      entry["llm_score"] = c.llm_score;
      cands.push_back(std::move(entry));
    }
    obj["candidates"] = std::move(cands);
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void write_scored(const std::vector<ScoredCandidateSet>& sets,
                  const std::filesystem::path& path) {
  atomic_write_file(path, scored_to_jsonl(sets));
}

std::vector<ScoredCandidateSet> read_scored(const std::filesystem::path& path) {
  std::string contents = read_file(path);
  std::vector<ScoredCandidateSet> sets;

  int line_no = 0;
  size_t pos = 0;
  while (pos <= contents.size()) {
    size_t eol = contents.find('\n', pos);
    std::string_view line;
    if (eol == std::string::npos) {
      line = std::string_view(contents).substr(pos);
      pos = contents.size() + 1;
    } else {
      line = std::string_view(contents).substr(pos, eol - pos);
      pos = eol + 1;
    }
    ++line_no;
    if (line.empty()) {
      continue;
    }
    auto fail = [&](const std::string& msg) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + msg);
    };

    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object()) {
      fail("expected a JSON object");
    }
    for (const auto& [key, value] : obj.items()) {
      (void)value;
      if (key != "query_id" && key != "pool_hash" && key != "model_fingerprint" &&
          key != "candidates") {
        fail("unknown field \"" + key + "\"");
      }
    }
    for (const char* key : {"query_id", "pool_hash", "model_fingerprint", "candidates"}) {
      if (!obj.contains(key)) {
        fail("missing field \"" + std::string(key) + "\"");
      }
    }
    if (!obj["query_id"].is_string() || !obj["pool_hash"].is_string() ||
        !obj["model_fingerprint"].is_string() || !obj["candidates"].is_array()) {
      fail("field type mismatch");
    }

    ScoredCandidateSet set;
    set.query_id = obj["query_id"].get<std::string>();
    set.pool_hash = obj["pool_hash"].get<std::string>();
    set.model_fingerprint = obj["model_fingerprint"].get<std::string>();
    for (const auto& entry : obj["candidates"]) {
      if (!entry.is_object() || !entry.contains("id") || !entry.contains("retriever_score") ||
          !entry.contains("llm_score") || !entry["id"].is_string() ||
          !entry["retriever_score"].is_number() || !entry["llm_score"].is_number() ||
          entry.size() != 3) {
        fail("malformed candidate entry");
      }
      set.candidates.push_back(ScoredCandidate{entry["id"].get<std::string>(),
                                               entry["retriever_score"].get<double>(),
                                               entry["llm_score"].get<double>()});
    }
    if (set.candidates.empty()) {
      fail("candidate list must be non-empty");
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

void check_scored_provenance(const std::vector<ScoredCandidateSet>& sets,
                             const std::optional<std::string>& expected_pool_hash,
                             const std::optional<std::string>& expected_model_fingerprint,
                             bool strict) {
  auto report = [&](const std::string& msg) {
    if (strict) {
      throw MismatchError(msg);
    }
    std::cerr << "[datagen] warning: " << msg << "\n";
  };
  for (const ScoredCandidateSet& set : sets) {
    if (expected_pool_hash && set.pool_hash != *expected_pool_hash) {
      report("pool fingerprint mismatch for query \"" + set.query_id + "\": data has " +
             set.pool_hash + ", current pool is " + *expected_pool_hash);
      return;
    }
    if (expected_model_fingerprint && set.model_fingerprint != *expected_model_fingerprint) {
      report("model fingerprint mismatch for query \"" + set.query_id + "\": data has " +
             set.model_fingerprint + ", current checkpoint is " + *expected_model_fingerprint);
      return;
    }
  }
}

std::string scored_digest(const std::vector<ScoredCandidateSet>& sets) {
  Digest d;
  for (const ScoredCandidateSet& set : sets) {
    d.add(set.query_id).add(set.pool_hash).add(set.model_fingerprint);
    for (const ScoredCandidate& c : set.candidates) {
      d.add(c.id).add(c.retriever_score).add(c.llm_score);
    }
  }
  return d.hex();
}

}  // namespace tdr
