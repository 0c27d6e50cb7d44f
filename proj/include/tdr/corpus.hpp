#pragma once

// Retrieval-pool and query data types, JSONL ingestion, and synthetic
// multi-task corpus generation.

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tdr/common.hpp"

namespace tdr {

// One (task, input, output) record in the retrieval pool.
struct Example {
  std::string id;
  std::string task;
  std::string input;
  std::string output;
};

// A training/evaluation query with its ground-truth output. The output must
// be non-empty: feedback scoring conditions on it.
struct QueryRecord {
  std::string id;
  std::string task;
  std::string input;
  std::string output;
};

// Immutable after construction; the task index is always consistent with the
// example list. Safe for concurrent reads.
class Pool {
 public:
  explicit Pool(std::vector<Example> examples);

  const std::vector<Example>& examples() const { return examples_; }
  const std::map<std::string, std::set<std::string>>& task_index() const { return task_index_; }
  size_t size() const { return examples_.size(); }

  // nullptr when the id is not in the pool.
  const Example* find(std::string_view id) const;

 private:
  std::vector<Example> examples_;
  std::map<std::string, std::set<std::string>> task_index_;
  std::map<std::string, size_t, std::less<>> by_id_;
};

// JSONL schema, one object per line:
//   {"id": string, "task": string, "input": string, "output": string}
// Unknown fields are rejected; duplicate ids are a hard error naming both
// offending lines.
Pool load_pool(const std::filesystem::path& path);
std::vector<QueryRecord> load_queries(const std::filesystem::path& path);

void write_pool(const Pool& pool, const std::filesystem::path& path);
void write_queries(const std::vector<QueryRecord>& queries, const std::filesystem::path& path);

std::string pool_to_jsonl(const Pool& pool);
std::string queries_to_jsonl(const std::vector<QueryRecord>& queries);

// Content fingerprint of a pool, independent of on-disk formatting.
std::string pool_digest(const Pool& pool);

// Parameters for the synthetic multi-task corpus. Each task owns a private
// token vocabulary; `task_overlap` is the probability that any generated
// token is drawn from a vocabulary shared across tasks instead, so lexical
// similarity and task identity can be decoupled.
struct SyntheticSpec {
  int num_tasks = 4;
  int examples_per_task = 250;
  int feature_dim = 256;
  double task_overlap = 0.3;
  uint64_t seed = 1;
};

void validate(const SyntheticSpec& spec);

struct SyntheticCorpus {
  Pool pool;
  std::vector<QueryRecord> queries;
};

// Pure function of the spec: identical specs produce byte-identical corpora.
SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

}  // namespace tdr
