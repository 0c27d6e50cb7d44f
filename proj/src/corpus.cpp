#include "tdr/corpus.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

namespace tdr {

namespace {

using ordered_json = nlohmann::ordered_json;

struct RawRecord {
  std::string id;
  std::string task;
  std::string input;
  std::string output;
  int line = 0;
};

std::vector<RawRecord> parse_jsonl(const std::filesystem::path& path) {
  std::string contents = read_file(path);
  std::vector<RawRecord> records;
  std::map<std::string, int> first_line_of_id;

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

    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected a JSON object");
    }

    RawRecord rec;
    rec.line = line_no;
    for (const auto& [key, value] : obj.items()) {
      if (key != "id" && key != "task" && key != "input" && key != "output") {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": unknown field \"" +
                         key + "\"");
      }
      if (!value.is_string()) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": field \"" + key +
                         "\" must be a string");
      }
    }
    for (const char* key : {"id", "task", "input", "output"}) {
      if (!obj.contains(key)) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": missing field \"" +
                         std::string(key) + "\"");
      }
    }
    rec.id = obj["id"].get<std::string>();
    rec.task = obj["task"].get<std::string>();
    rec.input = obj["input"].get<std::string>();
    rec.output = obj["output"].get<std::string>();

    auto [it, inserted] = first_line_of_id.emplace(rec.id, line_no);
    if (!inserted) {
      throw ValidationError(path.string() + ": duplicate id \"" + rec.id + "\" at lines " +
                            std::to_string(it->second) + " and " + std::to_string(line_no));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::string record_to_line(std::string_view id, std::string_view task, std::string_view input,
                           std::string_view output) {
  ordered_json obj;
  obj["id"] = id;
  obj["task"] = task;
  obj["input"] = input;
  obj["output"] = output;
  return obj.dump();
}

}  // namespace

Pool::Pool(std::vector<Example> examples) : examples_(std::move(examples)) {
  if (examples_.empty()) {
    throw ValidationError("pool must contain at least one example");
  }
  for (size_t i = 0; i < examples_.size(); ++i) {
    const Example& ex = examples_[i];
    if (ex.id.empty()) {
      throw ValidationError("example at position " + std::to_string(i) + " has empty id");
    }
    if (ex.task.empty() || ex.input.empty()) {
      throw ValidationError("example \"" + ex.id + "\" has empty task or input");
    }
    auto [it, inserted] = by_id_.emplace(ex.id, i);
    if (!inserted) {
      throw ValidationError("duplicate id \"" + ex.id + "\" in pool");
    }
    task_index_[ex.task].insert(ex.id);
  }
}

const Example* Pool::find(std::string_view id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &examples_[it->second];
}

Pool load_pool(const std::filesystem::path& path) {
  auto records = parse_jsonl(path);
  std::vector<Example> examples;
  examples.reserve(records.size());
  for (auto& rec : records) {
    examples.push_back(Example{std::move(rec.id), std::move(rec.task), std::move(rec.input),
                               std::move(rec.output)});
  }
  return Pool(std::move(examples));
}

std::vector<QueryRecord> load_queries(const std::filesystem::path& path) {
  auto records = parse_jsonl(path);
  std::vector<QueryRecord> queries;
  queries.reserve(records.size());
  for (auto& rec : records) {
    if (rec.output.empty()) {
      throw ValidationError(path.string() + ":" + std::to_string(rec.line) + ": query \"" +
                            rec.id + "\" has empty output");
    }
    if (rec.task.empty() || rec.input.empty()) {
      throw ValidationError(path.string() + ":" + std::to_string(rec.line) + ": query \"" +
                            rec.id + "\" has empty task or input");
    }
    queries.push_back(QueryRecord{std::move(rec.id), std::move(rec.task), std::move(rec.input),
                                  std::move(rec.output)});
  }
  return queries;
}

std::string pool_to_jsonl(const Pool& pool) {
  std::string out;
  for (const Example& ex : pool.examples()) {
    out += record_to_line(ex.id, ex.task, ex.input, ex.output);
    out += '\n';
  }
  return out;
}

std::string queries_to_jsonl(const std::vector<QueryRecord>& queries) {
  std::string out;
  for (const QueryRecord& q : queries) {
    out += record_to_line(q.id, q.task, q.input, q.output);
    out += '\n';
  }
  return out;
}

void write_pool(const Pool& pool, const std::filesystem::path& path) {
  atomic_write_file(path, pool_to_jsonl(pool));
}

void write_queries(const std::vector<QueryRecord>& queries, const std::filesystem::path& path) {
  atomic_write_file(path, queries_to_jsonl(queries));
}

std::string pool_digest(const Pool& pool) {
  Digest d;
  for (const Example& ex : pool.examples()) {
    d.add(ex.id).add(ex.task).add(ex.input).add(ex.output);
  }
  return d.hex();
}

void validate(const SyntheticSpec& spec) {
  if (spec.num_tasks < 2) {
    throw ValidationError("num_tasks must be >= 2, got " + std::to_string(spec.num_tasks));
  }
  if (spec.examples_per_task < 1) {
    throw ValidationError("examples_per_task must be >= 1, got " +
                          std::to_string(spec.examples_per_task));
  }
  if (spec.feature_dim < 2) {
    throw ValidationError("feature_dim must be >= 2, got " + std::to_string(spec.feature_dim));
  }
  if (!(spec.task_overlap >= 0.0 && spec.task_overlap <= 1.0)) {
    throw ValidationError("task_overlap must be in [0, 1]");
  }
}

namespace {

constexpr int kSharedVocab = 48;
constexpr int kTaskVocab = 48;
constexpr int kInputTokens = 12;
constexpr int kOutputTokens = 4;

std::string shared_token(size_t j) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "sw%02zu", j);
  return buf;
}

std::string task_token(int task, size_t j) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "t%dw%02zu", task, j);
  return buf;
}

std::string make_text(int task, int num_tokens, double overlap, Rng& rng) {
  std::string text;
  for (int j = 0; j < num_tokens; ++j) {
    if (j > 0) {
      text += ' ';
    }
    if (rng.unit() < overlap) {
      text += shared_token(rng.below(kSharedVocab));
    } else {
      text += task_token(task, rng.below(kTaskVocab));
    }
  }
  return text;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);

  Rng pool_rng(splitmix64(spec.seed ^ 0x706f6f6cULL));
  Rng query_rng(splitmix64(spec.seed ^ 0x71756572ULL));

  std::vector<Example> examples;
  examples.reserve(static_cast<size_t>(spec.num_tasks) * spec.examples_per_task);
  for (int t = 0; t < spec.num_tasks; ++t) {
    for (int i = 0; i < spec.examples_per_task; ++i) {
      char id[32];
      std::snprintf(id, sizeof(id), "t%d-e%04d", t, i);
      examples.push_back(Example{
          id,
          "task" + std::to_string(t),
          make_text(t, kInputTokens, spec.task_overlap, pool_rng),
          make_text(t, kOutputTokens, spec.task_overlap, pool_rng),
      });
    }
  }

  int queries_per_task = std::max(1, spec.examples_per_task / 5);
  std::vector<QueryRecord> queries;
  queries.reserve(static_cast<size_t>(spec.num_tasks) * queries_per_task);
  for (int t = 0; t < spec.num_tasks; ++t) {
    for (int i = 0; i < queries_per_task; ++i) {
      char id[32];
      std::snprintf(id, sizeof(id), "t%d-q%04d", t, i);
      queries.push_back(QueryRecord{
          id,
          "task" + std::to_string(t),
          make_text(t, kInputTokens, spec.task_overlap, query_rng),
          make_text(t, kOutputTokens, spec.task_overlap, query_rng),
      });
    }
  }

  return SyntheticCorpus{Pool(std::move(examples)), std::move(queries)};
}

}  // namespace tdr
