#include "tdr/index.hpp"

#include <algorithm>

namespace tdr {

std::string candidate_text(const Example& ex, CandidateTextMode mode) {
  if (mode == CandidateTextMode::kInputOnly) {
    return ex.input;
  }
  return ex.input + "\n" + ex.output;
}

VectorIndex build_index(const EmbeddingModel& model, const Pool& pool, CandidateTextMode mode) {
  validate(model);
  VectorIndex index;
  index.dim = model.params.dim_out;
  index.ids.reserve(pool.size());
  index.tasks.reserve(pool.size());
  index.vectors.reserve(pool.size() * static_cast<size_t>(index.dim));
  for (const Example& ex : pool.examples()) {
    Vec v = embed(model, candidate_text(ex, mode));
    index.ids.push_back(ex.id);
    index.tasks.push_back(ex.task);
    index.vectors.insert(index.vectors.end(), v.begin(), v.end());
  }
  return index;
}

std::vector<ScoredId> score(const VectorIndex& index, const Vec& query_vec) {
  if (query_vec.size() != static_cast<size_t>(index.dim)) {
    throw ValidationError("score: query vector length does not match index dim");
  }
  std::vector<ScoredId> out;
  out.reserve(index.size());
  for (size_t i = 0; i < index.size(); ++i) {
    auto row = index.row(i);
    double s = 0.0;
    for (size_t c = 0; c < row.size(); ++c) {
      s += row[c] * query_vec[c];
    }
    out.push_back(ScoredId{index.ids[i], s});
  }
  return out;
}

std::vector<ScoredId> top_k(const VectorIndex& index, const Vec& query_vec, size_t k,
                            const std::optional<std::string>& exclude_id) {
  if (k < 1) {
    throw ValidationError("top_k: k must be >= 1");
  }
  std::vector<ScoredId> all = score(index, query_vec);
  if (exclude_id) {
    std::erase_if(all, [&](const ScoredId& s) { return s.id == *exclude_id; });
  }
  auto better = [](const ScoredId& a, const ScoredId& b) {
    if (a.score != b.score) {
      return a.score > b.score;
    }
    return a.id < b.id;
  };
  size_t take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<ptrdiff_t>(take), all.end(), better);
  all.resize(take);
  return all;
}

}  // namespace tdr
