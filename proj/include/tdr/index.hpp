#pragma once

// Exact top-k retrieval over pool embeddings: full scan, dot-product scores,
// deterministic tie-breaking by ascending id, optional self-exclusion.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tdr/common.hpp"
#include "tdr/corpus.hpp"
#include "tdr/encoder.hpp"

namespace tdr {

// How a candidate example is rendered into text for embedding. The query
// side always embeds the query input alone.
enum class CandidateTextMode {
  kInputOutput,  // input, newline, output
  kInputOnly,
};

std::string candidate_text(const Example& ex, CandidateTextMode mode);

struct ScoredId {
  std::string id;
  double score = 0.0;
};

// Immutable after build; rows, ids and tasks are parallel arrays.
struct VectorIndex {
  int dim = 0;
  std::vector<std::string> ids;
  std::vector<std::string> tasks;
  std::vector<double> vectors;  // row-major size() x dim

  size_t size() const { return ids.size(); }
  std::span<const double> row(size_t i) const {
    return std::span<const double>(vectors).subspan(i * static_cast<size_t>(dim),
                                                    static_cast<size_t>(dim));
  }
};

VectorIndex build_index(const EmbeddingModel& model, const Pool& pool,
                        CandidateTextMode mode = CandidateTextMode::kInputOutput);

// Dot-product scores against every row, in pool order.
std::vector<ScoredId> score(const VectorIndex& index, const Vec& query_vec);

// Top-k by descending score, ties broken by ascending id; `exclude_id` is
// never returned. Returns fewer than k when the pool is too small.
std::vector<ScoredId> top_k(const VectorIndex& index, const Vec& query_vec, size_t k,
                            const std::optional<std::string>& exclude_id = std::nullopt);

}  // namespace tdr
