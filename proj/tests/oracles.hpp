#pragma once

// Test-only oracles, kept independent of the library's computation paths:
// naive linear algebra, brute-force retrieval, and finite differences.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tdr/common.hpp"

namespace oracles {

// Naive triple-loop matrix-vector product (row-major weight).
inline tdr::Vec naive_matvec(const std::vector<double>& weight, int rows, int cols,
                             const tdr::Vec& x) {
  tdr::Vec y(static_cast<size_t>(rows), 0.0);
  for (int r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) {
      double prod = weight[static_cast<size_t>(r) * cols + c] * x[static_cast<size_t>(c)];
      acc += prod;
    }
    y[static_cast<size_t>(r)] = acc;
  }
  return y;
}

inline double naive_dot(const tdr::Vec& a, const tdr::Vec& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    s += a[i] * b[i];
  }
  return s;
}

struct RankedRow {
  std::string id;
  double score;
};

// Full sort by (score desc, id asc), then prefix of k, skipping excluded.
inline std::vector<RankedRow> full_sort_top_k(std::vector<RankedRow> rows, size_t k,
                                              const std::string* exclude_id = nullptr) {
  if (exclude_id != nullptr) {
    std::erase_if(rows, [&](const RankedRow& r) { return r.id == *exclude_id; });
  }
  std::sort(rows.begin(), rows.end(), [](const RankedRow& a, const RankedRow& b) {
    if (a.score != b.score) {
      return a.score > b.score;
    }
    return a.id < b.id;
  });
  rows.resize(std::min(k, rows.size()));
  return rows;
}

// Central finite difference of a scalar function at x.
inline double central_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
inline double max_rel_error(const tdr::Vec& analytic, const tdr::Vec& numeric, double floor) {
  double worst = 0.0;
  for (size_t i = 0; i < analytic.size(); ++i) {
    double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric[i]), floor});
    worst = std::max(worst, std::fabs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

}  // namespace oracles
