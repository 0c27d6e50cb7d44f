#pragma once

// Training objectives over retriever scores and pre-computed feedback values:
// retrieval likelihood, correlation-enhanced loss, the task-mask split into
// different-task and same-task parts, InfoNCE with in-batch negatives, the
// combined objective with exact score gradients, and a KL-divergence
// baseline. Feedback values are constants here; no gradient flows through
// them.

#include <string>
#include <vector>

#include "tdr/common.hpp"

namespace tdr {

// Per-query training record: retriever scores and feedback values for the
// same candidate list, index-aligned.
struct BatchItem {
  std::string query_id;
  Vec scores;
  Vec llm_values;
};

struct LossConfig {
  double gamma = 0.1;        // softmax temperature for retrieval likelihood
  double tau_cont = 0.05;    // InfoNCE temperature
  double lambda = 1.0;       // weight of the contrastive term
  double alpha = 1.0;        // weight of the different-task term
  double beta = 1.0;         // weight of the same-task term
  double task_threshold = -1000.0;
  double task_penalty = -10000.0;
  bool in_batch_negatives = true;
  // Extension, off by default: mask individual candidates rather than whole
  // queries when routing into the different-task term.
  bool candidate_level_mask = false;
};

void validate(const LossConfig& config);
void validate_batch(const std::vector<BatchItem>& batch, const LossConfig& config);

struct LossBreakdown {
  double l_ce = 0.0;
  double l_d = 0.0;
  double l_s = 0.0;
  double l_cont = 0.0;
  double l_retriever = 0.0;
  std::vector<int> mask;              // per item, 0 or 1
  std::vector<Vec> grad_scores;       // d l_retriever / d scores, per item
  Matrix grad_cross;                  // d l_retriever / d cross_scores (if used)
};

// Softmax of scores/gamma, stabilized by max subtraction. Sums to 1.
Vec retrieval_likelihood(const Vec& scores, double gamma);

// Retrieval-likelihood-weighted sum of feedback values; a convex combination
// of llm_values, so <= 0 whenever they are.
double q_ce(const BatchItem& item, double gamma);

// Negative batch mean of q_ce.
double l_ce(const std::vector<BatchItem>& batch, double gamma);

// Per-item bit: 1 iff the minimum feedback value falls below the threshold.
std::vector<int> task_mask(const std::vector<BatchItem>& batch, double threshold);

// Splits l_ce by the task mask; the two parts always sum back to l_ce.
struct MaskedLosses {
  double l_d = 0.0;
  double l_s = 0.0;
};
MaskedLosses masked_losses(const std::vector<BatchItem>& batch, double gamma, double threshold);

// InfoNCE with the highest-feedback candidate as the positive (ties: lowest
// index). When `cross_scores` is provided, the denominator of item x also
// includes scores of the query against every other item's positive
// candidate: cross_scores.at(x, x2) for x2 != x. The diagonal is ignored.
double info_nce(const std::vector<BatchItem>& batch, double tau_cont, bool in_batch_negatives,
                const Matrix* cross_scores = nullptr);

// Full objective: lambda * l_cont + alpha * l_d + beta * l_s, with exact
// analytic gradients with respect to every score (and cross score) input.
LossBreakdown combined_loss(const std::vector<BatchItem>& batch, const LossConfig& config,
                            const Matrix* cross_scores = nullptr);

// Baseline: batch mean of KL(softmax(llm/T) || retrieval likelihood).
double kl_baseline_loss(const std::vector<BatchItem>& batch, double gamma,
                        double llm_temperature);
std::vector<Vec> kl_baseline_grad(const std::vector<BatchItem>& batch, double gamma,
                                  double llm_temperature);

}  // namespace tdr
