#pragma once

// Flat key=value config file covering training, loss and scorer settings.
// Unknown keys are hard errors.

#include <filesystem>
#include <string>

#include "tdr/feedback.hpp"
#include "tdr/trainer.hpp"

namespace tdr {

struct PipelineConfig {
  TrainConfig train;
  ScorerConfig scorer;
};

// Accepted keys (one `key = value` per line, '#' starts a comment):
//   batch_size, candidates_per_item, steps, learning_rate, seed, iterations,
//   top_n, objective (combined|kl), kl_llm_temperature,
//   gamma, tau_cont, lambda, alpha, beta, task_threshold, task_penalty,
//   in_batch_negatives, candidate_level_mask,
//   scorer_kind (mock|http), scorer_endpoint, scorer_max_parallel,
//   scorer_timeout_ms, scorer_retries,
//   mock_feature_dim, mock_hash_seed, mock_scale, mock_floor
// task_penalty feeds both the loss and the scorer so the two can never
// disagree on the penalty constant.
PipelineConfig parse_config(const std::string& text, const std::string& origin,
                            PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});

// Serialized echo of every accepted key; parse_config(config_to_string(c))
// reproduces c.
std::string config_to_string(const PipelineConfig& config);

}  // namespace tdr
