#pragma once

// Optimizes the encoder projection against the combined objective over
// persisted scored data. Plain SGD, deterministic under a fixed seed, with
// multi-iteration retrain-rescore cycles that re-mine candidates using the
// latest checkpoint.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tdr/datagen.hpp"
#include "tdr/loss.hpp"

namespace tdr {

enum class Objective { kCombined, kKlBaseline };

struct TrainConfig {
  int batch_size = 8;
  int candidates_per_item = 4;
  int steps = 400;
  double learning_rate = 2e-4;
  uint64_t seed = 1;
  int iterations = 1;
  int top_n = 40;
  Objective objective = Objective::kCombined;
  double kl_llm_temperature = 1.0;
  LossConfig loss;
};

void validate(const TrainConfig& config);

// Matches the source experiment scale: batch 32, 4 candidates per item,
// 12000 steps, learning rate 3e-5, three retrain cycles.
TrainConfig paper_preset();

struct StepRecord {
  int step = 0;
  double l_ce = 0.0;
  double l_d = 0.0;
  double l_s = 0.0;
  double l_cont = 0.0;
  double l_retriever = 0.0;
};

std::string train_log_to_jsonl(const std::vector<StepRecord>& log);

struct IterationRecord {
  int iteration = 0;
  std::string data_fingerprint;
  std::string checkpoint_path;
  std::string checkpoint_fingerprint;
  StepRecord final_losses;
};

struct TrainingRun {
  TrainConfig config;
  std::vector<IterationRecord> iterations;
  std::vector<uint64_t> seed_lineage;  // per-iteration derived seeds
};

// One pass of `steps` SGD updates over the scored data. Updates the model in
// place and returns the per-step loss log. Deterministic in `rng_seed`:
// fixed shuffle order and fixed candidate sub-sampling. Aborts with the step
// index and batch ids if a loss or gradient goes non-finite.
std::vector<StepRecord> train_one_iteration(EmbeddingModel& model,
                                            const std::vector<ScoredCandidateSet>& scored,
                                            const Pool& pool,
                                            const std::vector<QueryRecord>& queries,
                                            const TrainConfig& config, uint64_t rng_seed,
                                            CandidateTextMode mode = CandidateTextMode::kInputOutput);

// Loops generate_training_data -> train_one_iteration `iterations` times,
// re-mining with the updated model each cycle. Persists one checkpoint, one
// scored-data file and one training log per iteration under `out_dir`.
TrainingRun run_iterative(const Pool& pool, const std::vector<QueryRecord>& queries,
                          EmbeddingModel& model, const TrainConfig& config,
                          const ScorerConfig& scorer, const std::filesystem::path& out_dir,
                          CandidateTextMode mode = CandidateTextMode::kInputOutput);

}  // namespace tdr
