#include "tdr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <json.hpp>

namespace tdr {

using ordered_json = nlohmann::ordered_json;

void validate(const TrainConfig& config) {
  if (config.batch_size < 1) {
    throw ValidationError("TrainConfig: batch_size must be >= 1");
  }
  if (config.candidates_per_item < 1) {
    throw ValidationError("TrainConfig: candidates_per_item must be >= 1");
  }
  if (config.steps < 1) {
    throw ValidationError("TrainConfig: steps must be >= 1");
  }
  if (config.learning_rate < 0.0) {
    throw ValidationError("TrainConfig: learning_rate must be >= 0");
  }
  if (config.iterations < 1) {
    throw ValidationError("TrainConfig: iterations must be >= 1");
  }
  if (config.top_n < 2) {
    throw ValidationError("TrainConfig: top_n must be >= 2");
  }
  if (!(config.kl_llm_temperature > 0.0)) {
    throw ValidationError("TrainConfig: kl_llm_temperature must be > 0");
  }
  validate(config.loss);
}

TrainConfig paper_preset() {
  TrainConfig config;
  config.batch_size = 32;
  config.candidates_per_item = 4;
  config.steps = 12000;
  config.learning_rate = 3e-5;
  config.iterations = 3;
  return config;
}

std::string train_log_to_jsonl(const std::vector<StepRecord>& log) {
  std::string out;
  for (const StepRecord& rec : log) {
    ordered_json obj;
    obj["step"] = rec.step;
    obj["l_ce"] = rec.l_ce;
    obj["l_d"] = rec.l_d;
    obj["l_s"] = rec.l_s;
    obj["l_cont"] = rec.l_cont;
    obj["l_retriever"] = rec.l_retriever;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

namespace {

// Candidate slots picked for one batch item: the highest-feedback candidate
// is always kept, the remainder is a seeded random sample.
std::vector<size_t> select_candidates(const ScoredCandidateSet& set, int per_item, Rng& rng) {
  size_t m = set.candidates.size();
  size_t want = std::min<size_t>(static_cast<size_t>(per_item), m);

  size_t pos = 0;
  for (size_t i = 1; i < m; ++i) {
    if (set.candidates[i].llm_score > set.candidates[pos].llm_score) {
      pos = i;
    }
  }

  std::vector<size_t> rest;
  rest.reserve(m - 1);
  for (size_t i = 0; i < m; ++i) {
    if (i != pos) {
      rest.push_back(i);
    }
  }
  std::vector<size_t> chosen{pos};
  for (size_t j = 0; j < want - 1; ++j) {
    size_t pick = j + rng.below(rest.size() - j);
    std::swap(rest[j], rest[pick]);
    chosen.push_back(rest[j]);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

struct FeatureCache {
  const EmbeddingModel& model;
  std::unordered_map<std::string, Vec> by_key;

  const Vec& get(const std::string& key, const std::string& text) {
    auto it = by_key.find(key);
    if (it != by_key.end()) {
      return it->second;
    }
    return by_key.emplace(key, extract(model.extractor, text)).first->second;
  }
};

}  // namespace

std::vector<StepRecord> train_one_iteration(EmbeddingModel& model,
                                            const std::vector<ScoredCandidateSet>& scored,
                                            const Pool& pool,
                                            const std::vector<QueryRecord>& queries,
                                            const TrainConfig& config, uint64_t rng_seed,
                                            CandidateTextMode mode) {
  validate(config);
  validate(model);
  if (scored.empty()) {
    throw ValidationError("train_one_iteration: scored data is empty");
  }

  std::unordered_map<std::string, const QueryRecord*> query_by_id;
  for (const QueryRecord& q : queries) {
    query_by_id[q.id] = &q;
  }
  for (const ScoredCandidateSet& set : scored) {
    if (!query_by_id.count(set.query_id)) {
      throw ValidationError("train_one_iteration: no query record for \"" + set.query_id + "\"");
    }
    for (const ScoredCandidate& c : set.candidates) {
      if (pool.find(c.id) == nullptr) {
        throw ValidationError("train_one_iteration: candidate \"" + c.id +
                              "\" is not in the pool");
      }
    }
  }

  Rng rng(rng_seed);
  std::vector<size_t> order(scored.size());
  for (size_t i = 0; i < order.size(); ++i) {
    order[i] = i;
  }
  rng.shuffle(order);
  size_t cursor = 0;

  FeatureCache features{model, {}};
  const int dim_out = model.params.dim_out;
  Matrix grad_w(model.params.dim_out, model.params.dim_in);
  std::vector<StepRecord> log;
  log.reserve(static_cast<size_t>(config.steps));

  for (int step = 1; step <= config.steps; ++step) {
    // Assemble the step's items; reshuffle at epoch boundaries.
    std::vector<size_t> picked;
    picked.reserve(static_cast<size_t>(config.batch_size));
    for (int j = 0; j < config.batch_size; ++j) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      picked.push_back(order[cursor++]);
    }

    size_t bsz = picked.size();
    std::vector<BatchItem> batch(bsz);
    std::vector<const Vec*> query_features(bsz);
    std::vector<Vec> query_vecs(bsz);
    std::vector<std::vector<const Vec*>> cand_features(bsz);
    std::vector<std::vector<Vec>> cand_vecs(bsz);
    std::vector<size_t> pos_slot(bsz);

    for (size_t x = 0; x < bsz; ++x) {
      const ScoredCandidateSet& set = scored[picked[x]];
      const QueryRecord& query = *query_by_id[set.query_id];
      std::vector<size_t> slots = select_candidates(set, config.candidates_per_item, rng);

      const Vec& qf = features.get("q:" + query.id, query.input);
      query_features[x] = &qf;
      query_vecs[x] = project(model, qf);

      BatchItem& item = batch[x];
      item.query_id = set.query_id;
      item.scores.reserve(slots.size());
      item.llm_values.reserve(slots.size());
      cand_features[x].reserve(slots.size());
      cand_vecs[x].reserve(slots.size());
      for (size_t slot : slots) {
        const ScoredCandidate& c = set.candidates[slot];
        const Example& ex = *pool.find(c.id);
        const Vec& cf = features.get("c:" + c.id, candidate_text(ex, mode));
        cand_features[x].push_back(&cf);
        cand_vecs[x].push_back(project(model, cf));
        item.scores.push_back(dot(query_vecs[x], cand_vecs[x].back()));
        item.llm_values.push_back(c.llm_score);
      }
      // Positive slot must match the loss's own argmax convention.
      size_t pos = 0;
      for (size_t i = 1; i < item.llm_values.size(); ++i) {
        if (item.llm_values[i] > item.llm_values[pos]) {
          pos = i;
        }
      }
      pos_slot[x] = pos;
    }

    bool use_cross = config.objective == Objective::kCombined &&
                     config.loss.in_batch_negatives && bsz > 1;
    Matrix cross;
    if (use_cross) {
      cross = Matrix(static_cast<int>(bsz), static_cast<int>(bsz));
      for (size_t x = 0; x < bsz; ++x) {
        for (size_t x2 = 0; x2 < bsz; ++x2) {
          if (x2 != x) {
            cross.at(static_cast<int>(x), static_cast<int>(x2)) =
                dot(query_vecs[x], cand_vecs[x2][pos_slot[x2]]);
          }
        }
      }
    }

    auto batch_ids = [&]() {
      std::string ids;
      for (size_t x = 0; x < bsz; ++x) {
        if (x > 0) {
          ids += ", ";
        }
        ids += batch[x].query_id;
      }
      return ids;
    };

    StepRecord rec;
    rec.step = step;
    std::vector<Vec> grad_scores;
    const Matrix* grad_cross = nullptr;
    Matrix grad_cross_storage;

    if (config.objective == Objective::kCombined) {
      LossBreakdown breakdown = combined_loss(batch, config.loss, use_cross ? &cross : nullptr);
      rec.l_ce = breakdown.l_ce;
      rec.l_d = breakdown.l_d;
      rec.l_s = breakdown.l_s;
      rec.l_cont = breakdown.l_cont;
      rec.l_retriever = breakdown.l_retriever;
      grad_scores = std::move(breakdown.grad_scores);
      if (use_cross) {
        grad_cross_storage = std::move(breakdown.grad_cross);
        grad_cross = &grad_cross_storage;
      }
    } else {
      // KL baseline: optimize the divergence; the breakdown columns are
      // logged as diagnostics, l_retriever carries the objective value.
      double kl = kl_baseline_loss(batch, config.loss.gamma, config.kl_llm_temperature);
      grad_scores = kl_baseline_grad(batch, config.loss.gamma, config.kl_llm_temperature);
      rec.l_ce = l_ce(batch, config.loss.gamma);
      MaskedLosses ml = masked_losses(batch, config.loss.gamma, config.loss.task_threshold);
      rec.l_d = ml.l_d;
      rec.l_s = ml.l_s;
      rec.l_cont = 0.0;
      rec.l_retriever = kl;
    }

    if (!std::isfinite(rec.l_retriever)) {
      throw Error("train_one_iteration: non-finite loss at step " + std::to_string(step) +
                  " (batch: " + batch_ids() + ")");
    }

    // Backward through both towers into the shared projection.
    grad_w.fill(0.0);
    for (size_t x = 0; x < bsz; ++x) {
      const Vec& g = grad_scores[x];
      if (!all_finite(g)) {
        throw Error("train_one_iteration: non-finite gradient at step " + std::to_string(step) +
                    " (batch: " + batch_ids() + ")");
      }
      Vec g_query(static_cast<size_t>(dim_out), 0.0);
      for (size_t i = 0; i < g.size(); ++i) {
        for (int d = 0; d < dim_out; ++d) {
          g_query[static_cast<size_t>(d)] += g[i] * cand_vecs[x][i][static_cast<size_t>(d)];
        }
        Vec g_cand(static_cast<size_t>(dim_out));
        for (int d = 0; d < dim_out; ++d) {
          g_cand[static_cast<size_t>(d)] = g[i] * query_vecs[x][static_cast<size_t>(d)];
        }
        if (grad_cross != nullptr && i == pos_slot[x]) {
          // This candidate also serves as an in-batch negative for the
          // other items' queries.
          for (size_t x2 = 0; x2 < bsz; ++x2) {
            if (x2 == x) {
              continue;
            }
            double gc = grad_cross->at(static_cast<int>(x2), static_cast<int>(x));
            for (int d = 0; d < dim_out; ++d) {
              g_cand[static_cast<size_t>(d)] += gc * query_vecs[x2][static_cast<size_t>(d)];
            }
          }
        }
        project_grad_accum(model, *cand_features[x][i], g_cand, grad_w);
      }
      if (grad_cross != nullptr) {
        for (size_t x2 = 0; x2 < bsz; ++x2) {
          if (x2 == x) {
            continue;
          }
          double gc = grad_cross->at(static_cast<int>(x), static_cast<int>(x2));
          for (int d = 0; d < dim_out; ++d) {
            g_query[static_cast<size_t>(d)] += gc * cand_vecs[x2][pos_slot[x2]][static_cast<size_t>(d)];
          }
        }
      }
      project_grad_accum(model, *query_features[x], g_query, grad_w);
    }

    for (size_t i = 0; i < model.params.weight.size(); ++i) {
      model.params.weight[i] -= config.learning_rate * grad_w.data[i];
    }
    log.push_back(rec);
  }
  return log;
}

TrainingRun run_iterative(const Pool& pool, const std::vector<QueryRecord>& queries,
                          EmbeddingModel& model, const TrainConfig& config,
                          const ScorerConfig& scorer, const std::filesystem::path& out_dir,
                          CandidateTextMode mode) {
  validate(config);
  std::filesystem::create_directories(out_dir);

  TrainingRun run;
  run.config = config;
  for (int iter = 1; iter <= config.iterations; ++iter) {
    uint64_t iter_seed = splitmix64(config.seed ^ (0x69746572ULL + static_cast<uint64_t>(iter)));
    run.seed_lineage.push_back(iter_seed);

    std::vector<ScoredCandidateSet> scored =
        generate_training_data(pool, queries, model, config.top_n, scorer, mode);
    if (scored.empty()) {
      throw Error("run_iterative: iteration " + std::to_string(iter) +
                  " produced no usable training data");
    }
    std::string tag = "iter" + std::to_string(iter);
    write_scored(scored, out_dir / (tag + "_scored.jsonl"));

    std::vector<StepRecord> log =
        train_one_iteration(model, scored, pool, queries, config, iter_seed, mode);
    atomic_write_file(out_dir / (tag + "_train_log.jsonl"), train_log_to_jsonl(log));

    std::filesystem::path ckpt = out_dir / (tag + ".ckpt");
    save_checkpoint(model, ckpt);

    IterationRecord rec;
    rec.iteration = iter;
    rec.data_fingerprint = scored_digest(scored);
    rec.checkpoint_path = ckpt.string();
    rec.checkpoint_fingerprint = model_fingerprint(model);
    rec.final_losses = log.back();
    run.iterations.push_back(std::move(rec));
  }
  return run;
}

}  // namespace tdr
