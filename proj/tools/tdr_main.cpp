// tdr: single entry point for the retriever-training pipeline.
//
// Subcommands: gen-synth, gen-data, train, eval, analyze, score-server-check.
// Exit codes: 0 success, 1 runtime failure, 2 usage/validation error,
// 3 scorer-protocol failure. On success the last stdout line is
// {"artifacts": [paths]}.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tdr/config.hpp"
#include "tdr/corpus.hpp"
#include "tdr/datagen.hpp"
#include "tdr/encoder.hpp"
#include "tdr/eval.hpp"
#include "tdr/feedback.hpp"
#include "tdr/trainer.hpp"

namespace {

using ordered_json = nlohmann::ordered_json;

void print_artifacts(const std::vector<std::string>& paths) {
  ordered_json obj;
  obj["artifacts"] = paths;
  std::cout << obj.dump() << "\n";
}

// Environment overrides, documented in --help.
void apply_env_overrides(tdr::ScorerConfig& scorer) {
  if (const char* endpoint = std::getenv("TDR_SCORER_ENDPOINT")) {
    scorer.endpoint = endpoint;
  }
  if (const char* timeout = std::getenv("TDR_SCORER_TIMEOUT_MS")) {
    try {
      scorer.timeout_ms = std::stoi(timeout);
    } catch (const std::exception&) {
      throw tdr::ConfigError("TDR_SCORER_TIMEOUT_MS: expected an integer, got \"" +
                             std::string(timeout) + "\"");
    }
  }
}

ordered_json config_to_json(const tdr::PipelineConfig& config) {
  ordered_json obj;
  obj["batch_size"] = config.train.batch_size;
  obj["candidates_per_item"] = config.train.candidates_per_item;
  obj["steps"] = config.train.steps;
  obj["learning_rate"] = config.train.learning_rate;
  obj["seed"] = config.train.seed;
  obj["iterations"] = config.train.iterations;
  obj["top_n"] = config.train.top_n;
  obj["objective"] = config.train.objective == tdr::Objective::kCombined ? "combined" : "kl";
  obj["kl_llm_temperature"] = config.train.kl_llm_temperature;
  obj["gamma"] = config.train.loss.gamma;
  obj["tau_cont"] = config.train.loss.tau_cont;
  obj["lambda"] = config.train.loss.lambda;
  obj["alpha"] = config.train.loss.alpha;
  obj["beta"] = config.train.loss.beta;
  obj["task_threshold"] = config.train.loss.task_threshold;
  obj["task_penalty"] = config.train.loss.task_penalty;
  obj["in_batch_negatives"] = config.train.loss.in_batch_negatives;
  obj["candidate_level_mask"] = config.train.loss.candidate_level_mask;
  obj["scorer_kind"] = config.scorer.kind == tdr::ScorerKind::kMock ? "mock" : "http";
  obj["scorer_endpoint"] = config.scorer.endpoint;
  obj["scorer_max_parallel"] = config.scorer.max_parallel;
  obj["scorer_timeout_ms"] = config.scorer.timeout_ms;
  obj["scorer_retries"] = config.scorer.retries;
  obj["mock_feature_dim"] = config.scorer.mock_feature_dim;
  obj["mock_hash_seed"] = config.scorer.mock_hash_seed;
  obj["mock_scale"] = config.scorer.mock_scale;
  obj["mock_floor"] = config.scorer.mock_floor;
  return obj;
}

ordered_json step_to_json(const tdr::StepRecord& rec) {
  ordered_json obj;
  obj["step"] = rec.step;
  obj["l_ce"] = rec.l_ce;
  obj["l_d"] = rec.l_d;
  obj["l_s"] = rec.l_s;
  obj["l_cont"] = rec.l_cont;
  obj["l_retriever"] = rec.l_retriever;
  return obj;
}

struct GenSynthArgs {
  tdr::SyntheticSpec spec;
  std::string out;
  std::string queries_out;
};

int run_gen_synth(const GenSynthArgs& args) {
  tdr::validate(args.spec);
  tdr::SyntheticCorpus corpus = tdr::generate_synthetic(args.spec);
  tdr::write_pool(corpus.pool, args.out);
  tdr::write_queries(corpus.queries, args.queries_out);
  print_artifacts({args.out, args.queries_out});
  return 0;
}

struct GenDataArgs {
  std::string pool;
  std::string queries;
  std::string checkpoint;
  std::string config_path;
  std::string out;
  int top_n = 40;
  bool input_only = false;
};

int run_gen_data(const GenDataArgs& args) {
  tdr::PipelineConfig config;
  if (!args.config_path.empty()) {
    config = tdr::load_config(args.config_path);
  }
  apply_env_overrides(config.scorer);

  tdr::Pool pool = tdr::load_pool(args.pool);
  std::vector<tdr::QueryRecord> queries = tdr::load_queries(args.queries);
  tdr::EmbeddingModel model = tdr::load_checkpoint(args.checkpoint);
  auto mode = args.input_only ? tdr::CandidateTextMode::kInputOnly
                              : tdr::CandidateTextMode::kInputOutput;
  auto sets = tdr::generate_training_data(pool, queries, model, args.top_n, config.scorer, mode);
  tdr::write_scored(sets, args.out);
  print_artifacts({args.out});
  return 0;
}

struct TrainArgs {
  std::string pool;
  std::string queries;
  std::string out_dir;
  std::string config_path;
  std::string checkpoint_in;
  std::string scored;
  bool allow_mismatch = false;
  bool paper_preset = false;
  bool input_only = false;
  int dim_in = 256;
  int dim_out = 64;
  uint64_t hash_seed = 0x5eed;
  bool no_normalize = false;
  bool seed_overridden = false;
  uint64_t seed_override = 0;
};

int run_train(const TrainArgs& args) {
  tdr::PipelineConfig config;
  if (args.paper_preset) {
    config.train = tdr::paper_preset();
  }
  if (!args.config_path.empty()) {
    config = tdr::load_config(args.config_path, config);
  }
  if (args.seed_overridden) {
    config.train.seed = args.seed_override;
  }
  apply_env_overrides(config.scorer);
  tdr::validate(config.train);
  tdr::validate(config.scorer);

  tdr::Pool pool = tdr::load_pool(args.pool);
  std::vector<tdr::QueryRecord> queries = tdr::load_queries(args.queries);
  auto mode = args.input_only ? tdr::CandidateTextMode::kInputOnly
                              : tdr::CandidateTextMode::kInputOutput;

  tdr::EmbeddingModel model =
      args.checkpoint_in.empty()
          ? tdr::make_model(args.dim_in, args.dim_out, args.hash_seed, !args.no_normalize,
                            config.train.seed)
          : tdr::load_checkpoint(args.checkpoint_in);

  std::filesystem::path out_dir(args.out_dir);
  tdr::TrainingRun run;
  std::vector<std::string> artifacts;

  if (!args.scored.empty()) {
    // Single-iteration training on pre-mined data.
    if (config.train.iterations != 1) {
      throw tdr::ValidationError("--scored requires iterations = 1");
    }
    auto sets = tdr::read_scored(args.scored);
    tdr::check_scored_provenance(sets, tdr::pool_digest(pool), tdr::model_fingerprint(model),
                                 !args.allow_mismatch);
    uint64_t iter_seed = tdr::splitmix64(config.train.seed ^ (0x69746572ULL + 1));
    auto log = tdr::train_one_iteration(model, sets, pool, queries, config.train, iter_seed, mode);
    std::filesystem::create_directories(out_dir);
    tdr::atomic_write_file(out_dir / "iter1_train_log.jsonl", tdr::train_log_to_jsonl(log));
    tdr::save_checkpoint(model, out_dir / "iter1.ckpt");

    run.config = config.train;
    run.seed_lineage.push_back(iter_seed);
    tdr::IterationRecord rec;
    rec.iteration = 1;
    rec.data_fingerprint = tdr::scored_digest(sets);
    rec.checkpoint_path = (out_dir / "iter1.ckpt").string();
    rec.checkpoint_fingerprint = tdr::model_fingerprint(model);
    rec.final_losses = log.back();
    run.iterations.push_back(rec);
    artifacts.push_back((out_dir / "iter1_train_log.jsonl").string());
    artifacts.push_back((out_dir / "iter1.ckpt").string());
  } else {
    run = tdr::run_iterative(pool, queries, model, config.train, config.scorer, out_dir, mode);
    for (const auto& rec : run.iterations) {
      std::string tag = "iter" + std::to_string(rec.iteration);
      artifacts.push_back((out_dir / (tag + "_scored.jsonl")).string());
      artifacts.push_back((out_dir / (tag + "_train_log.jsonl")).string());
      artifacts.push_back(rec.checkpoint_path);
    }
  }

  ordered_json run_json;
  run_json["config"] = config_to_json(config);
  ordered_json iters = ordered_json::array();
  for (const auto& rec : run.iterations) {
    ordered_json entry;
    entry["iteration"] = rec.iteration;
    entry["data_fingerprint"] = rec.data_fingerprint;
    entry["checkpoint_path"] = rec.checkpoint_path;
    entry["checkpoint_fingerprint"] = rec.checkpoint_fingerprint;
    entry["final_losses"] = step_to_json(rec.final_losses);
    iters.push_back(std::move(entry));
  }
  run_json["iterations"] = std::move(iters);
  run_json["seed_lineage"] = run.seed_lineage;
  tdr::atomic_write_file(out_dir / "run.json", run_json.dump(2) + "\n");
  artifacts.push_back((out_dir / "run.json").string());

  print_artifacts(artifacts);
  return 0;
}

struct EvalArgs {
  std::string pool;
  std::string queries;
  std::string checkpoint;
  std::string config_path;
  std::string out;
  std::string scatter;
  std::string prompts_out;
  int k = 8;
  bool wrapped_scores = false;
  bool input_only = false;
};

int run_eval(const EvalArgs& args) {
  tdr::PipelineConfig config;
  if (!args.config_path.empty()) {
    config = tdr::load_config(args.config_path);
  }
  apply_env_overrides(config.scorer);

  tdr::Pool pool = tdr::load_pool(args.pool);
  std::vector<tdr::QueryRecord> queries = tdr::load_queries(args.queries);
  tdr::EmbeddingModel model = tdr::load_checkpoint(args.checkpoint);
  auto mode = args.input_only ? tdr::CandidateTextMode::kInputOnly
                              : tdr::CandidateTextMode::kInputOutput;

  tdr::RetrievalReport report = tdr::evaluate_retrieval(model, pool, queries, args.k,
                                                        config.scorer, mode, args.wrapped_scores);
  tdr::write_report(report, args.out);
  std::vector<std::string> artifacts{args.out};
  if (!args.scatter.empty()) {
    tdr::atomic_write_file(args.scatter, tdr::scatter_to_csv(report));
    artifacts.push_back(args.scatter);
  }
  if (!args.prompts_out.empty()) {
    tdr::VectorIndex index = tdr::build_index(model, pool, mode);
    tdr::PromptTemplate tmpl;
    std::string out;
    for (const tdr::QueryRecord& query : queries) {
      tdr::Vec qv = tdr::embed(model, query.input);
      auto retrieved = tdr::top_k(index, qv, static_cast<size_t>(args.k), query.id);
      if (retrieved.empty()) {
        continue;
      }
      std::vector<tdr::Example> examples;
      examples.reserve(retrieved.size());
      for (const auto& s : retrieved) {
        examples.push_back(*pool.find(s.id));
      }
      ordered_json obj;
      obj["query_id"] = query.id;
      obj["prompt"] = tdr::assemble_prompt(query, examples, args.k, tmpl);
      out += obj.dump();
      out += '\n';
    }
    tdr::atomic_write_file(args.prompts_out, out);
    artifacts.push_back(args.prompts_out);
  }
  print_artifacts(artifacts);
  return 0;
}

struct AnalyzeArgs {
  std::string before;
  std::string after;
  std::string out;
  std::string csv;
};

int run_analyze(const AnalyzeArgs& args) {
  tdr::RetrievalReport before = tdr::read_report(args.before);
  tdr::RetrievalReport after = tdr::read_report(args.after);
  tdr::ComparisonSummary summary = tdr::compare_reports(before, after);
  tdr::atomic_write_file(args.out, tdr::comparison_to_json(summary));
  std::vector<std::string> artifacts{args.out};
  if (!args.csv.empty()) {
    tdr::atomic_write_file(args.csv, tdr::comparison_to_csv(summary));
    artifacts.push_back(args.csv);
  }
  print_artifacts(artifacts);
  return 0;
}

int run_score_server_check(std::string endpoint) {
  tdr::ScorerConfig scorer;
  scorer.kind = tdr::ScorerKind::kHttp;
  scorer.endpoint = std::move(endpoint);
  apply_env_overrides(scorer);
  if (scorer.endpoint.empty()) {
    throw tdr::ValidationError("no endpoint: pass --endpoint or set TDR_SCORER_ENDPOINT");
  }

  std::vector<tdr::ScoreRequestItem> probe{
      {"probe query", "probe answer", "probe candidate", "probe candidate answer"},
      {"second query", "second answer", "second candidate", "second candidate answer"},
  };
  auto results = tdr::http_score(probe, scorer);
  for (size_t i = 0; i < results.size(); ++i) {
    if (!results[i].ok) {
      bool protocol = results[i].error.find("protocol violation") != std::string::npos ||
                      results[i].error.find("malformed") != std::string::npos;
      std::string msg = "item " + std::to_string(i) + ": " + results[i].error;
      if (protocol) {
        throw tdr::ProtocolError(msg);
      }
      throw tdr::Error(msg);
    }
  }
  std::cout << "scorer at " << scorer.endpoint << " passed the contract check ("
            << results.size() << " items)\n";
  print_artifacts({});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense-retriever training pipeline for in-context example selection"};
  app.require_subcommand(1);
  app.footer(
      "Environment: TDR_SCORER_ENDPOINT and TDR_SCORER_TIMEOUT_MS override the\n"
      "scorer endpoint and timeout from any config file.\n"
      "Exit codes: 0 success, 1 runtime failure, 2 usage/validation error,\n"
      "3 scorer-protocol failure.");

  GenSynthArgs gen_synth;
  auto* synth_cmd = app.add_subcommand("gen-synth", "Generate a synthetic multi-task corpus");
  synth_cmd->add_option("--num-tasks", gen_synth.spec.num_tasks, "Number of tasks (>= 2)");
  synth_cmd->add_option("--examples-per-task", gen_synth.spec.examples_per_task,
                        "Pool examples per task");
  synth_cmd->add_option("--feature-dim", gen_synth.spec.feature_dim,
                        "Feature dimensionality recorded for this corpus");
  synth_cmd->add_option("--overlap", gen_synth.spec.task_overlap,
                        "Fraction of tokens drawn from the shared vocabulary [0,1]");
  synth_cmd->add_option("--seed", gen_synth.spec.seed, "Generation seed");
  synth_cmd->add_option("--out", gen_synth.out, "Output pool JSONL")->required();
  synth_cmd->add_option("--queries", gen_synth.queries_out, "Output queries JSONL")->required();

  GenDataArgs gen_data;
  auto* data_cmd = app.add_subcommand("gen-data", "Mine and score training candidates");
  data_cmd->add_option("--pool", gen_data.pool, "Pool JSONL")->required();
  data_cmd->add_option("--queries", gen_data.queries, "Queries JSONL")->required();
  data_cmd->add_option("--checkpoint", gen_data.checkpoint, "Retriever checkpoint")->required();
  data_cmd->add_option("--config", gen_data.config_path, "Config file (scorer settings)");
  data_cmd->add_option("--n", gen_data.top_n, "Candidates mined per query");
  data_cmd->add_flag("--input-only", gen_data.input_only,
                     "Embed candidate inputs without outputs");
  data_cmd->add_option("--out", gen_data.out, "Output scored-data JSONL")->required();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train the retriever (iterative mine+train)");
  train_cmd->add_option("--pool", train.pool, "Pool JSONL")->required();
  train_cmd->add_option("--queries", train.queries, "Queries JSONL")->required();
  train_cmd->add_option("--out-dir", train.out_dir, "Output directory")->required();
  train_cmd->add_option("--config", train.config_path, "Config file");
  train_cmd->add_option("--checkpoint-in", train.checkpoint_in,
                        "Resume from this checkpoint instead of a fresh model");
  train_cmd->add_option("--scored", train.scored,
                        "Train on this pre-mined scored data (single iteration)");
  train_cmd->add_flag("--allow-mismatch", train.allow_mismatch,
                      "Downgrade provenance mismatches on --scored to warnings");
  train_cmd->add_flag("--paper-preset", train.paper_preset,
                      "Start from the full-scale preset (batch 32, 12000 steps, lr 3e-5)");
  train_cmd->add_flag("--input-only", train.input_only,
                      "Embed candidate inputs without outputs");
  train_cmd->add_option("--dim-in", train.dim_in, "Feature dim for a fresh model");
  train_cmd->add_option("--dim-out", train.dim_out, "Embedding dim for a fresh model");
  train_cmd->add_option("--hash-seed", train.hash_seed, "Extractor hash seed for a fresh model");
  train_cmd->add_flag("--no-normalize", train.no_normalize,
                      "Raw dot-product embeddings (skip L2 normalization)");
  auto* seed_opt = train_cmd->add_option("--seed", train.seed_override,
                                         "Override the seed from the config file");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Measure retrieval quality of a checkpoint");
  eval_cmd->add_option("--pool", eval.pool, "Pool JSONL")->required();
  eval_cmd->add_option("--queries", eval.queries, "Queries JSONL")->required();
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Retriever checkpoint")->required();
  eval_cmd->add_option("--config", eval.config_path, "Config file (scorer settings)");
  eval_cmd->add_option("--k", eval.k, "Examples retrieved per query");
  eval_cmd->add_flag("--wrapped-scores", eval.wrapped_scores,
                     "Report task-wrapped feedback values instead of raw log-probs");
  eval_cmd->add_flag("--input-only", eval.input_only,
                     "Embed candidate inputs without outputs");
  eval_cmd->add_option("--out", eval.out, "Output report JSON")->required();
  eval_cmd->add_option("--scatter", eval.scatter, "Output scatter CSV");
  eval_cmd->add_option("--prompts-out", eval.prompts_out, "Output k-shot prompts JSONL");

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Compare two retrieval reports");
  analyze_cmd->add_option("--before", analyze.before, "Baseline report JSON")->required();
  analyze_cmd->add_option("--after", analyze.after, "Comparison report JSON")->required();
  analyze_cmd->add_option("--out", analyze.out, "Output comparison JSON")->required();
  analyze_cmd->add_option("--csv", analyze.csv, "Output paired-slot CSV");

  std::string check_endpoint;
  auto* check_cmd = app.add_subcommand("score-server-check",
                                       "Probe a scoring service for contract compliance");
  check_cmd->add_option("--endpoint", check_endpoint, "Service base URL");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth_cmd->parsed()) {
      return run_gen_synth(gen_synth);
    }
    if (data_cmd->parsed()) {
      return run_gen_data(gen_data);
    }
    if (train_cmd->parsed()) {
      train.seed_overridden = seed_opt->count() > 0;
      return run_train(train);
    }
    if (eval_cmd->parsed()) {
      return run_eval(eval);
    }
    if (analyze_cmd->parsed()) {
      return run_analyze(analyze);
    }
    if (check_cmd->parsed()) {
      return run_score_server_check(check_endpoint);
    }
  } catch (const tdr::ProtocolError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const tdr::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const tdr::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const tdr::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
