#pragma once

// Text-to-vector encoder: a deterministic hashed bag-of-tokens feature
// extractor composed with a trainable linear projection. Forward and backward
// passes are exact; checkpoints serialize the projection bit-for-bit.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "tdr/common.hpp"

namespace tdr {

// Deterministic signed feature hashing over lowercased whitespace tokens.
// Identical text always yields identical features; output has unit L2 norm
// for non-empty text and is the zero vector for empty text.
struct FeatureExtractor {
  int dim_in = 256;
  uint64_t hash_seed = 0x5eed;
};

Vec extract(const FeatureExtractor& fx, std::string_view text);

struct ProjectionParams {
  int dim_out = 0;
  int dim_in = 0;
  int version = 1;
  std::vector<double> weight;  // row-major dim_out x dim_in
};

struct EmbeddingModel {
  FeatureExtractor extractor;
  ProjectionParams params;
  bool normalize_output = true;
};

// Fresh model with Gaussian-initialized projection, deterministic in
// `init_seed`.
EmbeddingModel make_model(int dim_in, int dim_out, uint64_t hash_seed, bool normalize,
                          uint64_t init_seed);

void validate(const EmbeddingModel& model);

// weight * features, L2-normalized when the model says so. A zero projection
// output stays the zero vector rather than dividing by zero.
Vec project(const EmbeddingModel& model, const Vec& features);
Vec embed(const EmbeddingModel& model, std::string_view text);

// dL/dweight for one embed()/project() call, given dL/d(embedding). The
// normalization Jacobian is included when normalize_output is set.
void project_grad_accum(const EmbeddingModel& model, const Vec& features, const Vec& upstream,
                        Matrix& acc);
Matrix embed_grad(const EmbeddingModel& model, std::string_view text, const Vec& upstream);

// Checkpoint layout: one ASCII header line
//   tdr-checkpoint v1 dim_in=<n> dim_out=<n> normalize=<0|1> hash_seed=<u64>\n
// followed by dim_out*dim_in weight values as little-endian IEEE-754 doubles,
// row-major.
std::string checkpoint_bytes(const EmbeddingModel& model);
EmbeddingModel checkpoint_from_bytes(std::string_view bytes, const std::string& origin);
void save_checkpoint(const EmbeddingModel& model, const std::filesystem::path& path);
EmbeddingModel load_checkpoint(const std::filesystem::path& path);

// Digest of the serialized checkpoint; used as provenance in data files.
std::string model_fingerprint(const EmbeddingModel& model);

}  // namespace tdr
