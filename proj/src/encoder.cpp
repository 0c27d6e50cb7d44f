#include "tdr/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace tdr {

namespace {

constexpr double kNormEps = 1e-12;

void for_each_token(std::string_view text, auto&& fn) {
  size_t i = 0;
  std::string token;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
    }
    size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
    }
    if (i > start) {
      token.assign(text.substr(start, i - start));
      for (char& c : token) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      }
      fn(token);
    }
  }
}

}  // namespace

Vec extract(const FeatureExtractor& fx, std::string_view text) {
  if (fx.dim_in < 2) {
    throw ValidationError("FeatureExtractor: dim_in must be >= 2");
  }
  Vec v(static_cast<size_t>(fx.dim_in), 0.0);
  uint64_t base = splitmix64(fx.hash_seed);
  bool any = false;
  for_each_token(text, [&](const std::string& token) {
    any = true;
    uint64_t h = splitmix64(fnv1a(token, base ^ kFnvOffset));
    size_t idx = static_cast<size_t>(h % static_cast<uint64_t>(fx.dim_in));
    double sign = (h >> 63) ? -1.0 : 1.0;
    v[idx] += sign;
  });
  if (!any) {
    return v;
  }
  double norm = l2_norm(v);
  if (norm > kNormEps) {
    for (double& x : v) {
      x /= norm;
    }
  }
  return v;
}

EmbeddingModel make_model(int dim_in, int dim_out, uint64_t hash_seed, bool normalize,
                          uint64_t init_seed) {
  if (dim_in < 2 || dim_out < 2) {
    throw ValidationError("make_model: dim_in and dim_out must be >= 2");
  }
  EmbeddingModel model;
  model.extractor = FeatureExtractor{dim_in, hash_seed};
  model.params.dim_in = dim_in;
  model.params.dim_out = dim_out;
  model.params.weight.resize(static_cast<size_t>(dim_in) * dim_out);
  model.normalize_output = normalize;
  Rng rng(splitmix64(init_seed ^ 0x696e6974ULL));
  double scale = 1.0 / std::sqrt(static_cast<double>(dim_in));
  for (double& w : model.params.weight) {
    w = scale * rng.normal();
  }
  return model;
}

void validate(const EmbeddingModel& model) {
  const auto& p = model.params;
  if (p.dim_out < 2 || p.dim_in < 2) {
    throw ValidationError("EmbeddingModel: dim_out and dim_in must be >= 2");
  }
  if (p.dim_in != model.extractor.dim_in) {
    throw ValidationError("EmbeddingModel: projection dim_in does not match extractor");
  }
  if (p.weight.size() != static_cast<size_t>(p.dim_out) * static_cast<size_t>(p.dim_in)) {
    throw ValidationError("EmbeddingModel: weight size does not match dims");
  }
  if (!all_finite(p.weight)) {
    throw ValidationError("EmbeddingModel: weight contains non-finite values");
  }
}

Vec project(const EmbeddingModel& model, const Vec& features) {
  const auto& p = model.params;
  if (features.size() != static_cast<size_t>(p.dim_in)) {
    throw ValidationError("project: feature length does not match dim_in");
  }
  Vec z(static_cast<size_t>(p.dim_out), 0.0);
  for (int r = 0; r < p.dim_out; ++r) {
    const double* row = &p.weight[static_cast<size_t>(r) * p.dim_in];
    double s = 0.0;
    for (int c = 0; c < p.dim_in; ++c) {
      s += row[c] * features[c];
    }
    z[static_cast<size_t>(r)] = s;
  }
  if (model.normalize_output) {
    double norm = l2_norm(z);
    if (norm > kNormEps) {
      for (double& x : z) {
        x /= norm;
      }
    } else {
      std::fill(z.begin(), z.end(), 0.0);
    }
  }
  return z;
}

Vec embed(const EmbeddingModel& model, std::string_view text) {
  return project(model, extract(model.extractor, text));
}

void project_grad_accum(const EmbeddingModel& model, const Vec& features, const Vec& upstream,
                        Matrix& acc) {
  const auto& p = model.params;
  if (features.size() != static_cast<size_t>(p.dim_in)) {
    throw ValidationError("project_grad_accum: feature length does not match dim_in");
  }
  if (upstream.size() != static_cast<size_t>(p.dim_out)) {
    throw ValidationError("project_grad_accum: upstream length does not match dim_out");
  }
  if (acc.rows != p.dim_out || acc.cols != p.dim_in) {
    throw ValidationError("project_grad_accum: accumulator shape mismatch");
  }

  // dL/dz for z = W f; with normalization y = z/|z| the Jacobian is
  // (I - y y^T)/|z|.
  Vec dz(static_cast<size_t>(p.dim_out));
  if (model.normalize_output) {
    Vec z(static_cast<size_t>(p.dim_out), 0.0);
    for (int r = 0; r < p.dim_out; ++r) {
      const double* row = &p.weight[static_cast<size_t>(r) * p.dim_in];
      double s = 0.0;
      for (int c = 0; c < p.dim_in; ++c) {
        s += row[c] * features[c];
      }
      z[static_cast<size_t>(r)] = s;
    }
    double norm = l2_norm(z);
    if (norm <= kNormEps) {
      return;  // zero output convention: no gradient
    }
    Vec y(z);
    for (double& x : y) {
      x /= norm;
    }
    double uy = dot(upstream, y);
    for (int r = 0; r < p.dim_out; ++r) {
      dz[static_cast<size_t>(r)] = (upstream[static_cast<size_t>(r)] - uy * y[static_cast<size_t>(r)]) / norm;
    }
  } else {
    dz = upstream;
  }

  for (int r = 0; r < p.dim_out; ++r) {
    double g = dz[static_cast<size_t>(r)];
    if (g == 0.0) {
      continue;
    }
    double* row = &acc.data[static_cast<size_t>(r) * p.dim_in];
    for (int c = 0; c < p.dim_in; ++c) {
      row[c] += g * features[c];
    }
  }
}

Matrix embed_grad(const EmbeddingModel& model, std::string_view text, const Vec& upstream) {
  Matrix acc(model.params.dim_out, model.params.dim_in);
  project_grad_accum(model, extract(model.extractor, text), upstream, acc);
  return acc;
}

namespace {

void append_le_double(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
}

double read_le_double(const unsigned char* p) {
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<uint64_t>(p[i]) << (8 * i);
  }
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace

std::string checkpoint_bytes(const EmbeddingModel& model) {
  validate(model);
  char header[128];
  std::snprintf(header, sizeof(header),
                "tdr-checkpoint v%d dim_in=%d dim_out=%d normalize=%d hash_seed=%llu\n",
                model.params.version, model.params.dim_in, model.params.dim_out,
                model.normalize_output ? 1 : 0,
                static_cast<unsigned long long>(model.extractor.hash_seed));
  std::string out = header;
  out.reserve(out.size() + model.params.weight.size() * 8);
  for (double w : model.params.weight) {
    append_le_double(out, w);
  }
  return out;
}

EmbeddingModel checkpoint_from_bytes(std::string_view bytes, const std::string& origin) {
  size_t eol = bytes.find('\n');
  if (eol == std::string_view::npos) {
    throw ParseError(origin + ": missing checkpoint header line");
  }
  std::string header(bytes.substr(0, eol));
  int version = 0, dim_in = 0, dim_out = 0, normalize = 0;
  unsigned long long hash_seed = 0;
  int matched = std::sscanf(header.c_str(),
                            "tdr-checkpoint v%d dim_in=%d dim_out=%d normalize=%d hash_seed=%llu",
                            &version, &dim_in, &dim_out, &normalize, &hash_seed);
  if (matched != 5 || version != 1 || (normalize != 0 && normalize != 1)) {
    throw ParseError(origin + ": malformed checkpoint header: \"" + header + "\"");
  }
  if (dim_in < 2 || dim_out < 2) {
    throw ParseError(origin + ": checkpoint dims out of range");
  }
  size_t expected = static_cast<size_t>(dim_in) * static_cast<size_t>(dim_out) * 8;
  std::string_view body = bytes.substr(eol + 1);
  if (body.size() != expected) {
    throw ParseError(origin + ": checkpoint body has " + std::to_string(body.size()) +
                     " bytes, expected " + std::to_string(expected));
  }

  EmbeddingModel model;
  model.extractor = FeatureExtractor{dim_in, static_cast<uint64_t>(hash_seed)};
  model.params.version = version;
  model.params.dim_in = dim_in;
  model.params.dim_out = dim_out;
  model.normalize_output = normalize == 1;
  model.params.weight.resize(static_cast<size_t>(dim_in) * dim_out);
  const auto* p = reinterpret_cast<const unsigned char*>(body.data());
  for (size_t i = 0; i < model.params.weight.size(); ++i) {
    model.params.weight[i] = read_le_double(p + i * 8);
  }
  validate(model);
  return model;
}

void save_checkpoint(const EmbeddingModel& model, const std::filesystem::path& path) {
  atomic_write_file(path, checkpoint_bytes(model));
}

EmbeddingModel load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_bytes(read_file(path), path.string());
}

std::string model_fingerprint(const EmbeddingModel& model) {
  std::string bytes = checkpoint_bytes(model);
  return hex64(fnv1a(bytes.data(), bytes.size()));
}

}  // namespace tdr
