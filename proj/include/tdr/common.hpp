#pragma once

// Shared building blocks: error types, deterministic hashing/digests,
// a seedable RNG with platform-stable helpers, a minimal row-major
// matrix, and atomic file I/O.

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tdr {

using Vec = std::vector<double>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : Error {
  using Error::Error;
};
struct ValidationError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct ProtocolError : Error {
  using Error::Error;
};
struct MismatchError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

inline constexpr uint64_t kFnvOffset = 1469598103934665603ULL;
inline constexpr uint64_t kFnvPrime = 1099511628211ULL;

inline uint64_t fnv1a(const void* data, size_t len, uint64_t h = kFnvOffset) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

inline uint64_t fnv1a(std::string_view s, uint64_t h = kFnvOffset) {
  return fnv1a(s.data(), s.size(), h);
}

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string hex64(uint64_t v);

// Incremental fingerprint over typed fields. Every field is folded with its
// byte length so concatenation ambiguity cannot produce collisions between
// structurally different inputs.
class Digest {
 public:
  Digest& add(std::string_view s);
  Digest& add(uint64_t v);
  Digest& add(int64_t v) { return add(static_cast<uint64_t>(v)); }
  Digest& add(double v);
  std::string hex() const { return hex64(state_); }

 private:
  uint64_t state_ = kFnvOffset;
};

// ---------------------------------------------------------------------------
// Deterministic RNG
// ---------------------------------------------------------------------------

// mt19937_64 output is fixed by the standard; the derived draws below avoid
// std distributions, whose sequences vary across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t u64() { return eng_(); }

  // Uniform in [0, n). n must be > 0.
  size_t below(size_t n);

  // Uniform in [0, 1).
  double unit() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  double range(double lo, double hi) { return lo + (hi - lo) * unit(); }

  // Standard normal via Box-Muller.
  double normal();

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Matrix
// ---------------------------------------------------------------------------

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // row-major

  Matrix() = default;
  Matrix(int r, int c)
      : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), 0.0) {}

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

// ---------------------------------------------------------------------------
// Small numeric helpers
// ---------------------------------------------------------------------------

double dot(const Vec& a, const Vec& b);
double l2_norm(const Vec& v);
bool all_finite(const Vec& v);

// Shortest-width formatting that round-trips a double exactly.
std::string format_double(double v);

// ---------------------------------------------------------------------------
// File I/O
// ---------------------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);

// Writes to a temp file in the target directory, then renames into place, so
// a failed run never leaves a partial artifact at `path`.
void atomic_write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace tdr
