#include "tdr/common.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <unistd.h>

namespace tdr {

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf, 16);
}

Digest& Digest::add(std::string_view s) {
  uint64_t len = s.size();
  state_ = fnv1a(&len, sizeof(len), state_);
  state_ = fnv1a(s.data(), s.size(), state_);
  return *this;
}

Digest& Digest::add(uint64_t v) {
  state_ = fnv1a(&v, sizeof(v), state_);
  return *this;
}

Digest& Digest::add(double v) {
  static_assert(sizeof(double) == sizeof(uint64_t));
  uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  return add(bits);
}

size_t Rng::below(size_t n) {
  if (n == 0) {
    throw ValidationError("Rng::below: n must be > 0");
  }
  // Rejection sampling keeps the draw unbiased and platform-stable.
  uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x = u64();
  while (x >= limit) {
    x = u64();
  }
  return static_cast<size_t>(x % n);
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = unit();
  double u2 = unit();
  while (u1 <= 1e-300) {
    u1 = unit();
  }
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw ValidationError("dot: vector length mismatch");
  }
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    s += a[i] * b[i];
  }
  return s;
}

double l2_norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) {
    s += x * x;
  }
  return std::sqrt(s);
}

bool all_finite(const Vec& v) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      return false;
    }
  }
  return true;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open file: " + path.string());
  }
  std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw Error("read failed: " + path.string());
  }
  return contents;
}

void atomic_write_file(const std::filesystem::path& path, std::string_view contents) {
  static std::atomic<uint64_t> counter{0};
  auto dir = path.parent_path();
  if (!dir.empty()) {
    std::filesystem::create_directories(dir);
  }
  auto tmp = path;
  tmp += ".tmp" + std::to_string(counter.fetch_add(1)) + "-" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error("cannot open for write: " + tmp.string());
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw Error("write failed: " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace tdr
