// common.hpp -- error types, execution modes, seeding and small shared utilities.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace isonet {

inline constexpr const char* version = "0.1.0";

/// Base class for all library errors.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input, configuration or shape. CLI exit code 2.
class validation_error : public error {
 public:
  using error::error;
};

/// Numeric failure (NaN propagation, singular matrix). CLI exit code 3.
class numeric_error : public error {
 public:
  using error::error;
};

/// Filesystem / serialization failure. CLI exit code 4.
class io_error : public error {
 public:
  using error::error;
};

enum class Mode { train, infer };

enum class Activation { identity, relu, softmax };

// ---------------------------------------------------------------------------
// Seeding.
//
// Every stochastic component draws from an mt19937_64 seeded through
// mix_seed, so independent streams (per run, per fold, per epoch) are
// derived from the master seed and stay reproducible regardless of
// scheduling.
// ---------------------------------------------------------------------------

/// splitmix64 step; the standard 64-bit finalizer.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and tag words.
inline std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t t : tags) h = splitmix64(h ^ t);
  return h;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a) { return mix_seed(seed, {a}); }
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return mix_seed(seed, {a, b});
}

/// FNV-1a over raw bytes; used for spec hashes and audit digests.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(s.data(), s.size(), h);
}

template <class T>
bool all_finite(const std::vector<T>& v) {
  for (T x : v)
    if (!std::isfinite(static_cast<double>(x))) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Job-level parallelism. Jobs are independent and internally deterministic,
// so results do not depend on the thread count; only wall time does.
// ---------------------------------------------------------------------------

/// Runs fn(job) for job in [0, n_jobs) on up to n_threads workers.
inline void parallel_jobs(int n_jobs, int n_threads, const std::function<void(int)>& fn) {
  if (n_jobs <= 0) return;
  if (n_threads <= 1 || n_jobs == 1) {
    for (int j = 0; j < n_jobs; ++j) fn(j);
    return;
  }
  const int workers = std::min(n_threads, n_jobs);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int j = w; j < n_jobs; j += workers) fn(j);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace isonet
