#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace mcf {

// Input that could not be parsed (file format, CLI value, ...).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Structurally well-formed input that violates a model invariant.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure (solver breakdown, non-finite gradient, ...).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Deterministic RNG streams.
//
// All stochastic operations take an explicit 64-bit seed and derive
// independent substreams with splitmix64 so that per-pair / per-agent /
// per-timestep work gives identical results whether it runs serially or in
// parallel.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed) { return splitmix64(seed); }

template <typename... Rest>
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t first, Rest... rest) {
  return mix_seed(splitmix64(seed ^ (first + 0x9e3779b97f4a7c15ULL)), rest...);
}

// Engine for a derived substream.
inline std::mt19937_64 substream(std::uint64_t seed) { return std::mt19937_64(splitmix64(seed)); }

template <typename... Parts>
std::mt19937_64 substream(std::uint64_t seed, Parts... parts) {
  return std::mt19937_64(mix_seed(seed, static_cast<std::uint64_t>(parts)...));
}

// ---------------------------------------------------------------------------
// FNV-1a, used for config digests embedded in output files.
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Round-trip-exact decimal form of a double ("%.17g" with trailing cleanup).
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = std::strtod(buf, nullptr);
  if (back == v) {
    // Prefer the shortest representation that still round-trips.
    for (int prec = 1; prec < 17; ++prec) {
      char s[64];
      std::snprintf(s, sizeof(s), "%.*g", prec, v);
      if (std::strtod(s, nullptr) == v) return s;
    }
  }
  return buf;
}

// ---------------------------------------------------------------------------
// Deterministic parallel for.  Worker count comes from MCF_WORKERS when set,
// otherwise the hardware concurrency.  Results must be written to
// pre-allocated slots indexed by the loop variable; the helper only controls
// scheduling, never result order.
// ---------------------------------------------------------------------------

inline unsigned worker_count() {
  if (const char* env = std::getenv("MCF_WORKERS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  unsigned workers = worker_count();
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace mcf
