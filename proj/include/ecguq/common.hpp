#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <string>

namespace ecguq {

inline constexpr const char* kVersion = "0.1.0";

// Heartbeat segments in both corpora are fixed-length 187-sample windows at 125 Hz.
inline constexpr int kSegmentLength = 187;
inline constexpr double kSamplingRateHz = 125.0;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct LoadError : Error {
  using Error::Error;
};
struct SplitError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct CheckpointError : Error {
  using Error::Error;
};
struct TrainError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Seed mixing and counter-style RNG streams.
//
// Every stochastic consumer (dropout pass, shuffle, init) owns a stream seeded
// from mix_seed(...) over its logical coordinates, e.g. (base_seed, record,
// member, pass). Results are therefore independent of execution order.

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts);

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller (two uniforms per draw, no caching).
  double normal();
  // Uniform integer in [0, bound).
  std::uint64_t uniform_int(std::uint64_t bound);

 private:
  std::uint64_t s_[4];  // xoshiro256++
};

// ---------------------------------------------------------------------------
// Deterministic data-parallel helper.
//
// Splits [0, n) into fixed contiguous chunks and runs `body(begin, end)` on
// worker threads. Chunking depends only on n and the configured thread count,
// and chunks never share output elements, so results are bitwise identical to
// a serial run. Nested calls run serially.

void set_num_threads(int n);  // n < 1 resets to hardware concurrency
int num_threads();
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& body);

}  // namespace ecguq
