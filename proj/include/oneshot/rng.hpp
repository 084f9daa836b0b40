#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace oneshot {

// splitmix64 permutation; used to derive substream seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream purposes. The values are part of the determinism contract: every
// (purpose, index...) tuple owns its own reproducible stream.
enum class StreamTag : std::uint64_t {
  kParamInit = 1,
  kMisreportInit = 2,
  kGradientNoise = 3,
  kProfileSample = 4,
  kEvalTraining = 5,
};

// Folds a master seed and a tag tuple into one substream seed.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 StreamTag tag,
                                 std::initializer_list<std::uint64_t> indices = {}) {
  std::uint64_t s = splitmix64(master ^ 0x5bf03635f0a5b1c3ULL);
  s = splitmix64(s ^ static_cast<std::uint64_t>(tag));
  for (std::uint64_t idx : indices) {
    s = splitmix64(s ^ (idx + 0x9e3779b97f4a7c15ULL));
  }
  return s;
}

// Seeded random stream. A single Rng is never shared across threads; fork
// independent streams with derive_seed instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  // uniform draw from [lo, hi)
  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  // zero-mean gaussian with the given standard deviation
  double gaussian(double stddev) {
    return std::normal_distribution<double>(0.0, stddev)(engine_);
  }

  // uniform index in [0, count)
  int uniform_index(int count) {
    return std::uniform_int_distribution<int>(0, count - 1)(engine_);
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace oneshot
