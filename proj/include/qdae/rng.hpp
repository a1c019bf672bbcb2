#pragma once

#include <cstdint>
#include <vector>

namespace qdae {

// Counter-based generator (splitmix64 core). All state transitions are exact
// 64-bit integer arithmetic, so a given (seed, stream) pair produces the same
// sequence on every platform. Distinct streams derived from one seed are
// independent for practical purposes and can be handed to parallel workers.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0)
      : state_(mix(seed ^ mix(stream + 0x9E3779B97F4A7C15ull))) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix(state_);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  float uniform_float(float lo, float hi) {
    return static_cast<float>(uniform(lo, hi));
  }

  // Uniform integer in [0, n). Modulo bias is < n / 2^64, irrelevant here.
  std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

  // Approximate standard normal as a sum of 12 uniforms. Chosen over
  // Box-Muller because it involves no libm calls, keeping the sample
  // bit-identical across platforms.
  double normal() {
    double s = 0.0;
    for (int i = 0; i < 12; ++i) s += uniform();
    return s - 6.0;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t state_;
};

// Fixed stream ids so every stage of the pipeline draws from its own
// deterministic sub-sequence of the run seed.
namespace rng_stream {
inline constexpr std::uint64_t kModelInit = 1;
inline constexpr std::uint64_t kTeacherInit = 2;
inline constexpr std::uint64_t kShuffleBase = 1000;       // + epoch
inline constexpr std::uint64_t kClipBase = 1u << 24;      // + global clip index
}  // namespace rng_stream

}  // namespace qdae
