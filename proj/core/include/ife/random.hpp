#pragma once

#include <cstdint>
#include <random>

namespace ife {

/// Deterministic random stream. The engine sequence is fixed by the C++
/// standard and the variate transforms below are explicit, so a given seed
/// produces the same draws on every conforming platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream keyed by (seed, stream), e.g. one per MC repetition.
  static Rng for_stream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  /// Sum of `dof` squared standard normals.
  double chi_square(int dof);
  /// Normal / sqrt(chi-square / dof).
  double student_t(int dof);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finaliser applied to (seed, stream).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

}  // namespace ife
