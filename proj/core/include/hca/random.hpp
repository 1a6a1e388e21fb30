#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace hca {

/// Philox4x32 with 10 rounds (Salmon et al., "Parallel random numbers: as
/// easy as 1, 2, 3"). A keyed bijection of a 128-bit counter; every draw is
/// addressed by its counter so streams need no shared state.
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key);

/// Uniform double in [0, 1) from 64 random bits (top 53 bits used).
double to_unit_double(std::uint32_t hi, std::uint32_t lo);

/// Two uniforms addressed by (seed, trajectory index, step index).
struct StepUniforms {
  double action;
  double transition;
};

StepUniforms step_uniforms(std::uint64_t seed, std::uint64_t trajectory, std::uint32_t step);

/// Sequential uniform stream for generators; draw n is counter (n, stream).
class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t seed, std::uint64_t stream);

  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  PhiloxKey key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  PhiloxCounter block_{};
  int lane_ = 2;  // lanes consumed in pairs; 2 == block exhausted
};

/// Index of the category selected by u in [0, 1) given probabilities that
/// sum to one. Never returns a zero-probability category.
int sample_categorical(std::span<const double> probs, double u);

}  // namespace hca
