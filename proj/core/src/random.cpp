#include "hca/random.hpp"

#include "hca/errors.hpp"

namespace hca {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

// Domain tag in the last counter word so generator streams never collide
// with trajectory sampling draws under the same seed.
constexpr std::uint32_t kStreamDomain = 0x5EED0001u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

inline PhiloxKey split(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

}  // namespace

PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

double to_unit_double(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

StepUniforms step_uniforms(std::uint64_t seed, std::uint64_t trajectory, std::uint32_t step) {
  const PhiloxCounter ctr{static_cast<std::uint32_t>(trajectory), static_cast<std::uint32_t>(trajectory >> 32),
                          step, 0u};
  const PhiloxCounter out = philox4x32_10(ctr, split(seed));
  return {to_unit_double(out[0], out[1]), to_unit_double(out[2], out[3])};
}

PhiloxStream::PhiloxStream(std::uint64_t seed, std::uint64_t stream) : key_(split(seed)), stream_(stream) {}

double PhiloxStream::uniform() {
  if (lane_ == 2) {
    const PhiloxCounter ctr{static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                            static_cast<std::uint32_t>(stream_), kStreamDomain ^ static_cast<std::uint32_t>(stream_ >> 32)};
    block_ = philox4x32_10(ctr, key_);
    ++counter_;
    lane_ = 0;
  }
  const double u = to_unit_double(block_[2 * lane_], block_[2 * lane_ + 1]);
  ++lane_;
  return u;
}

std::uint64_t PhiloxStream::below(std::uint64_t n) {
  if (n == 0) throw InvalidArgument("PhiloxStream::below requires n > 0");
  const auto r = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
  return r < n ? r : n - 1;
}

int sample_categorical(std::span<const double> probs, double u) {
  double cumulative = 0.0;
  int last_positive = -1;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = static_cast<int>(i);
    cumulative += probs[i];
    if (u < cumulative) return last_positive;
  }
  if (last_positive < 0) throw InvalidArgument("categorical distribution has no positive mass");
  return last_positive;
}

}  // namespace hca
