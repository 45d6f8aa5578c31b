#pragma once

#include "types.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>

namespace physdiff {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z)
{
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based generator: draw k of a stream is mix64(key + (k + 1) * golden).
///
/// The stream is a pure function of (key, counter), so results are identical on
/// every platform. Normals use Box-Muller on top of the uniform stream rather
/// than std::normal_distribution, whose algorithm is implementation-defined.
class Rng
{
public:
  explicit Rng(std::uint64_t seed = 0)
    : key_(mix64(seed ^ 0x6A09E667F3BCC909ULL))
  {
  }

  std::uint64_t next_u64()
  {
    ++counter_;
    return mix64(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] (inclusive).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi)
  {
    auto const span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next_u64() % span);
  }

  double normal()
  {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double const u2 = uniform();
    double const r = std::sqrt(-2.0 * std::log(u1));
    double const a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  Tensor normal_tensor(Index rows, Index cols)
  {
    Tensor t(rows, cols);
    for (Index i = 0; i < t.size(); ++i) {
      t.data()[i] = normal();
    }
    return t;
  }

  /// Independent child stream, e.g. one per ensemble member or per track.
  Rng derive(std::uint64_t stream) const
  {
    Rng child;
    child.key_ = mix64(key_ ^ mix64(stream + 0xD1B54A32D192ED03ULL));
    return child;
  }

private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

} // namespace physdiff
