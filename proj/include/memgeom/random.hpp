#pragma once

#include "memgeom/core.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace memgeom {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Salts keep estimators that share a user seed on disjoint streams.
namespace salt {
inline constexpr std::uint64_t kSynthesize = 0x11;
inline constexpr std::uint64_t kShellBank = 0x21;
inline constexpr std::uint64_t kCoverage = 0x22;
inline constexpr std::uint64_t kPairs = 0x23;
inline constexpr std::uint64_t kShellLoss = 0x24;
inline constexpr std::uint64_t kWeightBase = 0x31;
inline constexpr std::uint64_t kWeightNoise = 0x32;
inline constexpr std::uint64_t kThresholds = 0x33;
inline constexpr std::uint64_t kCosine = 0x34;
inline constexpr std::uint64_t kDenoiseMse = 0x41;
inline constexpr std::uint64_t kExcess = 0x42;
inline constexpr std::uint64_t kTrajectory = 0x51;
inline constexpr std::uint64_t kPerNoise = 0x52;
inline constexpr std::uint64_t kHoldout = 0x61;
inline constexpr std::uint64_t kTestDraw = 0x62;
inline constexpr std::uint64_t kPointPick = 0x63;
}  // namespace salt

/// Random stream identified by (seed, salt, stream). Any estimator that splits its work
/// over stream ids produces the same numbers no matter how the streams are scheduled.
class StreamRng {
 public:
  StreamRng(std::uint64_t seed, std::uint64_t salt, std::uint64_t stream)
      : engine_(splitmix64(splitmix64(seed ^ splitmix64(salt)) + splitmix64(stream + 0x632be59bd9b4e019ULL))) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  /// Uniform on [0, n).
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }

  double chi_squared(double dof) { return std::chi_squared_distribution<double>(dof)(engine_); }

  Vector normal_vector(Index d) {
    Vector z(d);
    for (Index k = 0; k < d; ++k) z[k] = normal();
    return z;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// First `k` entries of a seeded permutation of 0..n-1 (sampling without replacement).
inline std::vector<Index> sample_without_replacement(Index n, Index k, std::uint64_t seed, std::uint64_t salt) {
  require(k >= 0 && k <= n, "cannot draw more items than available without replacement");
  std::vector<Index> perm(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  StreamRng rng(seed, salt, 0);
  for (Index i = 0; i < k; ++i) {
    const auto j = i + static_cast<Index>(rng.index(static_cast<std::size_t>(n - i)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  perm.resize(static_cast<std::size_t>(k));
  return perm;
}

}  // namespace memgeom
