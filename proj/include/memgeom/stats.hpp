#pragma once

#include "memgeom/parallel.hpp"
#include "memgeom/random.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace memgeom {

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

/// Welford accumulator; merge() uses the Chan et al. pairwise update so that merging
/// block partials in a fixed order is reproducible.
class RunningMoments {
 public:
  void add(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }

  void merge(const RunningMoments& other) {
    if (other.n_ == 0) return;
    if (n_ == 0) {
      *this = other;
      return;
    }
    const double n = static_cast<double>(n_ + other.n_);
    const double delta = other.mean_ - mean_;
    mean_ += delta * static_cast<double>(other.n_) / n;
    m2_ += other.m2_ + delta * delta * static_cast<double>(n_) * static_cast<double>(other.n_) / n;
    n_ += other.n_;
  }

  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }

  MeanEstimate estimate() const {
    return {mean_, n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0, n_};
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

inline constexpr std::size_t kMonteCarloBlock = 1024;

/// Mean of sample(rng, i) over i in [0, n). Samples are grouped in fixed blocks, each with
/// its own stream, so the result does not depend on the worker count.
template <typename SampleFn>
RunningMoments monte_carlo(std::size_t n, std::uint64_t seed, std::uint64_t salt, SampleFn&& sample) {
  const std::size_t blocks = (n + kMonteCarloBlock - 1) / kMonteCarloBlock;
  std::vector<RunningMoments> partial(blocks);
  parallel_for(blocks, [&](std::size_t b) {
    StreamRng rng(seed, salt, b);
    const std::size_t end = std::min(n, (b + 1) * kMonteCarloBlock);
    for (std::size_t i = b * kMonteCarloBlock; i < end; ++i) partial[b].add(sample(rng, i));
  });
  RunningMoments total;
  for (const auto& p : partial) total.merge(p);
  return total;
}

}  // namespace memgeom
