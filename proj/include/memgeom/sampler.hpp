#pragma once

#include "memgeom/data.hpp"
#include "memgeom/denoise.hpp"
#include "memgeom/schedule.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace memgeom {

enum class Integrator { euler, heun };

Integrator parse_integrator(const std::string& name);
std::string to_string(Integrator method);

struct IntegrateOptions {
  Integrator method = Integrator::heun;
  /// Heun only: take a plain Euler step on the last interval.
  bool euler_last_step = true;
};

struct Trajectory {
  NoiseSchedule schedule;
  /// One row per schedule knot; row 0 is the starting state.
  RowMatrix<double> states;

  Vector terminal() const { return states.row(states.rows() - 1).transpose(); }
};

/// Integrates dx/dsigma = -(m(x, sigma) - x) / sigma from schedule[0] down to schedule[last],
/// starting at x_start. Throws NumericalError naming the step when a state becomes non-finite.
Trajectory integrate_from(const DenoiserSpec& denoiser, const NoiseSchedule& schedule, const Eigen::Ref<const Vector>& x_start,
                          IntegrateOptions options = {});

/// Starts at sigma_max * z.
Trajectory integrate(const DenoiserSpec& denoiser, const NoiseSchedule& schedule, const Eigen::Ref<const Vector>& z,
                     IntegrateOptions options = {});

/// Memorized when d_1NN < d_2NN / ratio.
inline constexpr double kMemorizationRatio = 3.0;

inline bool is_memorized(double d1, double d2, double ratio = kMemorizationRatio) { return d1 < d2 / ratio; }

struct MemorizationRecord {
  double d1 = 0.0;
  double d2 = 0.0;
  Index nearest = -1;
  bool flag = false;
};

struct MemorizationReport {
  std::size_t n_samples = 0;
  std::size_t n_memorized = 0;
  double rate = 0.0;
  double ratio = kMemorizationRatio;
  /// Samples whose two nearest distances tie (duplicate rows).
  std::size_t n_ties = 0;
  /// Per-noise runs: some test row equals a training row.
  bool test_overlap = false;
  std::vector<MemorizationRecord> records;
};

MemorizationReport memorization_report(const Dataset& dataset, const RowMatrix<double>& points, double ratio = kMemorizationRatio);

/// Terminal states of n_samples trajectories; sample s starts from noise stream s.
RowMatrix<double> sample_terminals(const DenoiserSpec& denoiser, const NoiseSchedule& schedule, std::size_t n_samples,
                                   std::uint64_t seed, IntegrateOptions options = {});

MemorizationReport trajectory_memorization(const DenoiserSpec& denoiser, const Dataset& dataset, const NoiseSchedule& schedule,
                                           std::size_t n_samples, std::uint64_t seed, IntegrateOptions options = {},
                                           double ratio = kMemorizationRatio);

/// Criterion applied to m(x + sigma z) for every test row and n_noise draws.
MemorizationReport per_noise_memorization(const DenoiserSpec& denoiser, const Dataset& dataset, const Dataset& test_points,
                                          double sigma, std::size_t n_noise, std::uint64_t seed,
                                          double ratio = kMemorizationRatio);

/// Composite using `base` outside [sigma_lo, sigma_hi) and `insert` inside, over the schedule range.
DenoiserPtr swap_composite(DenoiserPtr base, DenoiserPtr insert, double sigma_lo, double sigma_hi, const NoiseSchedule& schedule);

struct SwapResult {
  MemorizationReport baseline;
  MemorizationReport swapped;
  DenoiserPtr composite;
};

SwapResult swap_experiment(DenoiserPtr base, DenoiserPtr insert, double sigma_lo, double sigma_hi, const Dataset& dataset,
                           const NoiseSchedule& schedule, std::size_t n_samples, std::uint64_t seed, IntegrateOptions options = {},
                           double ratio = kMemorizationRatio);

/// The medium band of the swap protocol, before scaling.
inline constexpr double kMediumBandLo = 0.14;
inline constexpr double kMediumBandHi = 8.4;

}  // namespace memgeom
