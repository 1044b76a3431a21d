#pragma once

#include "memgeom/data.hpp"
#include "memgeom/denoise.hpp"
#include "memgeom/stats.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace memgeom {

inline constexpr double kDefaultShellC = 5.0;

/// Radii of the shell holding ||Z|| for Z ~ N(0, I_d) with probability >= 1 - 2 e^{-c}.
struct ShellSpec {
  Index dim = 0;
  double c = kDefaultShellC;
  double r_in = 0.0;
  double r_out = 0.0;
  /// Set when d - 2 sqrt(c d) < 0 and the inner radius was clamped to 0.
  bool degenerate = false;

  double guaranteed_mass() const;
  bool contains(double norm) const { return norm >= r_in && norm <= r_out; }
  bool contains_squared(double sq) const { return sq >= r_in * r_in && sq <= r_out * r_out; }
};

ShellSpec shell_radii(Index d, double c);

/// Draws of Z ~ N(0, I_d) reduced to what shell tests need: the first coordinate and
/// ||Z||^2 - Z_1^2, which is chi-squared with d - 1 degrees of freedom.
class ShellSampleBank {
 public:
  ShellSampleBank(Index dim, std::size_t n_samples, std::uint64_t seed);

  std::size_t size() const { return first_.size(); }
  Index dim() const { return dim_; }
  double first(std::size_t i) const { return first_[i]; }
  double rest(std::size_t i) const { return rest_[i]; }
  double norm_squared(std::size_t i) const { return first_[i] * first_[i] + rest_[i]; }

 private:
  Index dim_;
  std::vector<double> first_;
  std::vector<double> rest_;
};

MeanEstimate shell_membership_rate(const ShellSpec& spec, const ShellSampleBank& bank);
MeanEstimate shell_membership_rate(const ShellSpec& spec, std::size_t n_samples, std::uint64_t seed);

struct PhiEstimate {
  double t = 0.0;
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
};

/// Phi(t) = P(||Z|| in shell and ||Z + t e1|| in shell).
PhiEstimate phi(const ShellSpec& spec, const ShellSampleBank& bank, double t);
PhiEstimate phi(const ShellSpec& spec, double t, std::size_t n_samples, std::uint64_t seed);

/// Phi on t = 0 plus log-spaced knots over [1e-3, 2 r_out], all from one sample bank.
/// Lookups interpolate linearly in log t (linearly on the first segment), return 0 beyond
/// 2 r_out, and refuse negative arguments.
class PhiTable {
 public:
  static constexpr std::size_t kDefaultKnots = 120;
  static constexpr double kFirstKnot = 1e-3;

  PhiTable(const ShellSpec& spec, const ShellSampleBank& bank, std::size_t knots = kDefaultKnots);
  explicit PhiTable(std::vector<PhiEstimate> entries);

  const std::vector<PhiEstimate>& entries() const { return entries_; }
  double t_max() const { return entries_.back().t; }

  /// Interpolated value and standard error.
  PhiEstimate operator()(double t) const;

  void write_csv(const std::filesystem::path& path, const std::vector<std::string>& comments = {}) const;
  static PhiTable read_csv(const std::filesystem::path& path);

 private:
  std::vector<PhiEstimate> entries_;
};

/// Fraction of (test point, noise) pairs whose noisy point lies in some training shell.
/// Noise for test row j comes from stream j, so curves over sigma share random numbers.
MeanEstimate coverage(const Dataset& dataset, const ShellSpec& spec, const Dataset& test_points, double sigma, std::size_t n_noise,
                      std::uint64_t seed);

struct CoverageBounds {
  double lower = 0.0;
  double lower_std_error = 0.0;
  /// min(1, upper_raw)
  double upper = 0.0;
  double upper_raw = 0.0;
  double upper_std_error = 0.0;
  std::size_t n_pairs = 0;
};

inline constexpr std::size_t kDefaultMaxPairs = 1'000'000;

/// lower = mean over test X of Phi(d_1NN(X) / sigma);
/// upper = 2 e^{-c} + N * mean over (test X, training x_i) of Phi(||X - x_i|| / sigma).
/// Pairs are subsampled with the seed only when there are more than max_pairs.
CoverageBounds coverage_bounds(const Dataset& dataset, const ShellSpec& spec, const Dataset& test_points, double sigma,
                               const PhiTable& table, std::uint64_t seed, std::size_t max_pairs = kDefaultMaxPairs);

/// Smallest signed distance of the coverage estimate inside [lower, upper], each side widened by
/// k combined standard errors. The coverage standard error is at least the Bernoulli one at the
/// bound being tested, so an estimate with no hits still has a nonzero width.
double sandwich_margin(const MeanEstimate& coverage, const CoverageBounds& bounds, double k = 4.0);

/// Below this sigma every pair of training shells is disjoint.
double disjointness_sigma(const Dataset& dataset, const ShellSpec& spec);
bool shells_intersect(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b, double sigma, const ShellSpec& spec);

enum class ShellNoise { uniform_annulus, gaussian };

/// Z uniform on {r_in <= ||z|| <= r_out}.
Vector sample_uniform_annulus(const ShellSpec& spec, StreamRng& rng);
/// E ||Z||^2 for Z uniform on the annulus.
double annulus_second_moment(const ShellSpec& spec);

/// E over (i uniform, Z) of ||m(x_i + sigma Z) - x_i||^2.
MeanEstimate shell_only_loss(const Dataset& dataset, const ShellSpec& spec, const DenoiseFn& denoiser, double sigma,
                             std::size_t n_samples, std::uint64_t seed, ShellNoise noise = ShellNoise::uniform_annulus);
MeanEstimate shell_only_loss(const Dataset& dataset, const ShellSpec& spec, const DenoiserSpec& denoiser, double sigma,
                             std::size_t n_samples, std::uint64_t seed, ShellNoise noise = ShellNoise::uniform_annulus);

/// Maps x to its nearest training row.
DenoiseFn nearest_center_projector(DatasetPtr dataset);
/// Maps x to x_i when x lies in shell_sigma(x_i) and leaves it unchanged elsewhere.
DenoiseFn shell_projector(DatasetPtr dataset, ShellSpec spec);

}  // namespace memgeom
