#pragma once

#include "memgeom/core.hpp"

#include <vector>

namespace memgeom {

/// Strictly decreasing sampling knots, sigma_max first and sigma_min last.
class NoiseSchedule {
 public:
  NoiseSchedule(std::vector<double> sigmas, double rho);

  const std::vector<double>& sigmas() const& { return sigmas_; }
  const std::vector<double>& sigmas() const&& = delete;
  double sigma_max() const { return sigmas_.front(); }
  double sigma_min() const { return sigmas_.back(); }
  std::size_t n_steps() const { return sigmas_.size(); }
  double rho() const { return rho_; }
  double operator[](std::size_t i) const { return sigmas_[i]; }

  /// Knots i..j inclusive, as a schedule of its own.
  NoiseSchedule segment(std::size_t first, std::size_t last) const;

 private:
  std::vector<double> sigmas_;
  double rho_;
};

inline constexpr double kEdmSigmaMax = 80.0;
inline constexpr double kEdmSigmaMin = 0.002;
inline constexpr int kEdmSteps = 18;
inline constexpr double kEdmRho = 7.0;

/// sigma_i = (smax^(1/rho) + i/(N-1) (smin^(1/rho) - smax^(1/rho)))^rho, endpoints exact.
NoiseSchedule edm_schedule(double sigma_max = kEdmSigmaMax, double sigma_min = kEdmSigmaMin, int n_steps = kEdmSteps,
                           double rho = kEdmRho);

/// Log-uniform evaluation grid, increasing, endpoints exact.
class SigmaGrid {
 public:
  static SigmaGrid log_uniform(double lo, double hi, int points);
  explicit SigmaGrid(std::vector<double> sigmas);

  const std::vector<double>& sigmas() const& { return sigmas_; }
  const std::vector<double>& sigmas() const&& = delete;
  std::size_t size() const { return sigmas_.size(); }
  double operator[](std::size_t i) const { return sigmas_[i]; }
  double lo() const { return sigmas_.front(); }
  double hi() const { return sigmas_.back(); }

 private:
  std::vector<double> sigmas_;
};

double sigma_to_t(double sigma);
double t_to_sigma(double t);

}  // namespace memgeom
