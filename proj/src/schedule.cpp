#include "memgeom/schedule.hpp"

#include <cmath>

namespace memgeom {

NoiseSchedule::NoiseSchedule(std::vector<double> sigmas, double rho) : sigmas_(std::move(sigmas)), rho_(rho) {
  require(sigmas_.size() >= 2, "schedule needs at least two knots");
  for (std::size_t i = 0; i < sigmas_.size(); ++i) {
    require(std::isfinite(sigmas_[i]) && sigmas_[i] > 0.0, "schedule knots must be positive and finite");
    if (i > 0) require(sigmas_[i] < sigmas_[i - 1], "schedule knots must be strictly decreasing");
  }
}

NoiseSchedule NoiseSchedule::segment(std::size_t first, std::size_t last) const {
  require(first < last && last < sigmas_.size(), "invalid schedule segment");
  return NoiseSchedule(std::vector<double>(sigmas_.begin() + static_cast<std::ptrdiff_t>(first),
                                           sigmas_.begin() + static_cast<std::ptrdiff_t>(last) + 1),
                       rho_);
}

NoiseSchedule edm_schedule(double sigma_max, double sigma_min, int n_steps, double rho) {
  require(sigma_min > 0.0 && sigma_max > sigma_min, "schedule needs sigma_max > sigma_min > 0");
  require(n_steps >= 2, "schedule needs at least two steps");
  require(rho > 0.0, "schedule exponent rho must be positive");
  const double a = std::pow(sigma_max, 1.0 / rho);
  const double b = std::pow(sigma_min, 1.0 / rho);
  std::vector<double> sigmas(static_cast<std::size_t>(n_steps));
  for (int i = 0; i < n_steps; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(n_steps - 1);
    sigmas[static_cast<std::size_t>(i)] = std::pow(a + frac * (b - a), rho);
  }
  sigmas.front() = sigma_max;
  sigmas.back() = sigma_min;
  return NoiseSchedule(std::move(sigmas), rho);
}

SigmaGrid::SigmaGrid(std::vector<double> sigmas) : sigmas_(std::move(sigmas)) {
  require(!sigmas_.empty(), "sigma grid is empty");
  for (std::size_t i = 0; i < sigmas_.size(); ++i) {
    require(std::isfinite(sigmas_[i]) && sigmas_[i] > 0.0, "sigma grid entries must be positive and finite");
    if (i > 0) require(sigmas_[i] > sigmas_[i - 1], "sigma grid must be strictly increasing");
  }
}

SigmaGrid SigmaGrid::log_uniform(double lo, double hi, int points) {
  require(lo > 0.0 && hi > lo, "sigma grid needs 0 < lo < hi");
  require(points >= 2, "sigma grid needs at least two points");
  std::vector<double> s(static_cast<std::size_t>(points));
  const double llo = std::log(lo);
  const double step = (std::log(hi) - llo) / (points - 1);
  for (int i = 0; i < points; ++i) s[static_cast<std::size_t>(i)] = std::exp(llo + step * i);
  s.front() = lo;
  s.back() = hi;
  return SigmaGrid(std::move(s));
}

double sigma_to_t(double sigma) {
  require(std::isfinite(sigma) && sigma > 0.0, "sigma must be positive");
  return 1.0 / (1.0 + sigma);
}

double t_to_sigma(double t) {
  require(t > 0.0 && t < 1.0, "t must lie in (0, 1)");
  return (1.0 - t) / t;
}

}  // namespace memgeom
