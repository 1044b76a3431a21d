#include "memgeom/sampler.hpp"

#include "memgeom/parallel.hpp"
#include "memgeom/random.hpp"

#include <cmath>

namespace memgeom {

Integrator parse_integrator(const std::string& name) {
  if (name == "euler") return Integrator::euler;
  if (name == "heun") return Integrator::heun;
  throw InputError("unknown integrator '" + name + "' (expected euler or heun)");
}

std::string to_string(Integrator method) { return method == Integrator::euler ? "euler" : "heun"; }

Trajectory integrate_from(const DenoiserSpec& denoiser, const NoiseSchedule& schedule, const Eigen::Ref<const Vector>& x_start,
                          IntegrateOptions options) {
  require(x_start.size() == denoiser.dim(), "starting state dimension does not match denoiser");
  const auto& sig = schedule.sigmas();
  const std::size_t steps = sig.size();
  Trajectory traj{schedule, RowMatrix<double>(static_cast<Index>(steps), x_start.size())};
  Vector x = x_start;
  traj.states.row(0) = x.transpose();
  auto slope = [&](const Vector& state, double sigma) -> Vector { return (state - denoise(denoiser, state, sigma)) / sigma; };
  for (std::size_t i = 0; i + 1 < steps; ++i) {
    const double h = sig[i + 1] - sig[i];
    const Vector d0 = slope(x, sig[i]);
    Vector next = x + h * d0;
    const bool last = i + 2 == steps;
    if (options.method == Integrator::heun && !(last && options.euler_last_step)) {
      const Vector d1 = slope(next, sig[i + 1]);
      next = x + (0.5 * h) * (d0 + d1);
    }
    if (!next.allFinite()) throw NumericalError("non-finite state at integration step " + std::to_string(i + 1));
    x = std::move(next);
    traj.states.row(static_cast<Index>(i + 1)) = x.transpose();
  }
  return traj;
}

Trajectory integrate(const DenoiserSpec& denoiser, const NoiseSchedule& schedule, const Eigen::Ref<const Vector>& z,
                     IntegrateOptions options) {
  return integrate_from(denoiser, schedule, schedule.sigma_max() * z, options);
}

MemorizationReport memorization_report(const Dataset& dataset, const RowMatrix<double>& points, double ratio) {
  require(dataset.n_points() >= 2, "memorization criterion needs at least two training rows");
  require(ratio > 0.0, "memorization ratio must be positive");
  MemorizationReport r;
  r.ratio = ratio;
  r.n_samples = static_cast<std::size_t>(points.rows());
  r.records.resize(r.n_samples);
  parallel_for(r.n_samples, [&](std::size_t s) {
    const auto nn = nearest_two(dataset, points.row(static_cast<Index>(s)).transpose());
    r.records[s] = {nn.d1, nn.d2, nn.i1, is_memorized(nn.d1, nn.d2, ratio)};
  });
  for (const auto& rec : r.records) {
    r.n_memorized += rec.flag ? 1 : 0;
    r.n_ties += rec.d1 == rec.d2 ? 1 : 0;
  }
  r.rate = r.n_samples ? static_cast<double>(r.n_memorized) / static_cast<double>(r.n_samples) : 0.0;
  return r;
}

RowMatrix<double> sample_terminals(const DenoiserSpec& denoiser, const NoiseSchedule& schedule, std::size_t n_samples,
                                   std::uint64_t seed, IntegrateOptions options) {
  require(n_samples >= 1, "need at least one sample");
  const Index d = denoiser.dim();
  RowMatrix<double> out(static_cast<Index>(n_samples), d);
  parallel_for(n_samples, [&](std::size_t s) {
    StreamRng rng(seed, salt::kTrajectory, s);
    const Vector z = rng.normal_vector(d);
    out.row(static_cast<Index>(s)) = integrate(denoiser, schedule, z, options).terminal().transpose();
  });
  return out;
}

MemorizationReport trajectory_memorization(const DenoiserSpec& denoiser, const Dataset& dataset, const NoiseSchedule& schedule,
                                           std::size_t n_samples, std::uint64_t seed, IntegrateOptions options, double ratio) {
  require(denoiser.dim() == dataset.dim(), "denoiser and dataset dimensions differ");
  return memorization_report(dataset, sample_terminals(denoiser, schedule, n_samples, seed, options), ratio);
}

MemorizationReport per_noise_memorization(const DenoiserSpec& denoiser, const Dataset& dataset, const Dataset& test_points,
                                          double sigma, std::size_t n_noise, std::uint64_t seed, double ratio) {
  require(dataset.n_points() >= 2, "per-noise memorization needs at least two training rows");
  require(test_points.dim() == dataset.dim() && denoiser.dim() == dataset.dim(), "dimension mismatch");
  require(n_noise >= 1, "need at least one noise draw");
  require(sigma > 0.0 && std::isfinite(sigma), "sigma must be positive");
  const auto n_test = static_cast<std::size_t>(test_points.n_points());
  RowMatrix<double> outputs(static_cast<Index>(n_test * n_noise), dataset.dim());
  parallel_for(n_test, [&](std::size_t j) {
    StreamRng rng(seed, salt::kPerNoise, j);
    const Vector x = test_points.row(static_cast<Index>(j)).transpose();
    for (std::size_t k = 0; k < n_noise; ++k) {
      const Vector noisy = x + sigma * rng.normal_vector(x.size());
      outputs.row(static_cast<Index>(j * n_noise + k)) = denoise(denoiser, noisy, sigma).transpose();
    }
  });
  auto report = memorization_report(dataset, outputs, ratio);
  for (Index j = 0; j < test_points.n_points() && !report.test_overlap; ++j) {
    for (Index i = 0; i < dataset.n_points(); ++i) {
      if (test_points.row(j) == dataset.row(i)) {
        report.test_overlap = true;
        break;
      }
    }
  }
  return report;
}

DenoiserPtr swap_composite(DenoiserPtr base, DenoiserPtr insert, double sigma_lo, double sigma_hi, const NoiseSchedule& schedule) {
  require(base && insert, "swap needs both denoisers");
  require(schedule.sigma_min() <= sigma_lo && sigma_lo < sigma_hi && sigma_hi <= schedule.sigma_max(),
          "swap band must satisfy sigma_min <= lo < hi <= sigma_max");
  std::vector<NoiseBand> bands;
  if (sigma_hi < schedule.sigma_max()) bands.push_back({sigma_hi, schedule.sigma_max(), base});
  bands.push_back({sigma_lo, sigma_hi, insert});
  if (sigma_lo > schedule.sigma_min()) bands.push_back({schedule.sigma_min(), sigma_lo, base});
  return make_composite(std::move(bands));
}

SwapResult swap_experiment(DenoiserPtr base, DenoiserPtr insert, double sigma_lo, double sigma_hi, const Dataset& dataset,
                           const NoiseSchedule& schedule, std::size_t n_samples, std::uint64_t seed, IntegrateOptions options,
                           double ratio) {
  SwapResult out;
  out.composite = swap_composite(base, insert, sigma_lo, sigma_hi, schedule);
  out.baseline = trajectory_memorization(*base, dataset, schedule, n_samples, seed, options, ratio);
  out.swapped = trajectory_memorization(*out.composite, dataset, schedule, n_samples, seed, options, ratio);
  return out;
}

}  // namespace memgeom
