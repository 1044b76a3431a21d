#include "memgeom/regime.hpp"

#include "memgeom/concentration.hpp"
#include "memgeom/parallel.hpp"

#include <cmath>
#include <fstream>

namespace memgeom {

RegimeReport assemble_regime(DiagnosticCurve coverage_curve, DiagnosticCurve weight_curve, RegimeThresholds thresholds) {
  require(coverage_curve.points.size() == weight_curve.points.size(), "regime curves differ in length");
  for (std::size_t k = 0; k < coverage_curve.points.size(); ++k)
    require(coverage_curve.points[k].sigma == weight_curve.points[k].sigma, "regime curves must share their sigma grid");
  RegimeReport r{std::move(coverage_curve), std::move(weight_curve), std::nullopt, std::nullopt, std::nullopt, thresholds};
  const auto& c = r.coverage_curve.points;
  const auto& w = r.weight_curve.points;

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < c.size(); ++k) {
    if (c[k].value > kCrossingFloor && w[k].value > kCrossingFloor) {
      const double gap = std::abs(c[k].value - w[k].value);
      if (gap < best) {
        best = gap;
        r.crossing_sigma = c[k].sigma;
      }
    }
  }

  std::size_t run_start = 0, best_len = 0, best_start = 0;
  for (std::size_t k = 0; k <= c.size(); ++k) {
    const bool inside = k < c.size() && c[k].value >= thresholds.coverage && w[k].value >= thresholds.weight;
    if (inside) {
      if (k == 0 || !(c[k - 1].value >= thresholds.coverage && w[k - 1].value >= thresholds.weight)) run_start = k;
      continue;
    }
    if (k > 0 && c[k - 1].value >= thresholds.coverage && w[k - 1].value >= thresholds.weight) {
      const std::size_t len = k - run_start;
      if (len > best_len) {
        best_len = len;
        best_start = run_start;
      }
    }
  }
  if (best_len > 0) {
    const std::size_t last = best_start + best_len - 1;
    r.zone_knots = std::make_pair(best_start, last);
    r.danger_zone = SigmaInterval{c[best_start].sigma, c[last].sigma};
  }
  return r;
}

DiagnosticCurve coverage_curve(const Dataset& dataset, const ShellSpec& spec, const Dataset& test_points, const SigmaGrid& grid,
                               std::size_t n_noise, std::uint64_t seed) {
  DiagnosticCurve curve{"coverage", {}};
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto est = coverage(dataset, spec, test_points, grid[k], n_noise, seed);
    curve.points.push_back({grid[k], est.mean, est.std_error, est.n});
  }
  return curve;
}

RegimeReport regime_report(const Dataset& dataset, const Dataset& test_points, const ShellSpec& spec, const SigmaGrid& grid,
                           RegimeSampling sampling, RegimeThresholds thresholds, std::uint64_t seed) {
  auto cov = coverage_curve(dataset, spec, test_points, grid, sampling.coverage_noise, seed);
  auto weight = w_sigma_curve(dataset, grid, std::min(sampling.weight_base, dataset.n_points()), sampling.weight_noise, seed);
  return assemble_regime(std::move(cov), std::move(weight), thresholds);
}

GapMask gap_mask(SigmaInterval zone, double buffer, const NoiseSchedule& schedule) {
  require(buffer >= 0.0 && std::isfinite(buffer), "gap buffer must be nonnegative");
  require(zone.lo > 0.0 && zone.lo <= zone.hi, "danger zone needs 0 < lo <= hi");
  const double lo = std::max(zone.lo / (1.0 + buffer), schedule.sigma_min());
  const double hi = std::min(zone.hi * (1.0 + buffer), schedule.sigma_max());
  GapMask mask;
  if (lo > hi) return mask;
  mask.gap = SigmaInterval{lo, hi};
  const auto& sig = schedule.sigmas();
  for (std::size_t i = 0; i < sig.size(); ++i) {
    if (mask.weight(sig[i]) == 0.0) {
      mask.excluded_steps.push_back(i);
      mask.excluded_sigmas.push_back(sig[i]);
    }
  }
  return mask;
}

GapMask gap_mask(const RegimeReport& report, double buffer, const NoiseSchedule& schedule) {
  if (!report.danger_zone) throw InputError("regime report has no danger zone");
  return gap_mask(*report.danger_zone, buffer, schedule);
}

void write_gap_weights_csv(const std::filesystem::path& path, const GapMask& mask, const SigmaGrid& grid,
                           const std::vector<std::string>& comments) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "sigma,weight\n";
  for (const double s : grid.sigmas()) out << format_double(s) << ',' << format_double(mask.weight(s)) << '\n';
}

}  // namespace memgeom
