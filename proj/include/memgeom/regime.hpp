#pragma once

#include "memgeom/curve.hpp"
#include "memgeom/data.hpp"
#include "memgeom/schedule.hpp"
#include "memgeom/shells.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

namespace memgeom {

struct RegimeThresholds {
  double coverage = 0.5;
  double weight = 0.5;
};

/// Both curves must exceed this for a knot to count toward the crossing.
inline constexpr double kCrossingFloor = 0.1;

struct SigmaInterval {
  double lo = 0.0;
  double hi = 0.0;
};

struct RegimeReport {
  DiagnosticCurve coverage_curve;
  DiagnosticCurve weight_curve;
  std::optional<double> crossing_sigma;
  std::optional<SigmaInterval> danger_zone;
  /// Knot indices [first, last] of the zone on the shared grid.
  std::optional<std::pair<std::size_t, std::size_t>> zone_knots;
  RegimeThresholds thresholds;
};

/// Crossing: knot minimizing |C - W| among knots where both exceed kCrossingFloor.
/// Danger zone: longest contiguous knot run with C >= tau_cov and W >= tau_w (the lower-sigma
/// run wins ties). The curves must share their sigma column.
RegimeReport assemble_regime(DiagnosticCurve coverage_curve, DiagnosticCurve weight_curve, RegimeThresholds thresholds = {});

struct RegimeSampling {
  std::size_t coverage_noise = 64;
  Index weight_base = 100;
  std::size_t weight_noise = 400;
};

DiagnosticCurve coverage_curve(const Dataset& dataset, const ShellSpec& spec, const Dataset& test_points, const SigmaGrid& grid,
                               std::size_t n_noise, std::uint64_t seed);

RegimeReport regime_report(const Dataset& dataset, const Dataset& test_points, const ShellSpec& spec, const SigmaGrid& grid,
                           RegimeSampling sampling, RegimeThresholds thresholds, std::uint64_t seed);

/// Training-weight mask zeroing a closed sigma interval.
struct GapMask {
  /// Empty when the inflated zone misses the schedule range entirely.
  std::optional<SigmaInterval> gap;
  std::vector<std::size_t> excluded_steps;
  std::vector<double> excluded_sigmas;

  double weight(double sigma) const { return gap && sigma >= gap->lo && sigma <= gap->hi ? 0.0 : 1.0; }
};

/// Zone [lo, hi] widened to [lo / (1 + buffer), hi (1 + buffer)] and clipped to the schedule.
GapMask gap_mask(SigmaInterval zone, double buffer, const NoiseSchedule& schedule);
GapMask gap_mask(const RegimeReport& report, double buffer, const NoiseSchedule& schedule);

/// lambda(sigma) sampled on a grid, as "sigma,weight" rows.
void write_gap_weights_csv(const std::filesystem::path& path, const GapMask& mask, const SigmaGrid& grid,
                           const std::vector<std::string>& comments = {});

}  // namespace memgeom
