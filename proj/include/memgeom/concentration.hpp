#pragma once

#include "memgeom/curve.hpp"
#include "memgeom/data.hpp"
#include "memgeom/schedule.hpp"
#include "memgeom/stats.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace memgeom {

double normal_cdf(double x);
/// 1 - F(x) without cancellation.
double normal_sf(double x);
/// F^{-1}(p) for p in (0, 1).
double normal_quantile(double p);

/// a_{K,delta,q} = F^{-1}(delta/K) + sqrt(F^{-1}(delta/K)^2 + 2 log(K q / (1 - q))).
double threshold_a(Index k, double delta, double q);
/// b_{delta,q} with Ftilde^{-1}(delta/N) = -F^{-1}(delta/N) in place of F^{-1}(delta/K).
double threshold_b(Index n_points, double delta, double q);

struct ThresholdReport {
  Index point_index = 0;
  double q = 0.0;
  double delta = 0.0;
  /// min over K = 2..N of d_KNN / a_{K-1}; empty when every a_{K-1} was non-positive.
  std::optional<double> sigma_high;
  Index k_star = 0;
  double sigma_low = 0.0;
  /// a_{K,delta,q} for K = 1..N-1.
  std::vector<double> a_constants;
  double b_constant = 0.0;
};

ThresholdReport concentration_thresholds(const Dataset& dataset, Index point_index, double q, double delta);

struct ThresholdValidation {
  ThresholdReport report;
  /// P(w_1 > q) at sigma_high, estimated.
  MeanEstimate fail_high;
  /// P(w_1 < q) at sigma_low, estimated.
  MeanEstimate fail_low;
  /// delta + 4 sqrt(delta (1 - delta) / n)
  double tolerance = 0.0;

  bool passed() const { return fail_high.mean <= tolerance && fail_low.mean <= tolerance; }
};

ThresholdValidation validate_thresholds(const Dataset& dataset, Index point_index, double q, double delta, std::size_t n_trials,
                                        std::uint64_t seed);

/// Self weight w_1(x_1 + sigma Z, sigma) for each of n draws of Z.
std::vector<double> self_weight_samples(const Dataset& dataset, Index point_index, double sigma, std::size_t n_trials,
                                        std::uint64_t seed, std::uint64_t stream = 0);

inline constexpr Index kDefaultBasePoints = 100;
inline constexpr std::size_t kDefaultNoiseDraws = 400;

struct WeightCurves {
  DiagnosticCurve max_weight;
  DiagnosticCurve self_weight;
  /// Per-sample max minus self, averaged.
  DiagnosticCurve gap;
};

/// Base rows are drawn without replacement; base b uses noise stream b at every sigma.
WeightCurves max_vs_self_weight(const Dataset& dataset, const SigmaGrid& grid, Index n_base, std::size_t n_noise, std::uint64_t seed);
/// W_sigma: mean over base rows and noise of max_i w_i(x_b + sigma Z, sigma).
DiagnosticCurve w_sigma_curve(const Dataset& dataset, const SigmaGrid& grid, Index n_base, std::size_t n_noise, std::uint64_t seed);

struct CosineBoundReport {
  Index point_index = 0;
  double t = 0.0;
  double epsilon = 0.0;
  double a = 0.0;
  double c = 0.0;
  double kappa_epsilon = 0.0;
  double diameter = 0.0;
  /// Lower bound on the cosine; -infinity when the radicand is not positive.
  double bound = 0.0;
  bool vacuous = false;
  double delta_total = 0.0;
};

CosineBoundReport cosine_bound(const Dataset& dataset, Index point_index, double t, double epsilon, double a, double c);

struct CosineValidation {
  CosineBoundReport report;
  /// Fraction of draws with cosine(u_opt, u_cond) >= bound.
  MeanEstimate hit_rate;
  double min_cosine = 0.0;
};

/// Draws Z, sets X_t = (1 - t) Z + t x_1 and compares u_opt(X_t) with u_cond = x_1 - Z.
CosineValidation validate_cosine_bound(const Dataset& dataset, Index point_index, double t, double epsilon, double a, double c,
                                       std::size_t n_draws, std::uint64_t seed);

}  // namespace memgeom
