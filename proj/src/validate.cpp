#include "memgeom/validate.hpp"

#include "memgeom/concentration.hpp"
#include "memgeom/data.hpp"
#include "memgeom/denoise.hpp"
#include "memgeom/random.hpp"
#include "memgeom/regime.hpp"
#include "memgeom/sampler.hpp"
#include "memgeom/schedule.hpp"
#include "memgeom/shells.hpp"
#include "memgeom/spectral.hpp"

#include <boost/multiprecision/cpp_dec_float.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace memgeom {

namespace {

using Exact = boost::multiprecision::number<boost::multiprecision::cpp_dec_float<200>>;

std::string fmt(const char* pattern, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, pattern, a);
  return buf;
}

std::string fmt(const char* pattern, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, pattern, a, b);
  return buf;
}

std::string fmt(const char* pattern, double a, double b, double c) {
  char buf[200];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

Dataset random_rows(Index n, Index d, double scale, std::uint64_t seed) {
  StreamRng rng(seed, 0x7e57, 0);
  RowMatrix<double> v(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < d; ++k) v(i, k) = scale * rng.normal();
  return Dataset(std::move(v), "fixture");
}

// Empirical denoiser in 200-digit arithmetic.
std::vector<Exact> exact_denoise(const Dataset& data, const Vector& x, double sigma) {
  const Index n = data.n_points();
  const Index d = data.dim();
  const Exact s(sigma);
  std::vector<Exact> logits(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    Exact acc = 0;
    for (Index k = 0; k < d; ++k) {
      const Exact diff = Exact(x[k]) - Exact(data.row(i)[k]);
      acc += diff * diff;
    }
    logits[static_cast<std::size_t>(i)] = -acc / (2 * s * s);
  }
  const Exact top = *std::max_element(logits.begin(), logits.end());
  Exact total = 0;
  for (auto& l : logits) {
    l = boost::multiprecision::exp(l - top);
    total += l;
  }
  std::vector<Exact> m(static_cast<std::size_t>(d), Exact(0));
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < d; ++k) m[static_cast<std::size_t>(k)] += logits[static_cast<std::size_t>(i)] / total * Exact(data.row(i)[k]);
  return m;
}

// mu + Sigma (Sigma + sigma^2 I)^{-1} (x - mu) by Gaussian elimination with partial pivoting.
std::vector<Exact> exact_gaussian_denoise(const Vector& mu, const Matrix& cov, const Vector& x, double sigma) {
  const auto d = static_cast<std::size_t>(mu.size());
  std::vector<std::vector<Exact>> a(d, std::vector<Exact>(d + 1));
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) a[i][j] = Exact(cov(static_cast<Index>(i), static_cast<Index>(j)));
    a[i][i] += Exact(sigma) * Exact(sigma);
    a[i][d] = Exact(x[static_cast<Index>(i)]) - Exact(mu[static_cast<Index>(i)]);
  }
  for (std::size_t c = 0; c < d; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < d; ++r)
      if (abs(a[r][c]) > abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    for (std::size_t r = c + 1; r < d; ++r) {
      const Exact f = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= d; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<Exact> y(d);
  for (std::size_t i = d; i-- > 0;) {
    Exact acc = a[i][d];
    for (std::size_t k = i + 1; k < d; ++k) acc -= a[i][k] * y[k];
    y[i] = acc / a[i][i];
  }
  std::vector<Exact> out(d);
  for (std::size_t i = 0; i < d; ++i) {
    Exact acc = Exact(mu[static_cast<Index>(i)]);
    for (std::size_t k = 0; k < d; ++k) acc += Exact(cov(static_cast<Index>(i), static_cast<Index>(k))) * y[k];
    out[i] = acc;
  }
  return out;
}

double max_abs_diff(const Vector& v, const std::vector<Exact>& ref) {
  double worst = 0.0;
  for (Index k = 0; k < v.size(); ++k)
    worst = std::max(worst, static_cast<double>(abs(Exact(v[k]) - ref[static_cast<std::size_t>(k)])));
  return worst;
}

CheckResult shell_concentration(const ValidationOptions& o) {
  CheckResult r;
  const std::size_t n = o.quick ? 100'000 : 1'000'000;
  constexpr double kPaperMass = 0.9865;
  r.passed = true;
  std::ostringstream detail;
  for (const Index d : {16, 256, 3072}) {
    const auto spec = shell_radii(d, 5.0);
    const auto est = shell_membership_rate(spec, n, o.seed + static_cast<std::uint64_t>(d));
    const bool ok = est.mean >= kPaperMass - 3.0 * est.std_error;
    r.passed = r.passed && ok;
    detail << "d=" << d << " rate=" << fmt("%.5f", est.mean) << fmt("+-%.1e", est.std_error) << (ok ? "" : " (below)") << "; ";
  }
  detail << "n=" << n << " each";
  r.detail = detail.str();
  return r;
}

CheckResult coverage_sandwich(const ValidationOptions& o) {
  CheckResult r;
  SyntheticSpec spec;
  spec.kind = SyntheticKind::two_cluster;
  spec.n_points = 200;
  spec.dim = 64;
  spec.separation = 20.0;
  spec.width = 1.0;
  spec.seed = o.seed;
  const Dataset train = synthesize(spec);
  spec.seed = o.seed + 1;
  const Dataset test = synthesize(spec);
  const auto shell = shell_radii(64, 5.0);
  const ShellSampleBank bank(64, o.quick ? 100'000 : 1'000'000, o.seed);
  const PhiTable table(shell, bank);
  const auto grid = SigmaGrid::log_uniform(0.002, 80.0, 40);
  const std::size_t n_noise = o.quick ? 16 : 64;
  std::size_t violations = 0;
  double worst_slack = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto cov = coverage(train, shell, test, grid[k], n_noise, o.seed);
    const auto b = coverage_bounds(train, shell, test, grid[k], table, o.seed);
    const double slack = sandwich_margin(cov, b);
    worst_slack = std::min(worst_slack, slack);
    if (slack < 0.0) ++violations;
  }
  r.passed = violations == 0;
  r.detail = std::to_string(violations) + " of 40 knots outside the sandwich, " + fmt("min slack %.3g", worst_slack);
  return r;
}

CheckResult threshold_validation(const ValidationOptions& o) {
  CheckResult r;
  const std::size_t trials = o.quick ? 1000 : 5000;
  r.passed = true;
  std::ostringstream detail;
  for (const Index n : {20, 50, 200}) {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::gaussian_mixture;
    spec.n_points = n;
    spec.dim = 32;
    spec.components = 4;
    spec.spread = 3.0;
    spec.scale = 1.0;
    spec.seed = o.seed + static_cast<std::uint64_t>(n);
    const Dataset data = synthesize(spec);
    for (const auto& [q, delta] : {std::pair{0.9, 0.1}, std::pair{0.95, 0.05}}) {
      const auto v = validate_thresholds(data, 0, q, delta, trials, o.seed);
      r.passed = r.passed && v.passed();
      detail << "N=" << n << " q=" << q << ": high " << fmt("%.4f", v.fail_high.mean) << " low " << fmt("%.4f", v.fail_low.mean)
             << fmt(" (tol %.4f)", v.tolerance) << (v.passed() ? "" : " FAIL") << "; ";
    }
  }
  detail << "n=" << trials;
  r.detail = detail.str();
  return r;
}

CheckResult denoiser_exactness(const ValidationOptions& o) {
  CheckResult r;
  double worst_emp = 0.0, worst_gauss = 0.0, worst_flow = 0.0;
  int fixtures = 0;
  StreamRng rng(o.seed, 0x4a4a, 0);
  for (const Index n : {1, 2, 3, 5, 10}) {
    for (const Index d : {1, 2, 3, 4}) {
      for (const double sigma : {0.05, 0.5, 3.0}) {
        ++fixtures;
        const Dataset data = random_rows(n, d, 1.0, o.seed + static_cast<std::uint64_t>(fixtures));
        const double scale = std::max(1.0, data.values().cwiseAbs().maxCoeff());
        const Vector x = rng.normal_vector(d);
        const Vector m = empirical_denoise(data, x, sigma);
        worst_emp = std::max(worst_emp, max_abs_diff(m, exact_denoise(data, x, sigma)) / scale);

        Matrix a(d, d);
        for (Index i = 0; i < d; ++i)
          for (Index k = 0; k < d; ++k) a(i, k) = rng.normal();
        const Matrix cov = a * a.transpose() + 0.1 * Matrix::Identity(d, d);
        const Vector mu = rng.normal_vector(d);
        const GaussianModel model(mu, cov);
        const Vector g = model.denoise(x, sigma);
        const auto ref = exact_gaussian_denoise(model.mean(), model.covariance(), x, sigma);
        double ref_scale = 1.0;
        for (const auto& v : ref) ref_scale = std::max(ref_scale, static_cast<double>(abs(v)));
        worst_gauss = std::max(worst_gauss, max_abs_diff(g, ref) / ref_scale);

        const double t = 1.0 / (1.0 + sigma);
        const Vector mt = flow_denoise(data, t * x, t);
        worst_flow = std::max(worst_flow, (mt - m).cwiseAbs().maxCoeff() / scale);
      }
    }
  }
  r.passed = worst_emp <= 1e-12 && worst_gauss <= 1e-10 && worst_flow <= 1e-12;
  r.detail = std::to_string(fixtures) + " fixtures: " +
             fmt("empirical %.2e (tol 1e-12), gaussian %.2e (tol 1e-10), flow identity %.2e (tol 1e-12)", worst_emp, worst_gauss, worst_flow);
  return r;
}

CheckResult tweedie(const ValidationOptions& o) {
  CheckResult r;
  double worst = 0.0;
  double worst_order_dev = 0.0;
  StreamRng rng(o.seed, 0x7a7a, 0);
  for (int f = 0; f < 6; ++f) {
    const Dataset data = random_rows(5, 3, 1.0, o.seed + 100 + static_cast<std::uint64_t>(f));
    const Vector x = rng.normal_vector(3);
    worst = std::max(worst, tweedie_jacobian_check(data, x, 1.0, 1e-5).max_rel_err);
    const double e1 = tweedie_jacobian_check(data, x, 1.0, 2e-2).max_rel_err;
    const double e2 = tweedie_jacobian_check(data, x, 1.0, 1e-2).max_rel_err;
    const double e3 = tweedie_jacobian_check(data, x, 1.0, 5e-3).max_rel_err;
    worst_order_dev = std::max({worst_order_dev, std::abs(std::log2(e1 / e2) - 2.0), std::abs(std::log2(e2 / e3) - 2.0)});
  }
  r.passed = worst <= 1e-4 && worst_order_dev <= 0.2;
  r.detail = fmt("max rel err %.2e at step 1e-5 (tol 1e-4); observed order within %.3f of 2 (tol 0.2)", worst, worst_order_dev);
  return r;
}

CheckResult large_sigma_excess(const ValidationOptions& o) {
  CheckResult r;
  SyntheticSpec spec;
  spec.kind = SyntheticKind::uniform_cube;
  spec.n_points = 40;
  spec.dim = 8;
  spec.seed = o.seed;
  const Dataset data = synthesize(spec);
  const auto curve = gauss_excess_profile(data, SigmaGrid({10.0, 100.0, 1000.0}), data.n_points(), o.seed);
  const double v10 = curve.points[0].value;
  const double v1000 = curve.points[2].value;
  const double diam = diameter(data);
  const Vector mu = empirical_mean(data);
  double worst = 0.0;
  for (Index i = 0; i < data.n_points(); ++i)
    worst = std::max(worst, (empirical_denoise(data, data.row(i).transpose(), 1e4 * diam) - mu).norm());
  r.passed = v1000 <= 10.0 * v10 && worst <= 1e-4 * diam;
  r.detail = fmt("excess(10)=%.3e excess(1000)=%.3e; ", v10, v1000) + fmt("max ||m - mu|| at 1e4 diam = %.2e (limit %.2e)", worst, 1e-4 * diam);
  return r;
}

CheckResult circulant_bound(const ValidationOptions& o) {
  CheckResult r;
  double worst_bound = -std::numeric_limits<double>::infinity();
  double worst_dense = 0.0;
  int models = 0;
  for (const Index d : {8, 32, 256}) {
    StreamRng rng(o.seed, 0xc1c1, static_cast<std::uint64_t>(d));
    for (int m = 0; m < 50; ++m) {
      Vector spectrum(d);
      for (Index k = 0; k <= d / 2; ++k) {
        spectrum[k] = std::exp(std::log(1e-3) + rng.uniform() * std::log(1e5));
        spectrum[(d - k) % d] = spectrum[k];
      }
      const double sigma = std::exp(std::log(0.05) + rng.uniform() * std::log(400.0));
      const auto model = CirculantModel::from_spectrum(spectrum);
      const auto p = sensitivity_profile(model, sigma);
      for (Index n = 1; n <= d / 2; ++n) worst_bound = std::max(worst_bound, std::abs(p.q[n]) - p.bounds[n - 1]);
      if (d <= 64) {
        Matrix shifted = model.dense();
        shifted.diagonal().array() += sigma * sigma;
        const Vector col = sigma * sigma * Eigen::LLT<Matrix>(shifted).solve(Vector::Unit(d, 0));
        worst_dense = std::max(worst_dense, (col - p.q).cwiseAbs().maxCoeff());
      }
      ++models;
    }
  }
  r.passed = worst_bound <= 1e-12 && worst_dense <= 1e-10;
  r.detail = std::to_string(models) + " spectra: " + fmt("max(|q_n| - TV/4n) = %.2e (slack 1e-12), dense mismatch %.2e (tol 1e-10)", worst_bound, worst_dense);
  return r;
}

double isotropic_norm(double start_norm, double s, double sigma, double sigma_max) {
  return start_norm * std::sqrt((s * s + sigma * sigma) / (s * s + sigma_max * sigma_max));
}

CheckResult ode_correctness(const ValidationOptions& o) {
  CheckResult r;
  StreamRng rng(o.seed, 0x0de0, 0);
  // Single-point data: x(sigma) = x_1 + (sigma / sigma_max)(x(sigma_max) - x_1).
  const auto single = std::make_shared<const Dataset>(random_rows(1, 4, 1.0, o.seed));
  const auto schedule = edm_schedule();
  const Vector z = rng.normal_vector(4);
  const auto traj = integrate(*make_empirical(single), schedule, z);
  double linear_err = 0.0;
  const Vector x1 = single->row(0).transpose();
  const Vector start = schedule.sigma_max() * z;
  for (std::size_t i = 0; i < schedule.n_steps(); ++i) {
    const Vector exact = x1 + (schedule[i] / schedule.sigma_max()) * (start - x1);
    linear_err = std::max(linear_err, (traj.states.row(static_cast<Index>(i)).transpose() - exact).cwiseAbs().maxCoeff());
  }

  // Isotropic Gaussian, Sigma = I, over the default schedule range.
  const double s = 1.0;
  const Index d = 8;
  const auto gauss = make_gaussian(GaussianModel(Vector::Zero(d), s * s * Matrix::Identity(d, d)));
  const Vector zg = rng.normal_vector(d);
  const auto sched40 = edm_schedule(80.0, 0.002, 40);
  const double got = integrate(*gauss, sched40, zg).terminal().norm();
  const double want = isotropic_norm(80.0 * zg.norm(), s, 0.002, 80.0);
  const double iso_rel = std::abs(got - want) / want;

  // Convergence orders against a 1e4-step Heun reference.
  const IntegrateOptions heun{Integrator::heun, false};
  const IntegrateOptions euler{Integrator::euler, false};
  const Vector reference = integrate(*gauss, edm_schedule(80.0, 0.002, 10001), zg, heun).terminal();
  auto err = [&](int intervals, IntegrateOptions opt) {
    return (integrate(*gauss, edm_schedule(80.0, 0.002, intervals + 1), zg, opt).terminal() - reference).norm();
  };
  const double euler_order = std::log2(err(64, euler) / err(128, euler));
  const double heun_order = std::log2(err(64, heun) / err(128, heun));
  r.passed = linear_err <= 1e-10 && iso_rel <= 1e-3 && std::abs(euler_order - 1.0) <= 0.3 && std::abs(heun_order - 2.0) <= 0.3;
  r.detail = fmt("single-point max err %.2e (tol 1e-10); isotropic 40-step rel err %.2e (tol 1e-3); ", linear_err, iso_rel) +
             fmt("orders euler %.3f heun %.3f (tol 0.3)", euler_order, heun_order);
  return r;
}

CheckResult memorization_flip(const ValidationOptions& o) {
  CheckResult r;
  SyntheticSpec spec;
  spec.kind = SyntheticKind::two_cluster;
  spec.n_points = 20;
  spec.dim = 8;
  spec.separation = 200.0;
  spec.width = 0.05;
  spec.seed = o.seed;
  const auto data = std::make_shared<const Dataset>(synthesize(spec));
  const auto base = make_empirical(data);
  const auto insert = make_gaussian(GaussianModel::from_dataset(*data));
  const auto schedule = edm_schedule();
  constexpr double kBandScale = 0.05;
  const std::size_t n = 256;
  const auto result = swap_experiment(base, insert, kMediumBandLo * kBandScale, kMediumBandHi * kBandScale, *data, schedule, n, o.seed);
  const auto noop = swap_composite(base, base, kMediumBandLo * kBandScale, kMediumBandHi * kBandScale, schedule);
  const bool identical = sample_terminals(*noop, schedule, n, o.seed) == sample_terminals(*base, schedule, n, o.seed);
  r.passed = result.baseline.rate >= 0.90 && result.swapped.rate <= 0.10 && identical;
  r.detail = fmt("baseline rate %.3f (>= 0.90), swapped rate %.3f (<= 0.10) over 256 trajectories, ", result.baseline.rate, result.swapped.rate) +
             std::string("identical-insert swap ") + (identical ? "bit-identical" : "DIFFERS");
  return r;
}

CheckResult cosine_check(const ValidationOptions& o) {
  CheckResult r;
  SyntheticSpec spec;
  spec.kind = SyntheticKind::gaussian_mixture;
  spec.n_points = 10;
  spec.dim = 512;
  spec.means = {Vector::Zero(512)};
  spec.seed = o.seed;
  const Dataset data = synthesize(spec);
  const auto v = validate_cosine_bound(data, 0, 0.4, 0.01, 8.0, 5.0, o.quick ? 2000 : 10000, o.seed);
  const double need = 1.0 - v.report.delta_total - 4.0 * v.hit_rate.std_error;
  r.passed = !v.report.vacuous && v.hit_rate.mean >= need;
  r.detail = fmt("bound %.4f, delta_total %.3e, ", v.report.bound, v.report.delta_total) +
             fmt("hit rate %.4f (need >= %.4f), min cosine %.4f", v.hit_rate.mean, need, v.min_cosine);
  return r;
}

CheckResult shell_only(const ValidationOptions& o) {
  CheckResult r;
  SyntheticSpec spec;
  spec.kind = SyntheticKind::uniform_cube;
  spec.n_points = 20;
  spec.dim = 16;
  spec.half_width = 5.0;
  spec.seed = o.seed;
  const auto data = std::make_shared<const Dataset>(synthesize(spec));
  const auto shell = shell_radii(16, 5.0);
  const double sigma = 0.5 * disjointness_sigma(*data, shell);
  const std::size_t n = o.quick ? 5000 : 20000;
  const auto projector = nearest_center_projector(data);
  const auto in_shell = shell_projector(data, shell);
  const auto l1 = shell_only_loss(*data, shell, projector, sigma, n, o.seed);
  const auto l2 = shell_only_loss(*data, shell, in_shell, sigma, n, o.seed + 1);
  // Distinct: away from every shell the two minimizers disagree.
  const Vector far = Vector::Constant(16, 1e3);
  const bool distinct = (projector(far, sigma) - in_shell(far, sigma)).norm() > 0.0;
  const Vector mu = empirical_mean(*data);
  double analytic = 0.0;
  for (Index i = 0; i < data->n_points(); ++i) analytic += (mu - data->row(i).transpose()).squaredNorm();
  analytic /= static_cast<double>(data->n_points());
  const auto lc = shell_only_loss(*data, shell, *make_constant(mu), sigma, n, o.seed + 2);
  r.passed = l1.mean <= 4.0 * l1.std_error && l2.mean <= 4.0 * l2.std_error && distinct &&
             std::abs(lc.mean - analytic) <= 4.0 * lc.std_error;
  r.detail = fmt("sigma %.3g; projector losses %.2e, %.2e; ", sigma, l1.mean, l2.mean) + (distinct ? "minimizers distinct; " : "minimizers equal; ") +
             fmt("constant-mean %.4f vs analytic %.4f (4 se = %.4f)", lc.mean, analytic, 4.0 * lc.std_error);
  return r;
}

}  // namespace

const std::vector<ValidationCheck>& validation_checks() {
  static const std::vector<ValidationCheck> checks = {
      {1, "shell concentration", shell_concentration, 30.0},
      {2, "coverage sandwich", coverage_sandwich, 300.0},
      {3, "weight concentration thresholds", threshold_validation, 180.0},
      {4, "denoiser exactness", denoiser_exactness},
      {5, "Tweedie Jacobian", tweedie},
      {6, "large-sigma Gaussian excess", large_sigma_excess},
      {7, "circulant sensitivity bound", circulant_bound, 60.0},
      {8, "probability-flow ODE", ode_correctness},
      {9, "memorization flip under denoiser swap", memorization_flip, 300.0},
      {10, "cosine similarity bound", cosine_check},
      {11, "shell-only objective", shell_only},
  };
  return checks;
}

std::vector<CheckResult> run_validation(const ValidationOptions& options, const std::vector<int>& only) {
  for (const int id : only) {
    const auto& all = validation_checks();
    if (std::none_of(all.begin(), all.end(), [id](const ValidationCheck& c) { return c.id == id; }))
      throw InputError("no validation check with id " + std::to_string(id));
  }
  std::vector<CheckResult> out;
  for (const auto& check : validation_checks()) {
    if (!only.empty() && std::find(only.begin(), only.end(), check.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    CheckResult r;
    try {
      r = check.run(options);
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("error: ") + e.what();
    }
    r.id = check.id;
    r.name = check.name;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.budget_seconds = check.budget_seconds;
    if (r.budget_seconds > 0.0 && r.seconds >= r.budget_seconds) {
      r.passed = false;
      r.detail += fmt("; over the %.0f s budget", r.budget_seconds);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_result(const CheckResult& r) {
  const char* status = r.skipped ? "SKIP" : (r.passed ? "PASS" : "FAIL");
  return std::string(status) + " [" + std::to_string(r.id) + "] " + r.name + ": " + r.detail +
         (r.budget_seconds > 0.0 ? fmt(" (%.2f s of %.0f s)", r.seconds, r.budget_seconds) : fmt(" (%.2f s)", r.seconds));
}

}  // namespace memgeom
