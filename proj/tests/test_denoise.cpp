#include "memgeom/denoise.hpp"

#include "memgeom/schedule.hpp"
#include "support.hpp"

#include <boost/multiprecision/cpp_dec_float.hpp>

using namespace memgeom;
using memgeom::test::from_rows;
using memgeom::test::gaussian_rows;

namespace {

using Exact = boost::multiprecision::number<boost::multiprecision::cpp_dec_float<200>>;

DatasetPtr share(Dataset ds) { return std::make_shared<const Dataset>(std::move(ds)); }

}  // namespace

TEST_CASE("single point has weight one") {
  const auto ds = from_rows({{1.0, -2.0}});
  for (const double s : {1e-3, 1.0, 1e3}) {
    const auto w = posterior_weights(ds, Vector::Constant(2, 7.0), s);
    CHECK(w.weights[0] == 1.0);
    CHECK(w.max_weight == 1.0);
    CHECK(empirical_denoise(ds, Vector::Constant(2, 7.0), s) == ds.row(0).transpose());
  }
}

TEST_CASE("equidistant point splits the weight evenly") {
  const auto ds = from_rows({{-1.0, 0.0}, {1.0, 0.0}});
  const auto w = posterior_weights(ds, Vector::Unit(2, 1), 0.7);
  CHECK(w.weights[0] == 0.5);
  CHECK(w.weights[1] == 0.5);
}

TEST_CASE("three-point weights match a 200-digit softmax") {
  const auto ds = from_rows({{0.0, 0.0}, {1.0, 0.0}, {0.0, 2.0}});
  Vector x(2);
  x << 0.2, 0.1;
  const double sigma = 0.5;
  const auto w = posterior_weights(ds, x, sigma);
  std::vector<Exact> e(3);
  Exact total = 0;
  for (Index i = 0; i < 3; ++i) {
    const Exact dx = Exact(x[0]) - Exact(ds.row(i)[0]);
    const Exact dy = Exact(x[1]) - Exact(ds.row(i)[1]);
    e[static_cast<std::size_t>(i)] = boost::multiprecision::exp(-(dx * dx + dy * dy) / (2 * Exact(sigma) * Exact(sigma)));
    total += e[static_cast<std::size_t>(i)];
  }
  for (Index i = 0; i < 3; ++i) {
    const double ref = static_cast<double>(e[static_cast<std::size_t>(i)] / total);
    CHECK(std::abs(w.weights[i] - ref) <= 1e-14 * ref);
  }
}

TEST_CASE("weights are a probability vector and shift invariant") {
  const auto ds = gaussian_rows(40, 5, 2.0, 3);
  StreamRng rng(3, 1, 0);
  for (const double sigma : {1e-3, 0.1, 1.0, 10.0}) {
    const Vector x = rng.normal_vector(5);
    const auto w = posterior_weights(ds, x, sigma);
    CHECK(std::abs(w.weights.sum() - 1.0) <= 1e-12);
    CHECK(w.weights.minCoeff() >= 0.0);
    CHECK(w.weights.maxCoeff() <= 1.0);
    CHECK(w.max_weight == w.weights.maxCoeff());
    CHECK(w.weights[w.argmax_index] == w.max_weight);
    const Vector shift = Vector::Constant(5, 3.25);
    RowMatrix<double> moved = ds.values().rowwise() + shift.transpose();
    const auto w2 = posterior_weights(Dataset(moved), x + shift, sigma);
    CHECK((w2.weights - w.weights).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("weight errors") {
  const auto ds = from_rows({{0.0}, {1.0}});
  CHECK_THROWS_AS(posterior_weights(ds, Vector::Zero(1), 0.0), InputError);
  CHECK_THROWS_AS(posterior_weights(ds, Vector::Zero(1), -1.0), InputError);
  CHECK_THROWS_AS(posterior_weights(ds, Vector::Constant(1, std::nan("")), 1.0), InputError);
  CHECK_THROWS_AS(posterior_weights(ds, Vector::Zero(2), 1.0), InputError);
}

TEST_CASE("tiny sigma does not underflow") {
  const auto ds = gaussian_rows(10, 3, 1.0, 4);
  const auto w = posterior_weights(ds, Vector::Constant(3, 0.5), 1e-3);
  CHECK(w.max_weight == 1.0);
  CHECK(std::isfinite(w.weights.sum()));
}

TEST_CASE("empirical denoiser stays in the convex hull") {
  const auto ds = gaussian_rows(25, 4, 1.0, 5);
  const Vector lo = ds.values().colwise().minCoeff().transpose();
  const Vector hi = ds.values().colwise().maxCoeff().transpose();
  StreamRng rng(5, 1, 0);
  for (int k = 0; k < 50; ++k) {
    const Vector m = empirical_denoise(ds, 4.0 * rng.normal_vector(4), std::exp(4.0 * rng.normal()));
    for (Index j = 0; j < 4; ++j) {
      CHECK(m[j] >= lo[j] - 1e-9);
      CHECK(m[j] <= hi[j] + 1e-9);
    }
  }
}

TEST_CASE("empirical denoiser limits in sigma") {
  const auto ds = gaussian_rows(30, 6, 1.0, 6);
  const double diam = diameter(ds);
  const Vector mu = empirical_mean(ds);
  for (Index i = 0; i < ds.n_points(); i += 5)
    CHECK((empirical_denoise(ds, ds.row(i).transpose(), 1e6 * diam) - mu).norm() <= 1e-6 * diam);
  const double sep = min_pairwise_distance(ds);
  StreamRng rng(6, 1, 0);
  for (Index i = 0; i < ds.n_points(); ++i) {
    const double sigma = 1e-3 * sep;
    const Vector x = ds.row(i).transpose() + sigma * rng.normal_vector(6);
    CHECK((empirical_denoise(ds, x, sigma) - ds.row(i).transpose()).norm() <= 1e-12 * sep);
  }
}

TEST_CASE("gaussian denoiser closed forms") {
  const GaussianModel iso(Vector::Zero(3), Matrix::Identity(3, 3));
  const Vector x = Vector::LinSpaced(3, -1.0, 2.0);
  for (const double s : {0.1, 1.0, 3.0}) CHECK((iso.denoise(x, s) - x / (1.0 + s * s)).cwiseAbs().maxCoeff() <= 1e-15);

  Matrix cov = Matrix::Zero(2, 2);
  cov.diagonal() << 4.0, 1.0;
  const GaussianModel g(Vector::LinSpaced(2, 1.0, 2.0), cov);
  // (1, 2) + diag(4/8, 1/5) (2, 1)
  const Vector m = g.denoise(Vector::Constant(2, 3.0), 2.0);
  CHECK(m[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(m[1] == doctest::Approx(2.2).epsilon(1e-15));

  for (const double s : {1e-3, 1.0, 1e3}) CHECK(g.denoise(g.mean(), s) == g.mean());
}

TEST_CASE("gaussian model validation") {
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 0.5;
  CHECK_THROWS_AS(GaussianModel(Vector::Zero(2), asym), InputError);
  Matrix neg = Matrix::Identity(2, 2);
  neg(1, 1) = -1e-3;
  CHECK_THROWS_AS(GaussianModel(Vector::Zero(2), neg), InputError);
  neg(1, 1) = -1e-12;
  const GaussianModel clamped(Vector::Zero(2), neg);
  CHECK(std::isfinite(clamped.denoise(Vector::Ones(2), 1e-3).sum()));
  CHECK_THROWS_AS(GaussianModel(Vector::Zero(3), Matrix::Identity(2, 2)), InputError);
  // A singular covariance is fine for any sigma > 0.
  const GaussianModel singular(Vector::Zero(2), Matrix::Zero(2, 2));
  CHECK(singular.denoise(Vector::Ones(2), 0.5) == Vector::Zero(2));
}

TEST_CASE("composite agrees bit-exactly with its active band") {
  const auto ds = share(gaussian_rows(15, 3, 1.0, 7));
  const auto emp = make_empirical(ds);
  const auto gau = make_gaussian(GaussianModel::from_dataset(*ds));
  const auto con = make_constant(Vector::Constant(3, 0.25));
  const auto comp = make_composite({{8.4, 80.0, emp}, {0.14, 8.4, gau}, {0.002, 0.14, con}});
  const Vector x = Vector::LinSpaced(3, -1.0, 1.0);
  const auto sched = edm_schedule();
  for (const double s : sched.sigmas()) {
    const auto& active = s >= 8.4 ? emp : (s >= 0.14 ? gau : con);
    CHECK(denoise(*comp, x, s) == denoise(*active, x, s));
  }
  // Boundaries go to the higher-noise band; the top band is closed.
  CHECK(denoise(*comp, x, 8.4) == denoise(*emp, x, 8.4));
  CHECK(denoise(*comp, x, 0.14) == denoise(*gau, x, 0.14));
  CHECK(denoise(*comp, x, 80.0) == denoise(*emp, x, 80.0));
  CHECK(denoise(*comp, x, 0.002) == denoise(*con, x, 0.002));
  CHECK_THROWS_AS(denoise(*comp, x, 81.0), InputError);
  CHECK_THROWS_AS(denoise(*comp, x, 0.001), InputError);
  CHECK_THROWS_AS(make_composite({{8.4, 80.0, emp}, {0.14, 8.0, gau}}), InputError);
  CHECK_THROWS_AS(make_composite({{0.14, 8.4, gau}, {8.4, 80.0, emp}}), InputError);
  CHECK_THROWS_AS(make_composite({{1.0, 2.0, emp}, {0.5, 1.0, make_constant(Vector::Zero(2))}}), InputError);
  CHECK(comp->kind_name() == "composite");
  CHECK(comp->dim() == 3);
}

TEST_CASE("denoising mse") {
  const auto one = from_rows({{1.5, -0.5}});
  CHECK(denoising_mse(*make_constant(one.row(0).transpose()), one, 0.7, 100, 1).mean == 0.0);

  // Gaussian denoiser on data drawn from its own law: tr(sigma^2 Sigma (Sigma + sigma^2 I)^{-1}).
  const Vector lambda = (Vector(4) << 4.0, 1.0, 0.25, 0.0625).finished();
  StreamRng rng(8, 1, 0);
  RowMatrix<double> rows(20'000, 4);
  for (Index i = 0; i < rows.rows(); ++i) rows.row(i) = (lambda.cwiseSqrt().cwiseProduct(rng.normal_vector(4))).transpose();
  const Dataset eval(rows);
  const auto g = make_gaussian(GaussianModel(Vector::Zero(4), lambda.asDiagonal()));
  for (const double s : {0.3, 1.0, 2.0}) {
    const auto est = denoising_mse(*g, eval, s, 1, 9);
    const double analytic = (s * s * lambda.array() / (lambda.array() + s * s)).sum();
    CHECK(std::abs(est.mean - analytic) <= 4.0 * est.std_error);
  }

  const auto ds = share(gaussian_rows(20, 3, 1.0, 10));
  const double sep = min_pairwise_distance(*ds);
  const auto small = denoising_mse(*make_empirical(ds), *ds, 1e-3 * sep, 8, 11);
  CHECK(small.mean <= 1e-20);
}

TEST_CASE("flow vector fields") {
  const auto one = from_rows({{2.0, 1.0}});
  const auto f = flow_vector_fields(one, Vector::Constant(2, 0.3), 0.6, 0);
  CHECK(f.u_opt == f.u_cond);

  const auto sep = from_rows({{10.0, 0.0}, {-10.0, 0.0}, {0.0, 10.0}});
  const double t = 0.7;
  const Vector x = t * sep.row(2).transpose();
  const auto g = flow_vector_fields(sep, x, t, 2);
  CHECK(flow_weights(sep, x, t)[2] > 1.0 - 1e-12);
  CHECK((g.u_opt - g.u_cond).norm() <= 1e-9 * g.u_cond.norm());
  CHECK_THROWS_AS(flow_weights(sep, x, 1.0), InputError);
  CHECK_THROWS_AS(flow_weights(sep, x, 0.0), InputError);
}

TEST_CASE("flow denoiser equals the sigma denoiser at sigma = (1 - t) / t") {
  const auto ds = gaussian_rows(12, 4, 1.0, 13);
  StreamRng rng(13, 1, 0);
  for (int k = 0; k < 200; ++k) {
    const double t = 0.02 + 0.96 * rng.uniform();
    const Vector x = 2.0 * rng.normal_vector(4);
    const Vector a = flow_denoise(ds, t * x, t);
    const Vector b = empirical_denoise(ds, x, t_to_sigma(t));
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, b.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("Tweedie Jacobian") {
  const auto one = from_rows({{1.0, 2.0, 3.0}});
  const auto c1 = tweedie_jacobian_check(one, Vector::Ones(3), 1.0, 1e-5);
  CHECK(c1.analytic.cwiseAbs().maxCoeff() == 0.0);
  CHECK(c1.numeric.cwiseAbs().maxCoeff() == 0.0);

  const auto ds = gaussian_rows(5, 3, 1.0, 14);
  StreamRng rng(14, 1, 0);
  for (int k = 0; k < 5; ++k) {
    const Vector x = rng.normal_vector(3);
    CHECK(tweedie_jacobian_check(ds, x, 1.0, 1e-5).max_rel_err <= 1e-5);
    const double e1 = tweedie_jacobian_check(ds, x, 1.0, 2e-2).max_rel_err;
    const double e2 = tweedie_jacobian_check(ds, x, 1.0, 1e-2).max_rel_err;
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.1));
  }

  // The Gaussian denoiser is linear with Jacobian Sigma (Sigma + sigma^2 I)^{-1}.
  const GaussianModel g = GaussianModel::from_dataset(gaussian_rows(50, 3, 1.0, 15));
  const double sigma = 0.8;
  const Matrix jac = g.jacobian(sigma);
  Matrix fd(3, 3);
  for (Index j = 0; j < 3; ++j) {
    const Vector e = Vector::Unit(3, j);
    fd.col(j) = (g.denoise(e, sigma) - g.denoise(-e, sigma)) / 2.0;
  }
  CHECK((fd - jac).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("gaussian excess profile") {
  const auto grid = SigmaGrid({0.5, 1.0, 10.0});
  const auto one = gauss_excess_profile(from_rows({{3.0, 4.0}}), grid, 1, 1);
  for (const auto& p : one.points) CHECK(p.value == 0.0);

  // Rows at +-a: m = a tanh(a x / sigma^2), Gaussian fit m^G = a^2 x / (a^2 + sigma^2).
  const double a = 1.5;
  const auto pair = gauss_excess_profile(from_rows({{a}, {-a}}), grid, 2, 1);
  for (const auto& p : pair.points) {
    const double s = p.sigma;
    const double ref = (1.0 + s) * (1.0 + s) * std::abs(a * std::tanh(a * a / (s * s)) - a * a * a / (a * a + s * s));
    CHECK(std::abs(p.value - ref) <= 1e-10);
  }

  SyntheticSpec spec;
  spec.kind = SyntheticKind::two_cluster;
  spec.n_points = 40;
  spec.dim = 8;
  spec.seed = 16;
  const auto ds = synthesize(spec);
  const auto probe = gauss_excess_profile(ds, SigmaGrid({10.0, 1e3}), 40, 16);
  CHECK(probe.points[1].value <= 10.0 * probe.points[0].value);
}
