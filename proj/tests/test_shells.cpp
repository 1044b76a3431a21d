#include "memgeom/shells.hpp"

#include "memgeom/schedule.hpp"
#include "support.hpp"

#include <boost/math/constants/constants.hpp>
#include <boost/multiprecision/cpp_dec_float.hpp>

using namespace memgeom;
using memgeom::test::from_rows;
using memgeom::test::TempDir;

namespace {

using Exact = boost::multiprecision::number<boost::multiprecision::cpp_dec_float<100>>;

DatasetPtr share(Dataset ds) { return std::make_shared<const Dataset>(std::move(ds)); }

// P(r_in <= ||Z|| <= r_out, r_in <= ||Z + t e1|| <= r_out) for Z ~ N(0, I_2), by polar quadrature.
double phi_polar(const ShellSpec& s, double t) {
  const double pi = boost::math::constants::pi<double>();
  const int n = 200'000;
  const double h = (s.r_out - s.r_in) / n;
  double total = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double r = s.r_in + h * k;
    double arc = 0.0;
    if (r > 0.0) {
      // ||z + t e1||^2 = r^2 + 2 t r cos(theta) + t^2
      const double lo = std::clamp((s.r_in * s.r_in - r * r - t * t) / (2.0 * t * r), -1.0, 1.0);
      const double hi = std::clamp((s.r_out * s.r_out - r * r - t * t) / (2.0 * t * r), -1.0, 1.0);
      arc = 2.0 * (std::acos(lo) - std::acos(hi));
    }
    const double f = arc / (2.0 * pi) * r * std::exp(-0.5 * r * r);
    total += (k == 0 || k == n ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0)) * f;
  }
  return total * h / 3.0;
}

SyntheticSpec two_cluster(Index n, Index d, std::uint64_t seed) {
  SyntheticSpec s;
  s.kind = SyntheticKind::two_cluster;
  s.n_points = n;
  s.dim = d;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("shell radii") {
  CHECK(shell_radii(256, 5.0).guaranteed_mass() >= 0.9865);
  CHECK(1.0 - 2.0 * std::exp(-5.0) == doctest::Approx(0.98652).epsilon(1e-5));

  const auto s = shell_radii(3072, 5.0);
  const Exact d = 3072, c = 5;
  const Exact r_in = boost::multiprecision::sqrt(d - 2 * boost::multiprecision::sqrt(c * d));
  const Exact r_out = boost::multiprecision::sqrt(d + 2 * boost::multiprecision::sqrt(c * d) + 2 * c);
  CHECK(std::abs(s.r_in - static_cast<double>(r_in)) <= 1e-13 * s.r_in);
  CHECK(std::abs(s.r_out - static_cast<double>(r_out)) <= 1e-13 * s.r_out);

  for (const Index dim : {2, 16, 100, 3072}) {
    for (const double cc : {0.1, 1.0, 5.0, 20.0}) {
      const auto sp = shell_radii(dim, cc);
      if (sp.degenerate) {
        CHECK(sp.r_in == 0.0);
      } else {
        CHECK(sp.r_out * sp.r_out - sp.r_in * sp.r_in ==
              doctest::Approx(4.0 * std::sqrt(cc * static_cast<double>(dim)) + 2.0 * cc).epsilon(1e-12));
        CHECK(sp.r_in < std::sqrt(static_cast<double>(dim)));
      }
      CHECK(sp.r_out > std::sqrt(static_cast<double>(dim)));
      CHECK(sp.guaranteed_mass() < 1.0);
    }
  }
  CHECK(shell_radii(2, 5.0).degenerate);
  CHECK_THROWS_AS(shell_radii(1, 5.0), InputError);
  CHECK_THROWS_AS(shell_radii(4, 0.0), InputError);
}

TEST_CASE("shell membership") {
  const auto s256 = shell_radii(256, 5.0);
  const auto r = shell_membership_rate(s256, 1'000'000, 1);
  CHECK(r.mean >= 0.9865 - 3.0 * r.std_error);

  const auto s50 = shell_radii(64, 50.0);
  const auto r50 = shell_membership_rate(s50, 100'000, 2);
  CHECK(r50.mean >= 1.0 - 2.0 * std::exp(-50.0) - 3.0 * r50.std_error);

  // ||Z||^2 ~ chi^2_2 has CDF 1 - exp(-x / 2).
  const auto s2 = shell_radii(2, 0.1);
  const auto r2 = shell_membership_rate(s2, 1'000'000, 3);
  const double exact = std::exp(-0.5 * s2.r_in * s2.r_in) - std::exp(-0.5 * s2.r_out * s2.r_out);
  CHECK(std::abs(r2.mean - exact) <= 4.0 * r2.std_error);
}

TEST_CASE("membership is reproducible and independent of the worker count") {
  const auto s = shell_radii(32, 5.0);
  set_worker_count(1);
  const auto a = shell_membership_rate(s, 50'000, 9);
  set_worker_count(4);
  const auto b = shell_membership_rate(s, 50'000, 9);
  set_worker_count(1);
  CHECK(a.mean == b.mean);
  CHECK(a.std_error == b.std_error);
}

TEST_CASE("phi") {
  const auto s = shell_radii(16, 5.0);
  const ShellSampleBank bank(16, 200'000, 4);
  const auto at0 = phi(s, bank, 0.0);
  CHECK(at0.value == shell_membership_rate(s, bank).mean);
  CHECK(phi(s, bank, 2.0 * s.r_out * 1.0001).value == 0.0);
  CHECK(phi(s, bank, 100.0).value == 0.0);
  for (const double t : {0.1, 0.5, 1.0, 2.0, 4.0, 8.0}) {
    const auto p = phi(s, bank, t);
    CHECK(p.value >= 0.0);
    CHECK(p.value <= at0.value + 4.0 * at0.std_error);
  }
  CHECK_THROWS_AS(phi(s, bank, -1.0), InputError);
}

TEST_CASE("phi in two dimensions matches polar quadrature") {
  const auto s = shell_radii(2, 1.0);
  const auto p = phi(s, 1.0, 10'000'000, 5);
  CHECK(std::abs(p.value - phi_polar(s, 1.0)) <= 4.0 * p.std_error);
}

TEST_CASE("phi table interpolates, refuses negative t and round-trips") {
  const auto s = shell_radii(8, 5.0);
  const ShellSampleBank bank(8, 100'000, 6);
  const PhiTable table(s, bank);
  CHECK(table.t_max() == 2.0 * s.r_out);
  for (const auto& e : table.entries()) CHECK(table(e.t).value == e.value);
  CHECK(table(0.0).value == phi(s, bank, 0.0).value);
  CHECK(table(table.t_max() * 1.5).value == 0.0);
  CHECK_THROWS_AS(table(-0.1), InputError);
  const double mid = 0.5 * (table.entries()[40].t + table.entries()[41].t);
  CHECK(table(mid).value <= std::max(table.entries()[40].value, table.entries()[41].value));
  CHECK(table(mid).value >= std::min(table.entries()[40].value, table.entries()[41].value));

  TempDir dir;
  table.write_csv(dir / "phi.csv", {"seed=6"});
  const auto back = PhiTable::read_csv(dir / "phi.csv");
  REQUIRE(back.entries().size() == table.entries().size());
  for (std::size_t k = 0; k < back.entries().size(); ++k) {
    CHECK(back.entries()[k].t == table.entries()[k].t);
    CHECK(back.entries()[k].value == table.entries()[k].value);
    CHECK(back.entries()[k].std_error == table.entries()[k].std_error);
  }
}

TEST_CASE("coverage of the training set itself") {
  const auto ds = synthesize(two_cluster(30, 32, 7));
  const auto s = shell_radii(32, 5.0);
  for (const double sigma : {0.01, 1.0, 50.0}) {
    const auto c = coverage(ds, s, ds, sigma, 64, 7);
    CHECK(c.mean >= s.guaranteed_mass() - 3.0 * c.std_error);
    CHECK(c.mean <= 1.0);
  }
}

TEST_CASE("coverage of an unreachable test point") {
  const auto s = shell_radii(16, 5.0);
  const auto train = from_rows({{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}});
  RowMatrix<double> far = RowMatrix<double>::Zero(1, 16);
  const double sigma = 0.5;
  far(0, 0) = 2.0 * sigma * s.r_out * 1.5;
  const auto c = coverage(train, s, Dataset(far), sigma, 20'000, 8);
  CHECK(c.mean <= 2.0 * std::exp(-5.0) + 3.0 * c.std_error);
}

TEST_CASE("coverage grows with c") {
  const auto train = synthesize(two_cluster(40, 16, 9));
  auto spec = two_cluster(40, 16, 10);
  const auto test = synthesize(spec);
  for (const double sigma : {0.3, 0.6, 1.0}) {
    double prev = -1.0, prev_se = 0.0;
    for (const double c : {1.0, 5.0, 20.0}) {
      const auto cov = coverage(train, shell_radii(16, c), test, sigma, 64, 11);
      CHECK(cov.mean >= prev - 4.0 * std::hypot(cov.std_error, prev_se));
      prev = cov.mean;
      prev_se = cov.std_error;
    }
  }
}

TEST_CASE("coverage bounds") {
  const auto train = synthesize(two_cluster(40, 16, 12));
  const auto test = synthesize(two_cluster(40, 16, 13));
  const auto s = shell_radii(16, 5.0);
  const ShellSampleBank bank(16, 200'000, 12);
  const PhiTable table(s, bank);

  const auto far = coverage_bounds(train, s, test, 1e6, table, 1);
  CHECK(far.lower == doctest::Approx(table(0.0).value).epsilon(1e-3));
  const double tiny = 0.01 * min_pairwise_distance(train) / (2.0 * s.r_out);
  const auto near = coverage_bounds(train, s, test, tiny, table, 1);
  CHECK(near.lower == 0.0);
  CHECK(near.upper == doctest::Approx(2.0 * std::exp(-5.0)));

  const auto grid = SigmaGrid::log_uniform(0.01, 50.0, 12);
  for (const double sigma : grid.sigmas()) {
    const auto cov = coverage(train, s, test, sigma, 64, 14);
    const auto b = coverage_bounds(train, s, test, sigma, table, 14);
    CHECK(b.lower <= b.upper + 1e-12);
    CHECK(b.upper <= 1.0);
    CHECK(b.upper == std::min(1.0, b.upper_raw));
    CHECK(sandwich_margin(cov, b) >= 0.0);
  }
}

TEST_CASE("pairs are subsampled only above the cap") {
  const auto train = synthesize(two_cluster(20, 8, 15));
  const auto test = synthesize(two_cluster(20, 8, 16));
  const auto s = shell_radii(8, 5.0);
  const PhiTable table(s, ShellSampleBank(8, 50'000, 15));
  CHECK(coverage_bounds(train, s, test, 1.0, table, 1).n_pairs == 400);
  CHECK(coverage_bounds(train, s, test, 1.0, table, 1, 100).n_pairs == 100);
}

TEST_CASE("disjointness threshold") {
  ShellSpec s;
  s.dim = 4;
  s.r_out = 5.0;
  CHECK(disjointness_sigma(from_rows({{0.0, 0.0, 0.0, 0.0}, {10.0, 0.0, 0.0, 0.0}}), s) == 1.0);
  CHECK(disjointness_sigma(from_rows({{1.0, 2.0}, {1.0, 2.0}, {3.0, 3.0}}), shell_radii(2, 5.0)) == 0.0);
  CHECK_THROWS_AS(disjointness_sigma(from_rows({{1.0, 2.0}}), shell_radii(2, 5.0)), InputError);
}

TEST_CASE("no shell pair intersects just below the threshold in d = 3072") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::uniform_cube;
  spec.n_points = 1000;
  spec.dim = 3072;
  spec.half_width = 1.0;
  spec.seed = 17;
  const auto ds = synthesize(spec);
  const auto s = shell_radii(3072, 5.0);
  const double threshold = disjointness_sigma(ds, s);
  CHECK(threshold == doctest::Approx(min_pairwise_distance(ds) / (2.0 * s.r_out)));
  std::size_t hits = 0;
  for (Index i = 0; i < ds.n_points(); ++i)
    for (Index j = i + 1; j < ds.n_points(); ++j)
      if (shells_intersect(ds.row(i).transpose(), ds.row(j).transpose(), 0.99 * threshold, s)) ++hits;
  CHECK(hits == 0);
  // At twice the threshold the closest pair overlaps.
  std::size_t wide = 0;
  for (Index i = 0; i < ds.n_points() && wide == 0; ++i)
    for (Index j = i + 1; j < ds.n_points(); ++j)
      if (shells_intersect(ds.row(i).transpose(), ds.row(j).transpose(), 2.0 * threshold, s)) ++wide;
  CHECK(wide > 0);
}

TEST_CASE("below the threshold a shell point has a single owner") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::uniform_cube;
  spec.n_points = 30;
  spec.dim = 12;
  spec.half_width = 3.0;
  spec.seed = 18;
  const auto ds = synthesize(spec);
  const auto s = shell_radii(12, 5.0);
  const double sigma = 0.9 * disjointness_sigma(ds, s);
  StreamRng rng(18, 1, 0);
  for (int k = 0; k < 2000; ++k) {
    const auto i = static_cast<Index>(rng.index(30));
    const Vector z = sample_uniform_annulus(s, rng);
    const Vector x = ds.row(i).transpose() + sigma * z;
    int owners = 0;
    for (Index j = 0; j < ds.n_points(); ++j)
      if (s.contains((x - ds.row(j).transpose()).norm() / sigma)) ++owners;
    CHECK(owners == 1);
  }
}

TEST_CASE("uniform annulus sampling") {
  const auto s = shell_radii(10, 5.0);
  StreamRng rng(19, 1, 0);
  RunningMoments m;
  for (int k = 0; k < 50'000; ++k) {
    const Vector z = sample_uniform_annulus(s, rng);
    CHECK(s.contains(z.norm()));
    m.add(z.squaredNorm());
  }
  const auto e = m.estimate();
  CHECK(std::abs(e.mean - annulus_second_moment(s)) <= 4.0 * e.std_error);
}

TEST_CASE("shell-only loss") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::two_cluster;
  spec.n_points = 2;
  spec.dim = 16;
  spec.separation = 40.0;
  spec.width = 0.0;
  const auto ds = share(synthesize(spec));
  const auto s = shell_radii(16, 5.0);
  const double sigma = 0.5 * disjointness_sigma(*ds, s);

  const auto nearest = nearest_center_projector(ds);
  const auto shell = shell_projector(ds, s);
  CHECK(shell_only_loss(*ds, s, nearest, sigma, 5000, 1).mean == 0.0);
  CHECK(shell_only_loss(*ds, s, shell, sigma, 5000, 2).mean == 0.0);
  const Vector outside = Vector::Constant(16, 3.0);
  CHECK(nearest(outside, sigma) != shell(outside, sigma));

  const Vector mu = empirical_mean(*ds);
  double analytic = 0.0;
  for (Index i = 0; i < 2; ++i) analytic += 0.5 * (mu - ds->row(i).transpose()).squaredNorm();
  const auto constant = shell_only_loss(*ds, s, *make_constant(mu), sigma, 5000, 3);
  CHECK(std::abs(constant.mean - analytic) <= 4.0 * constant.std_error + 1e-9 * analytic);

  // Identity denoiser: the loss is sigma^2 E||Z||^2 with Z uniform on the annulus.
  const DenoiseFn identity = [](const Vector& x, double) { return x; };
  const auto id = shell_only_loss(*ds, s, identity, sigma, 20'000, 4);
  CHECK(std::abs(id.mean - sigma * sigma * annulus_second_moment(s)) <= 4.0 * id.std_error);
  const auto gauss = shell_only_loss(*ds, s, identity, sigma, 20'000, 4, ShellNoise::gaussian);
  CHECK(std::abs(gauss.mean - sigma * sigma * 16.0) <= 4.0 * gauss.std_error);
}
