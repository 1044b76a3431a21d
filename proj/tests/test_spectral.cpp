#include "memgeom/spectral.hpp"

#include "support.hpp"

#include <numbers>

using namespace memgeom;

namespace {

// Sigma_{ij} = (1/d) sum_k lambda_k cos(2 pi k (i - j) / d), built without the library.
Matrix circulant_by_hand(const Vector& lambda) {
  const Index d = lambda.size();
  Matrix s(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) {
      double acc = 0.0;
      for (Index k = 0; k < d; ++k) acc += lambda[k] * std::cos(2.0 * std::numbers::pi * static_cast<double>(k * (i - j)) / static_cast<double>(d));
      s(i, j) = acc / static_cast<double>(d);
    }
  return s;
}

Vector fixture_spectrum() { return (Vector(8) << 8, 4, 2, 1, 1, 1, 2, 4).finished(); }

}  // namespace

TEST_CASE("circulant model") {
  const auto model = CirculantModel::from_spectrum(fixture_spectrum());
  CHECK((model.dense() - circulant_by_hand(fixture_spectrum())).cwiseAbs().maxCoeff() <= 1e-13);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(model.dense());
  Vector sorted = fixture_spectrum();
  std::sort(sorted.begin(), sorted.end());
  CHECK((eig.eigenvalues() - sorted).cwiseAbs().maxCoeff() <= 1e-12);

  CHECK_THROWS_AS(CirculantModel::from_spectrum((Vector(4) << 1, 2, 3, 4).finished()), InputError);
  CHECK_THROWS_AS(CirculantModel::from_spectrum((Vector(4) << 1, -1, 3, -1).finished()), InputError);
  CHECK_THROWS_AS(CirculantModel::from_spectrum(Vector::Ones(1)), InputError);
}

TEST_CASE("flat spectrum has a diagonal kernel") {
  const auto p = sensitivity_profile(CirculantModel::from_spectrum(Vector::Constant(16, 3.0)), 2.0);
  CHECK(p.tv == 0.0);
  CHECK(p.q[0] == doctest::Approx(4.0 / 7.0));
  for (Index n = 1; n < 16; ++n) CHECK(std::abs(p.q[n]) <= 1e-15);
}

TEST_CASE("sensitivity profile matches the dense Jacobian") {
  const auto model = CirculantModel::from_spectrum(fixture_spectrum());
  const double sigma = 1.0;
  const auto p = sensitivity_profile(model, sigma);
  // m(x) = mu + Sigma (Sigma + sigma^2 I)^{-1} (x - mu); its Jacobian is I - sigma^2 (Sigma + sigma^2 I)^{-1}.
  const Matrix sigma_mat = circulant_by_hand(fixture_spectrum());
  const Matrix jac = Matrix::Identity(8, 8) - sigma * sigma * (sigma_mat + sigma * sigma * Matrix::Identity(8, 8)).inverse();
  for (Index i = 0; i < 8; ++i)
    for (Index j = 0; j < 8; ++j) {
      if (i == j) continue;
      CHECK(std::abs(std::abs(jac(i, j)) - offdiag_sensitivity(model, sigma, i, j)) <= 1e-10);
    }
  // h values, TV and the per-lag bounds.
  double tv = 0.0;
  for (Index k = 0; k < 8; ++k) {
    CHECK(p.h[k] == doctest::Approx(1.0 / (fixture_spectrum()[k] + 1.0)));
    tv += std::abs(p.h[(k + 1) % 8] - p.h[k]);
  }
  CHECK(p.tv == doctest::Approx(tv).epsilon(1e-14));
  REQUIRE(p.bounds.size() == 4);
  for (Index n = 1; n <= 4; ++n) {
    CHECK(p.bounds[n - 1] == doctest::Approx(tv / (4.0 * static_cast<double>(n))));
    CHECK(std::abs(p.q[n]) <= p.bounds[n - 1] + 1e-15);
  }
  CHECK(p.imag_residue <= 1e-12);
}

TEST_CASE("off-diagonal sensitivity") {
  const auto model = CirculantModel::from_spectrum(fixture_spectrum());
  CHECK(offdiag_sensitivity(model, 0.7, 0, 3) == offdiag_sensitivity(model, 0.7, 2, 5));
  CHECK(offdiag_sensitivity(model, 0.7, 1, 7) == offdiag_sensitivity(model, 0.7, 7, 1));
  CHECK(wraparound_distance(1, 7, 8) == 2);
  CHECK(wraparound_distance(0, 4, 8) == 4);
  CHECK_THROWS_AS(offdiag_sensitivity(model, 0.7, 2, 2), InputError);
  CHECK_THROWS_AS(offdiag_sensitivity(model, 0.7, 0, 8), InputError);

  const Vector mu = Vector::LinSpaced(8, -1.0, 1.0);
  const GaussianModel g = model.gaussian(mu);
  const auto m = make_gaussian(g);
  const Vector x = Vector::LinSpaced(8, 0.5, -2.0);
  const double h = 1e-6;
  for (Index j = 1; j < 8; ++j) {
    Vector xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const double fd = (denoise(*m, xp, 0.7)[0] - denoise(*m, xm, 0.7)[0]) / (2.0 * h);
    CHECK(std::abs(std::abs(fd) - offdiag_sensitivity(model, 0.7, 0, j)) <= 1e-5);
  }
}

TEST_CASE("kernel symmetry and locality at small noise") {
  const auto model = CirculantModel::from_spectrum(power_law_spectrum(32, 2.0));
  double prev = 1e300;
  // Below the smallest eigenvalue the off-diagonal kernel shrinks like sigma^2.
  REQUIRE(model.spectrum().minCoeff() > 1e-3);
  for (const double sigma : {0.03, 0.01, 0.003, 0.001}) {
    const auto p = sensitivity_profile(model, sigma);
    for (Index n = 1; n < 32; ++n) CHECK(std::abs(p.q[n] - p.q[32 - n]) <= 1e-14);
    const double off = p.q.tail(31).cwiseAbs().maxCoeff();
    CHECK(off < prev);
    prev = off;
  }
  CHECK(prev <= 1e-3);
  CHECK(sensitivity_profile(model, 1e-4).q.tail(31).cwiseAbs().maxCoeff() <= 1e-5);
  CHECK_THROWS(sensitivity_profile(model, 0.0));
}

TEST_CASE("spectrum families") {
  const Vector pl = power_law_spectrum(16, 2.0, 5.0);
  CHECK(pl[0] == 5.0);
  CHECK(pl[1] == doctest::Approx(5.0 / 4.0));
  CHECK(pl[1] == pl[15]);
  const Vector sp = spike_spectrum(16, 100.0, 1e-6);
  CHECK(sp[0] == 100.0);
  CHECK(sp[5] == 1e-6);
  CHECK(spectral_concentration(Vector::Ones(16)) == doctest::Approx(1.0));
  CHECK(spectral_concentration(spike_spectrum(16, 1.0, 0.0)) == doctest::Approx(16.0));
  CHECK_THROWS(spectral_concentration(Vector::Zero(4)));
}

TEST_CASE("concentration sweep") {
  for (const Index d : {32, 256}) {
    std::vector<LabeledSpectrum> family;
    for (const double p : {1.0, 2.0, 4.0}) family.push_back({"power_" + std::to_string(static_cast<int>(p)), power_law_spectrum(d, p)});
    family.push_back({"spike", spike_spectrum(d, 100.0, 1e-6)});
    const auto rows = spectrum_concentration_sweep(family, 1.0);
    REQUIRE(rows.size() == 4);
    for (std::size_t k = 1; k < rows.size(); ++k) {
      CHECK(rows[k].concentration >= rows[k - 1].concentration);
      CHECK(rows[k].decay_moment > rows[k - 1].decay_moment);
    }
    CHECK(rows.back().label == "spike");
    for (const auto& r : rows) CHECK(r.tv <= rows.back().tv);
  }

  const auto flat = spectrum_concentration_sweep({{"a", Vector::Ones(8)}, {"b", Vector::Constant(8, 5.0)}}, 1.0);
  for (const auto& r : flat) {
    CHECK(r.tv == 0.0);
    CHECK(r.decay_moment == 0.0);
    REQUIRE(r.decay_index);
    CHECK(*r.decay_index == 1);
  }
  CHECK_THROWS(spectrum_concentration_sweep({}, 1.0));
  CHECK_THROWS(spectrum_concentration_sweep({{"a", Vector::Ones(8)}, {"b", Vector::Ones(16)}}, 1.0));
}
