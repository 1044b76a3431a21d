#include "memgeom/regime.hpp"

#include "support.hpp"

#include <fstream>
#include <sstream>

using namespace memgeom;
using memgeom::test::from_rows;
using memgeom::test::TempDir;

namespace {

DiagnosticCurve curve(const std::string& name, const std::vector<double>& sigmas, const std::vector<double>& values) {
  DiagnosticCurve c{name, {}};
  for (std::size_t i = 0; i < sigmas.size(); ++i) c.points.push_back({sigmas[i], values[i], 0.0, 10});
  return c;
}

SyntheticSpec two_cluster(Index n, Index d, std::uint64_t seed) {
  SyntheticSpec s;
  s.kind = SyntheticKind::two_cluster;
  s.n_points = n;
  s.dim = d;
  s.seed = seed;
  return s;
}

std::size_t zone_length(const RegimeReport& r) { return r.zone_knots ? r.zone_knots->second - r.zone_knots->first + 1 : 0; }

}  // namespace

TEST_CASE("assembling a regime from hand-made curves") {
  const std::vector<double> s = {0.1, 0.2, 0.4, 0.8, 1.6, 3.2, 6.4};
  const auto cov = curve("coverage", s, {0.0, 0.05, 0.3, 0.6, 0.9, 0.95, 1.0});
  const auto w = curve("weight", s, {1.0, 1.0, 0.9, 0.7, 0.55, 0.2, 0.05});
  const auto r = assemble_regime(cov, w, {0.5, 0.5});
  REQUIRE(r.danger_zone);
  CHECK(r.zone_knots->first == 3);
  CHECK(r.zone_knots->second == 4);
  CHECK(r.danger_zone->lo == 0.8);
  CHECK(r.danger_zone->hi == 1.6);
  REQUIRE(r.crossing_sigma);
  CHECK(*r.crossing_sigma == 0.8);

  // Two runs of equal length: the lower-sigma one wins.
  const auto cov2 = curve("coverage", s, {0.6, 0.6, 0.0, 0.6, 0.6, 0.0, 0.0});
  const auto w2 = curve("weight", s, {0.6, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6});
  const auto tie = assemble_regime(cov2, w2);
  CHECK(tie.zone_knots->first == 0);
  CHECK(tie.zone_knots->second == 1);

  const auto none = assemble_regime(cov, w, {0.99, 0.99});
  CHECK_FALSE(none.danger_zone);
  CHECK_FALSE(none.zone_knots);

  auto shifted = w;
  shifted.points[2].sigma = 0.41;
  CHECK_THROWS_AS(assemble_regime(cov, shifted), InputError);
}

TEST_CASE("the zone shrinks as the thresholds rise") {
  const std::vector<double> s = {0.1, 0.2, 0.4, 0.8, 1.6, 3.2, 6.4, 12.8};
  const auto cov = curve("coverage", s, {0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 1.0});
  const auto w = curve("weight", s, {1.0, 0.98, 0.9, 0.8, 0.6, 0.4, 0.2, 0.1});
  std::size_t prev = s.size() + 1;
  for (const double tau : {0.05, 0.2, 0.4, 0.6, 0.8, 0.95}) {
    const auto r = assemble_regime(cov, w, {tau, tau});
    CHECK(zone_length(r) <= prev);
    prev = zone_length(r);
  }
}

TEST_CASE("a single training point with itself as the test set is dangerous everywhere") {
  const auto train = from_rows({{0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0}});
  const auto grid = SigmaGrid::log_uniform(0.01, 10.0, 8);
  const auto r = regime_report(train, train, shell_radii(8, 5.0), grid, {64, 1, 10}, {}, 1);
  REQUIRE(r.zone_knots);
  CHECK(r.zone_knots->first == 0);
  CHECK(r.zone_knots->second == grid.size() - 1);
  for (const auto& p : r.weight_curve.points) CHECK(p.value == 1.0);
}

TEST_CASE("separated test data at tiny noise gives no zone") {
  const auto train = synthesize(two_cluster(20, 16, 2));
  const auto test = synthesize(two_cluster(20, 16, 3));
  const auto grid = SigmaGrid::log_uniform(1e-4, 1e-3, 5);
  const auto r = regime_report(train, test, shell_radii(16, 5.0), grid, {16, 20, 20}, {}, 4);
  for (const auto& p : r.coverage_curve.points) CHECK(p.value == 0.0);
  CHECK_FALSE(r.danger_zone);
}

TEST_CASE("the danger zone is stable across seeds") {
  const auto train = synthesize(two_cluster(100, 64, 5));
  const auto test = synthesize(two_cluster(100, 64, 6));
  const auto grid = SigmaGrid::log_uniform(0.002, 80.0, 40);
  const auto spec = shell_radii(64, 5.0);
  const auto a = regime_report(train, test, spec, grid, {64, 100, 100}, {}, 7);
  const auto b = regime_report(train, test, spec, grid, {64, 100, 100}, {}, 8);
  REQUIRE(a.zone_knots);
  REQUIRE(b.zone_knots);
  CHECK(std::abs(static_cast<long>(a.zone_knots->first) - static_cast<long>(b.zone_knots->first)) <= 1);
  CHECK(std::abs(static_cast<long>(a.zone_knots->second) - static_cast<long>(b.zone_knots->second)) <= 1);
  CHECK(a.coverage_curve.sigmas() == a.weight_curve.sigmas());
}

TEST_CASE("gap mask") {
  const auto schedule = edm_schedule();
  const auto m = gap_mask(SigmaInterval{1.0, 5.0}, 0.0, schedule);
  REQUIRE(m.gap);
  CHECK(m.gap->lo == 1.0);
  CHECK(m.gap->hi == 5.0);
  CHECK(m.excluded_steps == std::vector<std::size_t>{8, 9, 10});
  REQUIRE(m.excluded_sigmas.size() == 3);
  CHECK(m.excluded_sigmas[0] == doctest::Approx(3.2568).epsilon(1e-4));
  CHECK(m.excluded_sigmas[1] == doctest::Approx(1.9233).epsilon(1e-4));
  CHECK(m.excluded_sigmas[2] == doctest::Approx(1.0882).epsilon(1e-4));
  for (std::size_t i = 0; i < schedule.n_steps(); ++i) {
    const bool listed = std::find(m.excluded_steps.begin(), m.excluded_steps.end(), i) != m.excluded_steps.end();
    CHECK(listed == (m.weight(schedule[i]) == 0.0));
  }
  CHECK(m.weight(1.0) == 0.0);
  CHECK(m.weight(5.0) == 0.0);
  CHECK(m.weight(5.01) == 1.0);

  const auto wide = gap_mask(SigmaInterval{1.0, 5.0}, 0.1, schedule);
  CHECK(wide.gap->lo == doctest::Approx(1.0 / 1.1));
  CHECK(wide.gap->hi == doctest::Approx(5.5));
  CHECK(wide.excluded_steps == std::vector<std::size_t>{7, 8, 9, 10});

  const auto clipped = gap_mask(SigmaInterval{50.0, 500.0}, 0.0, schedule);
  CHECK(clipped.gap->hi == 80.0);
  CHECK(clipped.excluded_steps == std::vector<std::size_t>{0, 1});

  const auto outside = gap_mask(SigmaInterval{100.0, 200.0}, 0.0, schedule);
  CHECK_FALSE(outside.gap);
  CHECK(outside.excluded_steps.empty());
  for (const double s : schedule.sigmas()) CHECK(outside.weight(s) == 1.0);
}

TEST_CASE("gap weights csv") {
  const auto m = gap_mask(SigmaInterval{1.0, 5.0}, 0.0, edm_schedule());
  const auto grid = SigmaGrid::log_uniform(0.01, 100.0, 9);
  TempDir dir;
  write_gap_weights_csv(dir / "w.csv", m, grid, {"seed=1"});
  std::ifstream in(dir / "w.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "# seed=1");
  std::getline(in, line);
  CHECK(line == "sigma,weight");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    const double sigma = std::stod(line.substr(0, comma));
    const double weight = std::stod(line.substr(comma + 1));
    CHECK(sigma == doctest::Approx(grid[rows]).epsilon(1e-15));
    CHECK(weight == m.weight(grid[rows]));
    ++rows;
  }
  CHECK(rows == 9);
}
