#include "memgeom/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace memgeom {

namespace {

/// JSON has no infinities; they are written as strings.
Json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

}  // namespace

Json to_json(const Vector& v) {
  Json arr = Json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(number(v[i]));
  return arr;
}

Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw InputError("expected a JSON array of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InputError("expected a JSON array of numbers");
    v[static_cast<Index>(i)] = j[i].get<double>();
  }
  return v;
}

Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Vector(m.row(i).transpose())));
  return rows;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw InputError("expected a non-empty JSON array of rows");
  const auto cols = static_cast<Index>(j[0].size());
  Matrix m(static_cast<Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Vector row = vector_from_json(j[i]);
    if (row.size() != cols) throw InputError("matrix rows differ in length");
    m.row(static_cast<Index>(i)) = row.transpose();
  }
  return m;
}

Json to_json(const DiagnosticCurve& curve) {
  Json points = Json::array();
  for (const auto& p : curve.points)
    points.push_back({{"sigma", number(p.sigma)}, {"value", number(p.value)}, {"stderr", number(p.std_error)}, {"n", p.n_samples}});
  return {{"name", curve.name}, {"points", points}};
}

Json to_json(const ShellSpec& spec) {
  return {{"dim", spec.dim},
          {"c", spec.c},
          {"r_in", spec.r_in},
          {"r_out", spec.r_out},
          {"guaranteed_mass", spec.guaranteed_mass()},
          {"low_dimension_warning", spec.degenerate}};
}

Json to_json(const CoverageBounds& b) {
  return {{"lower", number(b.lower)},         {"lower_stderr", number(b.lower_std_error)}, {"upper", number(b.upper)},
          {"upper_raw", number(b.upper_raw)}, {"upper_stderr", number(b.upper_std_error)}, {"n_pairs", b.n_pairs}};
}

Json to_json(const ThresholdReport& r) {
  Json j = {{"point_index", r.point_index}, {"q", r.q}, {"delta", r.delta}};
  j["sigma_high"] = r.sigma_high ? Json(number(*r.sigma_high)) : Json(nullptr);
  j["k_star"] = r.k_star;
  j["sigma_low"] = number(r.sigma_low);
  j["b_constant"] = number(r.b_constant);
  Json a = Json::array();
  for (const double v : r.a_constants) a.push_back(number(v));
  j["a_constants"] = std::move(a);
  return j;
}

Json to_json(const ThresholdValidation& v) {
  return {{"report", to_json(v.report)},
          {"fail_rate_high", number(v.fail_high.mean)},
          {"fail_rate_high_stderr", number(v.fail_high.std_error)},
          {"fail_rate_low", number(v.fail_low.mean)},
          {"fail_rate_low_stderr", number(v.fail_low.std_error)},
          {"n_trials", v.fail_high.n},
          {"tolerance", number(v.tolerance)},
          {"passed", v.passed()}};
}

Json to_json(const CosineBoundReport& r) {
  return {{"point_index", r.point_index}, {"t", r.t},
          {"epsilon", r.epsilon},         {"a", r.a},
          {"c", r.c},                     {"kappa_epsilon", number(r.kappa_epsilon)},
          {"diameter", number(r.diameter)}, {"bound", number(r.bound)},
          {"vacuous", r.vacuous},         {"delta_total", number(r.delta_total)}};
}

Json to_json(const MemorizationReport& r, bool with_records) {
  Json j = {{"n_samples", r.n_samples}, {"n_memorized", r.n_memorized}, {"rate", number(r.rate)},
            {"ratio", r.ratio},         {"n_ties", r.n_ties},           {"test_overlap", r.test_overlap}};
  if (with_records) {
    Json recs = Json::array();
    for (const auto& rec : r.records)
      recs.push_back({{"d1", number(rec.d1)}, {"d2", number(rec.d2)}, {"nearest", rec.nearest}, {"flag", rec.flag}});
    j["records"] = std::move(recs);
  }
  return j;
}

Json to_json(const RegimeReport& r) {
  Json j;
  j["rule"] = "danger zone: longest contiguous knot run with coverage >= tau_cov and weight >= tau_w";
  j["tau_cov"] = r.thresholds.coverage;
  j["tau_w"] = r.thresholds.weight;
  j["crossing_sigma"] = r.crossing_sigma ? Json(number(*r.crossing_sigma)) : Json(nullptr);
  if (r.danger_zone) {
    j["danger_zone"] = {{"lo", number(r.danger_zone->lo)},
                        {"hi", number(r.danger_zone->hi)},
                        {"first_knot", r.zone_knots->first},
                        {"last_knot", r.zone_knots->second}};
  } else {
    j["danger_zone"] = nullptr;
  }
  j["coverage"] = to_json(r.coverage_curve);
  j["weight"] = to_json(r.weight_curve);
  return j;
}

Json to_json(const GapMask& m) {
  Json j;
  if (m.gap) {
    j["gap"] = {{"lo", number(m.gap->lo)}, {"hi", number(m.gap->hi)}};
  } else {
    j["gap"] = nullptr;
    j["warning"] = "danger zone lies outside the schedule range";
  }
  j["excluded_steps"] = m.excluded_steps;
  Json sig = Json::array();
  for (const double s : m.excluded_sigmas) sig.push_back(number(s));
  j["excluded_sigmas"] = std::move(sig);
  return j;
}

Json to_json(const SensitivityProfile& p) {
  Json rows = Json::array();
  for (Index n = 1; n <= p.bounds.size(); ++n)
    rows.push_back({{"n", n}, {"abs_q", number(std::abs(p.q[n]))}, {"bound", number(p.bounds[n - 1])}});
  return {{"sigma", p.sigma}, {"tv", number(p.tv)}, {"q0", number(p.q[0])}, {"imag_residue", number(p.imag_residue)}, {"profile", rows}};
}

Json to_json(const SweepRow& r) {
  return {{"label", r.label},
          {"concentration", number(r.concentration)},
          {"tv", number(r.tv)},
          {"decay_index", r.decay_index ? Json(*r.decay_index) : Json(nullptr)},
          {"decay_moment", number(r.decay_moment)}};
}

DenoiserPtr denoiser_from_json(const Json& j, const DenoiserContext& context) {
  if (!j.is_object() || !j.contains("kind")) throw InputError("denoiser config needs a 'kind'");
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "empirical") {
    if (j.contains("data")) {
      const std::string path = j.at("data").get<std::string>();
      return make_empirical(std::make_shared<const Dataset>(load_dataset(path, format_from_extension(path))));
    }
    if (!context.training) throw InputError("empirical denoiser without data and no training set loaded");
    return make_empirical(context.training);
  }
  if (kind == "gaussian") {
    if (j.contains("mean")) return make_gaussian(GaussianModel(vector_from_json(j.at("mean")), matrix_from_json(j.at("covariance"))));
    if (!context.training) throw InputError("gaussian denoiser from training data but no training set loaded");
    return make_gaussian(GaussianModel::from_dataset(*context.training));
  }
  if (kind == "constant") {
    const auto& v = j.at("value");
    if (v.is_string()) {
      if (v.get<std::string>() != "mean") throw InputError("constant denoiser value must be a vector or \"mean\"");
      if (!context.training) throw InputError("constant mean denoiser but no training set loaded");
      return make_constant(empirical_mean(*context.training));
    }
    return make_constant(vector_from_json(v));
  }
  if (kind == "composite") {
    std::vector<NoiseBand> bands;
    for (const auto& b : j.at("bands")) bands.push_back({b.at("lo").get<double>(), b.at("hi").get<double>(), denoiser_from_json(b.at("denoiser"), context)});
    return make_composite(std::move(bands));
  }
  throw InputError("unknown denoiser kind '" + kind + "'");
}

Json to_json(const DenoiserSpec& spec) {
  return std::visit(
      [](const auto& d) -> Json {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, EmpiricalDenoiser>) {
          return {{"kind", "empirical"}, {"dataset", d.dataset->label()}, {"n_points", d.dataset->n_points()}};
        } else if constexpr (std::is_same_v<T, GaussianDenoiser>) {
          return {{"kind", "gaussian"}, {"mean", to_json(d.model->mean())}, {"covariance", to_json(d.model->covariance())}};
        } else if constexpr (std::is_same_v<T, ConstantDenoiser>) {
          return {{"kind", "constant"}, {"value", to_json(d.value)}};
        } else {
          Json bands = Json::array();
          for (const auto& b : d.bands) bands.push_back({{"lo", b.lo}, {"hi", b.hi}, {"denoiser", to_json(*b.denoiser)}});
          return {{"kind", "composite"}, {"bands", bands}};
        }
      },
      spec.kind);
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace memgeom
