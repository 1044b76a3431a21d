#include "memgeom/cli.hpp"

#include "memgeom/concentration.hpp"
#include "memgeom/data.hpp"
#include "memgeom/parallel.hpp"
#include "memgeom/random.hpp"
#include "memgeom/regime.hpp"
#include "memgeom/sampler.hpp"
#include "memgeom/schedule.hpp"
#include "memgeom/serialize.hpp"
#include "memgeom/shells.hpp"
#include "memgeom/spectral.hpp"
#include "memgeom/validate.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

namespace memgeom {

namespace {

namespace fs = std::filesystem;

// Every key a config file may set, with its default. Key order fixes the canonical form
// that is hashed into artifact headers.
Json default_config() {
  Json c;
  c["data"] = "";
  c["data_format"] = "";
  c["test_data"] = "";
  c["holdout"] = 0.2;
  c["rescale"] = nullptr;
  c["synthetic"] = "two-cluster";
  c["n_points"] = 200;
  c["test_points"] = 0;
  c["dim"] = 64;
  c["separation"] = 20.0;
  c["width"] = 1.0;
  c["half_width"] = 1.0;
  c["components"] = 4;
  c["spread"] = 10.0;
  c["scale"] = 1.0;
  c["c"] = kDefaultShellC;
  c["sigma_min"] = 0.002;
  c["sigma_max"] = 80.0;
  c["grid_points"] = 40;
  c["samples"] = 0;
  c["seed"] = 20240611;
  c["quick"] = false;
  c["format"] = "csv";
  c["schedule"] = {{"sigma_max", kEdmSigmaMax}, {"sigma_min", kEdmSigmaMin}, {"steps", kEdmSteps}, {"rho", kEdmRho}};
  c["tau_cov"] = 0.5;
  c["tau_w"] = 0.5;
  c["weight_base"] = kDefaultBasePoints;
  c["weight_noise"] = kDefaultNoiseDraws;
  c["coverage_noise"] = 64;
  c["q"] = 0.95;
  c["delta"] = 0.05;
  c["points"] = 20;
  c["point"] = -1;
  c["method"] = "heun";
  c["euler_last_step"] = true;
  c["denoiser"] = {{"kind", "empirical"}};
  c["insert"] = {{"kind", "gaussian"}};
  c["band_lo"] = kMediumBandLo;
  c["band_hi"] = kMediumBandHi;
  c["dump_terminals"] = false;
  c["per_noise_sigma"] = nullptr;
  c["per_noise_cutoff"] = 0.5;
  c["records"] = false;
  c["zone"] = nullptr;
  c["buffer"] = 0.0;
  c["spectrum"] = nullptr;
  c["power_laws"] = {0.5, 1.0, 2.0, 4.0};
  c["spike"] = 100.0;
  c["spike_floor"] = 1e-6;
  c["spectral_sigma"] = 1.0;
  c["cutoff"] = 1e-3;
  c["checks"] = Json::array();
  return c;
}

void merge_config(Json& base, const Json& overlay, const std::string& where) {
  if (!overlay.is_object()) throw InputError(where + ": config must be a JSON object");
  for (const auto& [key, value] : overlay.items()) {
    if (!base.contains(key)) throw InputError(where + ": unknown config key '" + key + "'");
    if (base[key].is_object() && value.is_object())
      merge_config(base[key], value, where + "." + key);
    else
      base[key] = value;
  }
}

Json parse_json_argument(const std::string& text) {
  if (!text.empty() && text.front() == '{') return Json::parse(text);
  std::ifstream in(text);
  if (!in) throw InputError("cannot open " + text);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InputError(text + ": " + e.what());
  }
}

// Flags write into the effective config only when given on the command line.
class FlagSet {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& flag, std::string key, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *value, help);
    appliers_.push_back([value, opt, key = std::move(key)](Json& cfg) {
      if (opt->count() > 0) set_path(cfg, key, Json(*value));
    });
    return opt;
  }

  void add_switch(CLI::App* app, const std::string& flag, std::string key, const std::string& help) {
    auto value = std::make_shared<bool>(false);
    CLI::Option* opt = app->add_flag(flag, *value, help);
    appliers_.push_back([value, opt, key = std::move(key)](Json& cfg) {
      if (opt->count() > 0) cfg[key] = *value;
    });
  }

  void add_json(CLI::App* app, const std::string& flag, std::string key, const std::string& help) {
    auto value = std::make_shared<std::string>();
    CLI::Option* opt = app->add_option(flag, *value, help);
    appliers_.push_back([value, opt, key = std::move(key)](Json& cfg) {
      if (opt->count() > 0) cfg[key] = parse_json_argument(*value);
    });
  }

  void apply(Json& cfg) const {
    for (const auto& f : appliers_) f(cfg);
  }

 private:
  static void set_path(Json& cfg, const std::string& key, Json value) {
    const auto dot = key.find('.');
    if (dot == std::string::npos)
      cfg[key] = std::move(value);
    else
      cfg[key.substr(0, dot)][key.substr(dot + 1)] = std::move(value);
  }

  std::vector<std::function<void(Json&)>> appliers_;
};

struct Invocation {
  std::string command;
  Json config;
  fs::path out;
  bool out_given = false;
  std::string hash;
  std::ostream* err = nullptr;

  std::uint64_t seed() const { return config.at("seed").get<std::uint64_t>(); }
  bool quick() const { return config.at("quick").get<bool>(); }
  bool json_tables() const { return config.at("format").get<std::string>() == "json"; }

  /// The shared --samples count, or a per-command default (quartered under --quick).
  std::size_t samples(std::size_t full) const {
    const auto s = config.at("samples").get<std::size_t>();
    if (s > 0) return s;
    return quick() ? std::max<std::size_t>(1, full / 4) : full;
  }

  std::vector<std::string> comments() const {
    return {"memgeom " + std::string(kVersion) + " " + command, "seed=" + std::to_string(seed()), "config_hash=" + hash};
  }

  Json meta() const {
    return {{"version", kVersion}, {"command", command}, {"seed", seed()}, {"config_hash", hash}, {"config", config}};
  }

  fs::path path(const std::string& name) const { return out / name; }
};

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_table(const Invocation& inv, const std::string& stem, const DiagnosticCurve& curve) {
  if (inv.json_tables()) {
    Json j = to_json(curve);
    j["meta"] = inv.meta();
    write_json(inv.path(stem + ".json"), j);
  } else {
    write_curve_csv(inv.path(stem + ".csv"), curve, inv.comments());
  }
}

SigmaGrid grid_from(const Json& cfg) {
  return SigmaGrid::log_uniform(cfg.at("sigma_min").get<double>(), cfg.at("sigma_max").get<double>(), cfg.at("grid_points").get<int>());
}

NoiseSchedule schedule_from(const Json& cfg) {
  const auto& s = cfg.at("schedule");
  return edm_schedule(s.at("sigma_max").get<double>(), s.at("sigma_min").get<double>(), s.at("steps").get<int>(), s.at("rho").get<double>());
}

ShellSpec shell_from(const Json& cfg, Index dim) { return shell_radii(dim, cfg.at("c").get<double>()); }

SyntheticSpec synthetic_from(const Json& cfg) {
  SyntheticSpec spec;
  spec.kind = parse_synthetic_kind(cfg.at("synthetic").get<std::string>());
  spec.n_points = cfg.at("n_points").get<Index>();
  spec.dim = cfg.at("dim").get<Index>();
  spec.separation = cfg.at("separation").get<double>();
  spec.width = cfg.at("width").get<double>();
  spec.half_width = cfg.at("half_width").get<double>();
  spec.components = cfg.at("components").get<Index>();
  spec.spread = cfg.at("spread").get<double>();
  spec.scale = cfg.at("scale").get<double>();
  spec.seed = cfg.at("seed").get<std::uint64_t>();
  return spec;
}

Dataset load_file(const Json& cfg, const std::string& key) {
  const fs::path path = cfg.at(key).get<std::string>();
  const auto fmt = cfg.at("data_format").get<std::string>();
  Dataset ds = load_dataset(path, fmt.empty() ? format_from_extension(path) : parse_data_format(fmt));
  const auto& r = cfg.at("rescale");
  if (r.is_null()) return ds;
  if (!r.is_array() || r.size() != 2) throw InputError("rescale expects [lo, hi]");
  return rescale(ds, r[0].get<double>(), r[1].get<double>());
}

Dataset take_rows(const Dataset& ds, const std::vector<Index>& rows, const std::string& label) {
  RowMatrix<double> v(static_cast<Index>(rows.size()), ds.dim());
  for (std::size_t i = 0; i < rows.size(); ++i) v.row(static_cast<Index>(i)) = ds.row(rows[i]);
  return Dataset(std::move(v), label);
}

struct Data {
  DatasetPtr train;
  DatasetPtr test;
};

/// Synthetic test points are a fresh draw with seed + 1; file data without --test-data is
/// split by a seeded holdout.
Data load_data(const Json& cfg, bool needs_test) {
  Data d;
  if (cfg.at("data").get<std::string>().empty()) {
    auto spec = synthetic_from(cfg);
    d.train = std::make_shared<const Dataset>(synthesize(spec));
    if (needs_test) {
      spec.seed += 1;
      const auto n_test = cfg.at("test_points").get<Index>();
      if (n_test > 0) spec.n_points = n_test;
      d.test = std::make_shared<const Dataset>(synthesize(spec));
    }
    return d;
  }
  Dataset full = load_file(cfg, "data");
  if (!needs_test) {
    d.train = std::make_shared<const Dataset>(std::move(full));
    return d;
  }
  if (!cfg.at("test_data").get<std::string>().empty()) {
    d.train = std::make_shared<const Dataset>(std::move(full));
    d.test = std::make_shared<const Dataset>(load_file(cfg, "test_data"));
    require(d.test->dim() == d.train->dim(), "test data dimension differs from training data");
    return d;
  }
  const Index n = full.n_points();
  const auto k = static_cast<Index>(std::llround(cfg.at("holdout").get<double>() * static_cast<double>(n)));
  if (k < 1 || k >= n) throw InputError("holdout fraction leaves an empty training or test split");
  auto perm = sample_without_replacement(n, n, cfg.at("seed").get<std::uint64_t>(), salt::kHoldout);
  std::vector<Index> test(perm.begin(), perm.begin() + k);
  std::vector<Index> train(perm.begin() + k, perm.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  d.train = std::make_shared<const Dataset>(take_rows(full, train, full.label()));
  d.test = std::make_shared<const Dataset>(take_rows(full, test, full.label() + " (holdout)"));
  return d;
}

RegimeReport compute_regime(const Invocation& inv, const Data& data, const SigmaGrid& grid) {
  const auto& cfg = inv.config;
  RegimeSampling sampling;
  sampling.coverage_noise = inv.samples(cfg.at("coverage_noise").get<std::size_t>());
  sampling.weight_base = std::min<Index>(cfg.at("weight_base").get<Index>(), data.train->n_points());
  sampling.weight_noise = inv.quick() ? cfg.at("weight_noise").get<std::size_t>() / 4 : cfg.at("weight_noise").get<std::size_t>();
  const RegimeThresholds thresholds{cfg.at("tau_cov").get<double>(), cfg.at("tau_w").get<double>()};
  return regime_report(*data.train, *data.test, shell_from(cfg, data.train->dim()), grid, sampling, thresholds, inv.seed());
}

int cmd_curves(const Invocation& inv, std::ostream& out) {
  const auto data = load_data(inv.config, true);
  const auto grid = grid_from(inv.config);
  const auto report = compute_regime(inv, data, grid);
  write_table(inv, "coverage", report.coverage_curve);
  write_table(inv, "weight", report.weight_curve);
  Json j = to_json(report);
  j["meta"] = inv.meta();
  write_json(inv.path("regime_report.json"), j);
  out << "danger zone: ";
  if (report.danger_zone)
    out << format_double(report.danger_zone->lo) << " .. " << format_double(report.danger_zone->hi) << '\n';
  else
    out << "none\n";
  return kExitOk;
}

int cmd_bounds(const Invocation& inv, std::ostream& out) {
  const auto& cfg = inv.config;
  const auto data = load_data(cfg, true);
  const auto grid = grid_from(cfg);
  const auto shell = shell_from(cfg, data.train->dim());
  const ShellSampleBank bank(shell.dim, inv.samples(1'000'000), inv.seed());
  const PhiTable table(shell, bank);
  const std::size_t n_noise = inv.quick() ? cfg.at("coverage_noise").get<std::size_t>() / 4 : cfg.at("coverage_noise").get<std::size_t>();
  Json rows = Json::array();
  std::ostringstream csv;
  for (const auto& line : inv.comments()) csv << "# " << line << '\n';
  csv << "sigma,coverage,coverage_stderr,lower,lower_stderr,upper,upper_raw,upper_stderr\n";
  std::size_t outside = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double s = grid[k];
    const auto cov = coverage(*data.train, shell, *data.test, s, n_noise, inv.seed());
    const auto b = coverage_bounds(*data.train, shell, *data.test, s, table, inv.seed());
    if (sandwich_margin(cov, b) < 0.0) ++outside;
    csv << format_double(s) << ',' << format_double(cov.mean) << ',' << format_double(cov.std_error) << ',' << format_double(b.lower) << ','
        << format_double(b.lower_std_error) << ',' << format_double(b.upper) << ',' << format_double(b.upper_raw) << ','
        << format_double(b.upper_std_error) << '\n';
    Json row = to_json(b);
    row["sigma"] = s;
    row["coverage"] = cov.mean;
    row["coverage_stderr"] = cov.std_error;
    rows.push_back(std::move(row));
  }
  if (inv.json_tables()) {
    write_json(inv.path("bounds.json"), {{"meta", inv.meta()}, {"shell", to_json(shell)}, {"rows", rows}});
  } else {
    std::ofstream f(inv.path("bounds.csv"), std::ios::binary);
    if (!f) throw InputError("cannot write " + inv.path("bounds.csv").string());
    f << csv.str();
  }
  table.write_csv(inv.path("phi_table.csv"), inv.comments());
  out << outside << " of " << grid.size() << " knots outside the sandwich\n";
  return outside == 0 ? kExitOk : kExitValidation;
}

int cmd_thresholds(const Invocation& inv, std::ostream& out) {
  const auto& cfg = inv.config;
  const auto data = load_data(cfg, false);
  const Index n = data.train->n_points();
  std::vector<Index> points;
  if (const auto p = cfg.at("point").get<Index>(); p >= 0) {
    require(p < n, "point index out of range");
    points.push_back(p);
  } else {
    points = sample_without_replacement(n, std::min<Index>(cfg.at("points").get<Index>(), n), inv.seed(), salt::kPointPick);
  }
  const double q = cfg.at("q").get<double>();
  const double delta = cfg.at("delta").get<double>();
  const std::size_t trials = inv.samples(1000);
  Json results = Json::array();
  std::vector<double> highs(points.size(), 0.0), lows(points.size(), 0.0);
  std::vector<Json> entries(points.size());
  parallel_for(points.size(), [&](std::size_t k) {
    const auto v = validate_thresholds(*data.train, points[k], q, delta, trials, inv.seed());
    highs[k] = v.report.sigma_high.value_or(std::numeric_limits<double>::quiet_NaN());
    lows[k] = v.report.sigma_low;
    entries[k] = to_json(v);
  });
  bool all_pass = true;
  double sum_high = 0.0, sum_low = 0.0;
  std::size_t n_high = 0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    all_pass = all_pass && entries[k].at("passed").get<bool>();
    results.push_back(std::move(entries[k]));
    if (!std::isnan(highs[k])) {
      sum_high += highs[k];
      ++n_high;
    }
    sum_low += lows[k];
  }
  Json avg;
  avg["sigma_high"] = n_high ? Json(sum_high / static_cast<double>(n_high)) : Json(nullptr);
  avg["sigma_low"] = sum_low / static_cast<double>(points.size());
  write_json(inv.path("thresholds.json"), {{"meta", inv.meta()}, {"averages", avg}, {"points", results}});
  out << "average sigma_low " << format_double(avg["sigma_low"].get<double>()) << " over " << points.size() << " points\n";
  return all_pass ? kExitOk : kExitValidation;
}

IntegrateOptions integrate_options(const Json& cfg) {
  return {parse_integrator(cfg.at("method").get<std::string>()), cfg.at("euler_last_step").get<bool>()};
}

int cmd_sample(const Invocation& inv, std::ostream& out) {
  const auto& cfg = inv.config;
  const bool per_noise = !cfg.at("per_noise_sigma").is_null();
  const auto data = load_data(cfg, per_noise);
  const auto den = denoiser_from_json(cfg.at("denoiser"), {data.train});
  require(den->dim() == data.train->dim(), "denoiser dimension differs from the data");
  const auto schedule = schedule_from(cfg);
  const auto opts = integrate_options(cfg);
  const std::size_t n = inv.samples(256);
  const auto terminals = sample_terminals(*den, schedule, n, inv.seed(), opts);
  const auto report = memorization_report(*data.train, terminals);
  const bool records = cfg.at("records").get<bool>();
  Json j = {{"meta", inv.meta()}, {"denoiser", to_json(*den)}, {"schedule", schedule.sigmas()}, {"trajectories", to_json(report, records)}};
  if (per_noise) {
    const double s = cfg.at("per_noise_sigma").get<double>();
    const auto pn = per_noise_memorization(*den, *data.train, *data.test, s, inv.quick() ? 16 : 64, inv.seed());
    j["per_noise"] = to_json(pn, records);
    const double cutoff = cfg.at("per_noise_cutoff").get<double>();
    j["per_noise"]["sigma"] = s;
    j["per_noise"]["cutoff"] = cutoff;
    j["per_noise"]["memorized_at_sigma"] = pn.rate >= cutoff;
  }
  write_json(inv.path("memorization.json"), j);
  if (cfg.at("dump_terminals").get<bool>()) save_dataset(Dataset(terminals, "terminals"), inv.path("terminals.f64"), DataFormat::raw_f64);
  out << "memorization rate " << format_double(report.rate) << " (" << report.n_memorized << " of " << report.n_samples << ")\n";
  return kExitOk;
}

int cmd_swap(const Invocation& inv, std::ostream& out) {
  const auto& cfg = inv.config;
  const auto data = load_data(cfg, false);
  const DenoiserContext ctx{data.train};
  const auto base = denoiser_from_json(cfg.at("denoiser"), ctx);
  const auto insert = denoiser_from_json(cfg.at("insert"), ctx);
  const auto schedule = schedule_from(cfg);
  const double lo = cfg.at("band_lo").get<double>();
  const double hi = cfg.at("band_hi").get<double>();
  const auto r = swap_experiment(base, insert, lo, hi, *data.train, schedule, inv.samples(256), inv.seed(), integrate_options(cfg));
  write_json(inv.path("swap.json"), {{"meta", inv.meta()},
                                     {"band", {{"lo", lo}, {"hi", hi}}},
                                     {"baseline", to_json(r.baseline)},
                                     {"swapped", to_json(r.swapped)},
                                     {"composite", to_json(*r.composite)}});
  out << "baseline rate " << format_double(r.baseline.rate) << ", swapped rate " << format_double(r.swapped.rate) << '\n';
  return kExitOk;
}

int cmd_gap(const Invocation& inv, std::ostream& out) {
  const auto& cfg = inv.config;
  const auto grid = grid_from(cfg);
  const auto schedule = schedule_from(cfg);
  const double buffer = cfg.at("buffer").get<double>();
  GapMask mask;
  Json zone;
  if (const auto& z = cfg.at("zone"); !z.is_null()) {
    if (!z.is_array() || z.size() != 2) throw InputError("zone expects [lo, hi]");
    const SigmaInterval interval{z[0].get<double>(), z[1].get<double>()};
    require(interval.lo > 0.0 && interval.lo <= interval.hi, "zone needs 0 < lo <= hi");
    mask = gap_mask(interval, buffer, schedule);
    zone = {{"lo", interval.lo}, {"hi", interval.hi}, {"source", "config"}};
  } else {
    const auto data = load_data(cfg, true);
    const auto report = compute_regime(inv, data, grid);
    if (!report.danger_zone) throw InputError("no danger zone found on the grid; pass an explicit zone");
    mask = gap_mask(report, buffer, schedule);
    zone = {{"lo", report.danger_zone->lo}, {"hi", report.danger_zone->hi}, {"source", "regime"}};
  }
  if (inv.json_tables()) {
    Json rows = Json::array();
    for (const double s : grid.sigmas()) rows.push_back({{"sigma", s}, {"weight", mask.weight(s)}});
    write_json(inv.path("gap_weights.json"), {{"meta", inv.meta()}, {"rows", rows}});
  } else {
    write_gap_weights_csv(inv.path("gap_weights.csv"), mask, grid, inv.comments());
  }
  Json j = to_json(mask);
  j["zone"] = zone;
  j["buffer"] = buffer;
  j["schedule"] = schedule.sigmas();
  j["meta"] = inv.meta();
  write_json(inv.path("gap_steps.json"), j);
  if (!mask.gap) *inv.err << "warning: danger zone lies outside the schedule range; no steps excluded\n";
  out << mask.excluded_steps.size() << " of " << schedule.n_steps() << " schedule steps excluded\n";
  return kExitOk;
}

int cmd_spectral(const Invocation& inv, std::ostream& out) {
  const auto& cfg = inv.config;
  const auto d = cfg.at("dim").get<Index>();
  const double sigma = cfg.at("spectral_sigma").get<double>();
  std::vector<LabeledSpectrum> family;
  for (const auto& p : cfg.at("power_laws")) {
    const double e = p.get<double>();
    family.push_back({"power-law p=" + format_double(e), power_law_spectrum(d, e)});
  }
  if (const double spike = cfg.at("spike").get<double>(); spike > 0.0)
    family.push_back({"spike", spike_spectrum(d, spike, cfg.at("spike_floor").get<double>())});
  Vector target;
  if (const auto& s = cfg.at("spectrum"); !s.is_null()) {
    target = vector_from_json(s);
    family.push_back({"configured", target});
  } else {
    require(!family.empty(), "spectral needs a spectrum or a non-empty family");
    target = family.front().spectrum;
  }
  const auto profile = sensitivity_profile(CirculantModel::from_spectrum(target), sigma);
  if (inv.json_tables()) {
    Json j = to_json(profile);
    j["meta"] = inv.meta();
    write_json(inv.path("spectral_profile.json"), j);
  } else {
    std::ofstream f(inv.path("spectral_profile.csv"), std::ios::binary);
    if (!f) throw InputError("cannot write " + inv.path("spectral_profile.csv").string());
    for (const auto& line : inv.comments()) f << "# " << line << '\n';
    f << "# tv=" << format_double(profile.tv) << '\n';
    f << "n,abs_q,bound\n";
    for (Index k = 1; k <= profile.bounds.size(); ++k)
      f << k << ',' << format_double(std::abs(profile.q[k])) << ',' << format_double(profile.bounds[k - 1]) << '\n';
  }
  Json rows = Json::array();
  for (const auto& r : spectrum_concentration_sweep(family, sigma, cfg.at("cutoff").get<double>())) rows.push_back(to_json(r));
  write_json(inv.path("sweep.json"), {{"meta", inv.meta()}, {"sigma", sigma}, {"rows", rows}});
  out << "TV(h) = " << format_double(profile.tv) << '\n';
  return kExitOk;
}

int cmd_validate(const Invocation& inv, std::ostream& out) {
  const auto& cfg = inv.config;
  if (!cfg.at("data").get<std::string>().empty()) (void)load_file(cfg, "data");
  ValidationOptions opts;
  opts.quick = inv.quick();
  opts.seed = inv.seed();
  const auto only = cfg.at("checks").get<std::vector<int>>();
  const auto results = run_validation(opts, only);
  bool ok = true;
  Json checks = Json::array();
  for (const auto& r : results) {
    out << format_result(r) << '\n';
    ok = ok && (r.passed || r.skipped);
    checks.push_back({{"id", r.id}, {"name", r.name}, {"passed", r.passed}, {"skipped", r.skipped}, {"detail", r.detail}});
  }
  if (inv.out_given) write_json(inv.path("validation.json"), {{"meta", inv.meta()}, {"checks", checks}});
  out << (ok ? "all checks passed" : "some checks failed") << '\n';
  return ok ? kExitOk : kExitValidation;
}

using Command = std::function<int(const Invocation&, std::ostream&)>;

struct Subcommand {
  const char* name;
  const char* help;
  Command run;
};

const std::vector<Subcommand>& subcommands() {
  static const std::vector<Subcommand> all = {
      {"curves", "Coverage and max-weight curves with the danger zone", cmd_curves},
      {"bounds", "Coverage with its lower and upper bounds per sigma", cmd_bounds},
      {"thresholds", "Weight concentration thresholds with Monte Carlo validation", cmd_thresholds},
      {"sample", "Probability-flow sampling and memorization rate", cmd_sample},
      {"swap", "Memorization with a different denoiser on a sigma band", cmd_swap},
      {"gap", "Training-weight gap around the danger zone", cmd_gap},
      {"spectral", "Circulant sensitivity profile and concentration sweep", cmd_spectral},
      {"validate", "Run the property suite", cmd_validate},
  };
  return all;
}

void add_common(CLI::App* app, FlagSet& f) {
  f.add<std::string>(app, "--data", "data", "Training data file (.csv or .f64)");
  f.add<std::string>(app, "--data-format", "data_format", "csv or raw-f64 (default: from extension)");
  f.add<std::string>(app, "--test-data", "test_data", "Test points file");
  f.add<double>(app, "--holdout", "holdout", "Test fraction split off file data without --test-data");
  f.add<std::string>(app, "--synthetic", "synthetic", "gaussian-mixture, two-cluster or uniform-cube");
  f.add<Index>(app, "--n-points", "n_points", "Synthetic dataset size");
  f.add<Index>(app, "--test-points", "test_points", "Synthetic test set size (default: n-points)");
  f.add<Index>(app, "--dim", "dim", "Synthetic dimension");
  f.add<double>(app, "--separation", "separation", "Two-cluster center distance");
  f.add<double>(app, "--width", "width", "Two-cluster standard deviation");
  f.add<double>(app, "--half-width", "half_width", "Uniform-cube half width");
  f.add<Index>(app, "--components", "components", "Gaussian-mixture components");
  f.add<double>(app, "--spread", "spread", "Gaussian-mixture mean spread");
  f.add<double>(app, "--scale", "scale", "Gaussian-mixture component scale");
  f.add<std::vector<double>>(app, "--rescale", "rescale", "Map [lo, hi] affinely to [-1, 1]")->expected(2);
  f.add<double>(app, "--c", "c", "Shell width constant");
  f.add<double>(app, "--sigma-min", "sigma_min", "Smallest grid sigma");
  f.add<double>(app, "--sigma-max", "sigma_max", "Largest grid sigma");
  f.add<int>(app, "--grid-points", "grid_points", "Grid knots");
  f.add<std::size_t>(app, "--samples", "samples", "Main Monte Carlo count of the subcommand");
  f.add<std::uint64_t>(app, "--seed", "seed", "Random seed");
  f.add_switch(app, "--quick", "quick", "Reduced sample counts");
  f.add<std::string>(app, "--format", "format", "csv or json tables");
  f.add<double>(app, "--schedule-sigma-max", "schedule.sigma_max", "Sampler schedule start");
  f.add<double>(app, "--schedule-sigma-min", "schedule.sigma_min", "Sampler schedule end");
  f.add<int>(app, "--steps", "schedule.steps", "Sampler schedule knots");
  f.add<double>(app, "--rho", "schedule.rho", "Sampler schedule exponent");
}

void add_specific(const std::string& name, CLI::App* app, FlagSet& f) {
  if (name == "curves" || name == "gap") {
    f.add<double>(app, "--tau-cov", "tau_cov", "Coverage threshold of the danger zone");
    f.add<double>(app, "--tau-w", "tau_w", "Max-weight threshold of the danger zone");
    f.add<Index>(app, "--weight-base", "weight_base", "Base rows for the max-weight curve");
    f.add<std::size_t>(app, "--weight-noise", "weight_noise", "Noise draws per base row");
  }
  if (name == "bounds") f.add<std::size_t>(app, "--coverage-noise", "coverage_noise", "Noise draws per test point");
  if (name == "thresholds") {
    f.add<double>(app, "--q", "q", "Weight level");
    f.add<double>(app, "--delta", "delta", "Failure probability");
    f.add<Index>(app, "--points", "points", "Random training points to report");
    f.add<Index>(app, "--point", "point", "Single training point index");
  }
  if (name == "sample" || name == "swap") {
    f.add<std::string>(app, "--method", "method", "euler or heun");
    f.add<bool>(app, "--euler-last-step", "euler_last_step", "Plain Euler on the final step");
    f.add_json(app, "--denoiser", "denoiser", "Denoiser config (JSON text or file)");
  }
  if (name == "sample") {
    f.add_switch(app, "--dump-terminals", "dump_terminals", "Write terminals.f64");
    f.add<double>(app, "--per-noise-sigma", "per_noise_sigma", "Also report per-noise memorization at this sigma");
    f.add<double>(app, "--per-noise-cutoff", "per_noise_cutoff", "Rate at or above which the data counts as memorized at that sigma");
    f.add_switch(app, "--records", "records", "Include per-sample records");
  }
  if (name == "swap") {
    f.add_json(app, "--insert", "insert", "Denoiser used inside the band (JSON text or file)");
    f.add<double>(app, "--band-lo", "band_lo", "Band lower edge");
    f.add<double>(app, "--band-hi", "band_hi", "Band upper edge");
  }
  if (name == "gap") {
    f.add<std::vector<double>>(app, "--zone", "zone", "Explicit danger zone lo hi")->expected(2);
    f.add<double>(app, "--buffer", "buffer", "Multiplicative buffer on each end");
  }
  if (name == "spectral") {
    f.add<std::vector<double>>(app, "--power-laws", "power_laws", "Power-law exponents of the sweep");
    f.add<double>(app, "--spike", "spike", "Spike height (0 disables)");
    f.add<double>(app, "--spectral-sigma", "spectral_sigma", "Noise level of the filter");
    f.add<double>(app, "--cutoff", "cutoff", "Decay index cutoff");
    f.add_json(app, "--spectrum", "spectrum", "Spectrum as a JSON array or file");
  }
  if (name == "validate") f.add<std::vector<int>>(app, "--checks", "checks", "Subset of check ids");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Geometric memorization diagnostics for diffusion denoisers", "memgeom"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  unsigned workers = 1;
  std::map<std::string, FlagSet> flags;
  for (const auto& sc : subcommands()) {
    CLI::App* sub = app.add_subcommand(sc.name, sc.help);
    sub->add_option("--config", config_path, "JSON config file; flags override its values");
    sub->add_option("--out", out_dir, "Output directory (created if missing)");
    sub->add_option("--workers", workers, "Worker threads (0: all cores)");
    auto& f = flags[sc.name];
    add_common(sub, f);
    add_specific(sc.name, sub, f);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    const auto& sc = *std::find_if(subcommands().begin(), subcommands().end(),
                                   [&](const Subcommand& s) { return app.got_subcommand(s.name); });
    Invocation inv;
    inv.command = sc.name;
    inv.config = default_config();
    if (!config_path.empty()) merge_config(inv.config, parse_json_argument(config_path), config_path);
    flags[sc.name].apply(inv.config);
    inv.err = &err;
    inv.out_given = !out_dir.empty();
    inv.out = inv.out_given ? fs::path(out_dir) : fs::current_path();
    inv.hash = hex64(fnv1a(inv.command + '\n' + inv.config.dump()));
    const auto fmt = inv.config.at("format").get<std::string>();
    if (fmt != "csv" && fmt != "json") throw InputError("format must be csv or json");
    if (inv.command != "validate" || inv.out_given) fs::create_directories(inv.out);
    set_worker_count(workers);
    return sc.run(inv, out);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const Json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace memgeom
