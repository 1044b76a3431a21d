#pragma once

#include "memgeom/concentration.hpp"
#include "memgeom/denoise.hpp"
#include "memgeom/regime.hpp"
#include "memgeom/sampler.hpp"
#include "memgeom/shells.hpp"
#include "memgeom/spectral.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace memgeom {

using Json = nlohmann::ordered_json;

Json to_json(const Vector& v);
Vector vector_from_json(const Json& j);
Json to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

Json to_json(const DiagnosticCurve& curve);
Json to_json(const ShellSpec& spec);
Json to_json(const CoverageBounds& bounds);
Json to_json(const ThresholdReport& report);
Json to_json(const ThresholdValidation& validation);
Json to_json(const CosineBoundReport& report);
Json to_json(const MemorizationReport& report, bool with_records = false);
Json to_json(const RegimeReport& report);
Json to_json(const GapMask& mask);
Json to_json(const SensitivityProfile& profile);
Json to_json(const SweepRow& row);

/// What named references inside a denoiser config resolve to.
struct DenoiserContext {
  /// Target of {"kind": "empirical"} without a path, and of "from": "training".
  DatasetPtr training;
};

/// Kinds: empirical {data?}, gaussian {mean, covariance} or {from: "training"},
/// constant {value} or {value: "mean"}, composite {bands: [{lo, hi, denoiser}]}.
DenoiserPtr denoiser_from_json(const Json& j, const DenoiserContext& context);
/// Empirical datasets are written as a label only.
Json to_json(const DenoiserSpec& spec);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t value);

}  // namespace memgeom
