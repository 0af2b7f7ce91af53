#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "phigeo/hierarchy.hpp"
#include "phigeo/io.hpp"
#include "phigeo/split_model.hpp"

namespace phigeo {

std::string_view version();

enum class Units { kNats, kBits };

std::string_view units_name(Units units);
std::optional<Units> parse_units(std::string_view name);
double to_units(double nats, Units units);

struct MeasureDiagnostics {
  SplitModelKind kind = SplitModelKind::kFS;
  std::string status;  // solver status, or "error"
  std::string error;
  int iterations = 0;
  double residual = 0;
  std::optional<double> kl;  // D(p : q*) recomputed from q*, nats
  std::optional<double> gradient_norm;
  bool smoothed = false;
  std::optional<double> beta_star;
  std::optional<int> restarts;
  std::optional<int> best_restart;
};

// Measure values and diagnostics are stored in nats; emitters convert.
struct PhiReport {
  std::string label;
  Units units = Units::kNats;
  int n = 0;
  SystemType type = SystemType::kDiscrete;
  MeasureValues values;
  HierarchyReport hierarchy;
  std::vector<MeasureDiagnostics> diagnostics;
  std::vector<std::string> warnings;
  std::uint64_t seed = 0;
  std::string version;
};

struct ComputeOptions {
  // Empty selects every measure defined for the system type.
  std::vector<SplitModelKind> measures;
  Units units = Units::kNats;
  double tol = 1e-6;
  std::uint64_t seed = 0;  // used when the config has no seed
};

// Measures that apply to a system type: I, FS, DS, MD, G for discrete and
// I, FS, DS, G for gaussian.
std::vector<SplitModelKind> applicable_measures(SystemType type);

// Runs the selected measures; a failing measure is recorded in the
// diagnostics and reported as null. The hierarchy always uses I(X;Y).
// Requesting MD for a gaussian system is E_INVALID_ARGUMENT.
PhiReport compute_report(const SystemConfig& config, const ComputeOptions& options);

// JSON keys: label, units, n, type, I, phi_fs, phi_ds, phi_md, phi_g,
// hierarchy, diagnostics, version, seed. Missing measures are null.
std::string report_json(const PhiReport& report);

// label,I,phi_fs,phi_ds,phi_md,phi_g,flags with six decimals; flags are
// ';'-separated (fs_exceeds_mi, violation, failed:<measure>, nonfinite).
std::string report_csv_header();
std::string report_csv_row(const PhiReport& report);
std::string report_flags(const PhiReport& report);

// Aligned text table with six decimals.
std::string report_table(const PhiReport& report);

// Six-decimal fixed notation, "nan"/"inf" for non-finite values.
std::string format_fixed6(double v);

}  // namespace phigeo
