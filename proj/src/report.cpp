#include "phigeo/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "phigeo/error.hpp"
#include "phigeo/gaussian.hpp"
#include "phigeo/phi_discrete.hpp"

#ifndef PHIGEO_VERSION
#define PHIGEO_VERSION "0.0.0"
#endif

namespace phigeo {

namespace {

using OrderedJson = nlohmann::ordered_json;

bool wants(const std::vector<SplitModelKind>& kinds, SplitModelKind kind) {
  return std::find(kinds.begin(), kinds.end(), kind) != kinds.end();
}

MeasureDiagnostics diagnostics_of(const MeasureOutcome& m) {
  MeasureDiagnostics d;
  d.kind = m.kind;
  if (!m.result) {
    d.status = "error";
    d.error = m.error;
    return d;
  }
  const PhiDiagnostics& src = m.result->diagnostics;
  d.status = src.status;
  d.iterations = src.iterations;
  d.residual = src.residual;
  d.kl = src.kl;
  d.smoothed = src.smoothed;
  d.beta_star = src.beta_star;
  if (m.kind == SplitModelKind::kG) {
    d.restarts = src.restarts;
    d.best_restart = src.best_restart;
  }
  return d;
}

void run_discrete(const SystemConfig& config, const std::vector<SplitModelKind>& kinds,
                  double tol, std::uint64_t seed, PhiReport& report) {
  const DiscreteJoint p = config.discrete_joint();
  const PhiSuite suite = phi_all(p, tol, seed, kinds);
  report.values = suite.values();
  report.hierarchy = suite.hierarchy;
  for (const MeasureOutcome& m : suite.measures) {
    report.diagnostics.push_back(diagnostics_of(m));
  }
}

void run_gaussian(const SystemConfig& config, const std::vector<SplitModelKind>& kinds,
                  double tol, PhiReport& report) {
  const GaussianSystem& sys = config.gaussian_system();
  const GaussianJoint joint = joint_covariance(sys);
  const double mi = gaussian_mutual_info(sys);

  MeasureValues values;
  values.i = mi;
  for (SplitModelKind kind : kAllSplitModels) {
    if (!wants(kinds, kind)) continue;
    MeasureDiagnostics d;
    d.kind = kind;
    if (kind == SplitModelKind::kI) {
      GaussianJoint q = joint;
      q.cov.topRightCorner(sys.n, sys.n).setZero();
      q.cov.bottomLeftCorner(sys.n, sys.n).setZero();
      d.status = "ok";
      d.kl = gaussian_kl(joint, q);
      report.diagnostics.push_back(d);
      continue;
    }
    try {
      GaussianSplitResult r;
      switch (kind) {
        case SplitModelKind::kFS: r = phi_fs_gauss(sys); break;
        case SplitModelKind::kDS: r = phi_ds_gauss(sys); break;
        case SplitModelKind::kG: r = phi_g_gauss(sys); break;
        default: continue;
      }
      d.status = r.status;
      d.iterations = r.iterations;
      d.residual = r.residual;
      d.gradient_norm = r.gradient_norm;
      const GaussianSystem projected{sys.n, sys.sigma_x, r.a_split, r.sigma_e_split};
      d.kl = gaussian_kl(joint, joint_covariance(projected));
      switch (kind) {
        case SplitModelKind::kFS: values.fs = r.phi; break;
        case SplitModelKind::kDS: values.ds = r.phi; break;
        case SplitModelKind::kG: values.g = r.phi; break;
        default: break;
      }
    } catch (const Error& e) {
      d.status = "error";
      d.error = e.what();
    }
    report.diagnostics.push_back(d);
  }
  report.hierarchy = verify_hierarchy(values, tol);
  if (!wants(kinds, SplitModelKind::kI)) values.i.reset();
  report.values = values;
}

OrderedJson number_or_null(const std::optional<double>& v, Units units) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return to_units(*v, units);
}

OrderedJson hierarchy_json(const HierarchyReport& h, Units units) {
  OrderedJson out;
  out["tol"] = to_units(h.tol, units);
  out["passed"] = h.all_passed();
  out["violations"] = h.violations();
  out["fs_exceeds_mi"] = h.fs_exceeds_mi;
  const double worst = h.worst_margin();
  out["worst_margin"] = std::isfinite(worst) ? OrderedJson(to_units(worst, units))
                                              : OrderedJson(nullptr);
  OrderedJson checks = OrderedJson::array();
  for (const HierarchyCheck& c : h.checks) {
    OrderedJson item;
    item["name"] = c.name;
    item["margin"] = to_units(c.margin, units);
    item["passed"] = c.passed;
    checks.push_back(std::move(item));
  }
  out["checks"] = std::move(checks);
  out["skipped"] = h.skipped;
  return out;
}

OrderedJson diagnostics_json(const PhiReport& r) {
  OrderedJson measures = OrderedJson::object();
  for (const MeasureDiagnostics& d : r.diagnostics) {
    OrderedJson item;
    item["status"] = d.status;
    if (!d.error.empty()) item["error"] = d.error;
    item["iterations"] = d.iterations;
    item["residual"] = d.residual;
    item["kl"] = number_or_null(d.kl, r.units);
    if (d.gradient_norm) item["gradient_norm"] = *d.gradient_norm;
    if (r.type == SystemType::kDiscrete) item["smoothed"] = d.smoothed;
    if (d.beta_star) item["beta_star"] = *d.beta_star;
    if (d.restarts) item["restarts"] = *d.restarts;
    if (d.best_restart) item["best_restart"] = *d.best_restart;
    measures[std::string(split_model_name(d.kind))] = std::move(item);
  }
  OrderedJson out;
  out["measures"] = std::move(measures);
  out["warnings"] = r.warnings;
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string cell(const std::optional<double>& v, Units units) {
  return v ? format_fixed6(to_units(*v, units)) : std::string();
}

}  // namespace

std::string_view version() { return PHIGEO_VERSION; }

std::string_view units_name(Units units) {
  return units == Units::kNats ? "nats" : "bits";
}

std::optional<Units> parse_units(std::string_view name) {
  if (name == "nats") return Units::kNats;
  if (name == "bits") return Units::kBits;
  return std::nullopt;
}

double to_units(double nats, Units units) {
  return units == Units::kNats ? nats : nats / std::numbers::ln2;
}

std::vector<SplitModelKind> applicable_measures(SystemType type) {
  std::vector<SplitModelKind> out;
  for (SplitModelKind kind : kAllSplitModels) {
    if (type == SystemType::kGaussian && kind == SplitModelKind::kMD) continue;
    out.push_back(kind);
  }
  return out;
}

PhiReport compute_report(const SystemConfig& config, const ComputeOptions& options) {
  std::vector<SplitModelKind> kinds = options.measures;
  if (kinds.empty()) kinds = applicable_measures(config.type);
  if (config.type == SystemType::kGaussian && wants(kinds, SplitModelKind::kMD)) {
    throw Error(ErrorCode::kInvalidArgument,
                "the mismatched-decoding measure is defined for discrete systems only");
  }

  PhiReport report;
  report.label = config.label.value_or("system");
  report.units = options.units;
  report.n = config.n;
  report.type = config.type;
  report.warnings = config.warnings;
  report.seed = config.seed.value_or(options.seed);
  report.version = std::string(version());

  if (config.type == SystemType::kDiscrete) {
    run_discrete(config, kinds, options.tol, report.seed, report);
    if (!wants(kinds, SplitModelKind::kI)) report.values.i.reset();
  } else {
    run_gaussian(config, kinds, options.tol, report);
  }
  return report;
}

std::string report_json(const PhiReport& r) {
  OrderedJson doc;
  doc["label"] = r.label;
  doc["units"] = std::string(units_name(r.units));
  doc["n"] = r.n;
  doc["type"] = std::string(system_type_name(r.type));
  doc["I"] = number_or_null(r.values.i, r.units);
  doc["phi_fs"] = number_or_null(r.values.fs, r.units);
  doc["phi_ds"] = number_or_null(r.values.ds, r.units);
  doc["phi_md"] = number_or_null(r.values.md, r.units);
  doc["phi_g"] = number_or_null(r.values.g, r.units);
  doc["hierarchy"] = hierarchy_json(r.hierarchy, r.units);
  doc["diagnostics"] = diagnostics_json(r);
  doc["version"] = r.version;
  doc["seed"] = r.seed;
  return doc.dump(2) + "\n";
}

std::string report_csv_header() { return "label,I,phi_fs,phi_ds,phi_md,phi_g,flags"; }

std::string report_flags(const PhiReport& r) {
  std::vector<std::string> flags;
  if (r.hierarchy.fs_exceeds_mi) flags.push_back("fs_exceeds_mi");
  if (!r.hierarchy.all_passed()) flags.push_back("violation");
  bool nonfinite = false;
  for (const MeasureDiagnostics& d : r.diagnostics) {
    if (d.status == "error") flags.push_back("failed:" + std::string(split_model_name(d.kind)));
  }
  for (const auto& v : {r.values.i, r.values.fs, r.values.ds, r.values.md, r.values.g}) {
    if (v && !std::isfinite(*v)) nonfinite = true;
  }
  if (nonfinite) flags.push_back("nonfinite");
  std::string out;
  for (std::size_t k = 0; k < flags.size(); ++k) {
    if (k) out += ';';
    out += flags[k];
  }
  return out;
}

std::string report_csv_row(const PhiReport& r) {
  return csv_field(r.label) + "," + cell(r.values.i, r.units) + "," +
         cell(r.values.fs, r.units) + "," + cell(r.values.ds, r.units) + "," +
         cell(r.values.md, r.units) + "," + cell(r.values.g, r.units) + "," +
         report_flags(r);
}

std::string report_table(const PhiReport& r) {
  std::ostringstream out;
  out << r.label << " (" << system_type_name(r.type) << ", n = " << r.n << ", "
      << units_name(r.units) << ")\n";
  const std::pair<const char*, std::optional<double>> rows[] = {
      {"I", r.values.i},        {"phi_fs", r.values.fs}, {"phi_ds", r.values.ds},
      {"phi_md", r.values.md},  {"phi_g", r.values.g}};
  for (const auto& [name, value] : rows) {
    if (!value) continue;
    char line[64];
    std::snprintf(line, sizeof(line), "  %-8s %14s\n", name,
                  format_fixed6(to_units(*value, r.units)).c_str());
    out << line;
  }
  for (const MeasureDiagnostics& d : r.diagnostics) {
    if (d.status == "error") {
      out << "  " << split_model_name(d.kind) << " failed: " << d.error << "\n";
    }
  }
  out << "hierarchy: " << (r.hierarchy.all_passed() ? "ok" : "VIOLATED") << " ("
      << r.hierarchy.violations() << " violations";
  if (r.hierarchy.fs_exceeds_mi) out << ", phi_fs exceeds I";
  out << ")\n";
  for (const std::string& w : r.warnings) out << "warning: " << w << "\n";
  return out.str();
}

std::string format_fixed6(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  std::string s = buf;
  if (s == "-0.000000") s = "0.000000";
  return s;
}

}  // namespace phigeo
