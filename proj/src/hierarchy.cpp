#include "phigeo/hierarchy.hpp"

#include <algorithm>
#include <limits>

namespace phigeo {

namespace {

// Records `lhs >= rhs - tol`.
void check_ge(HierarchyReport& report, const std::string& name,
              const std::optional<double>& lhs,
              const std::optional<double>& rhs) {
  if (!lhs || !rhs) {
    report.skipped.push_back(name);
    return;
  }
  const double margin = *lhs - *rhs;
  report.checks.push_back({name, margin, margin >= -report.tol});
}

}  // namespace

bool HierarchyReport::all_passed() const { return violations() == 0; }

std::size_t HierarchyReport::violations() const {
  return std::size_t(std::count_if(checks.begin(), checks.end(),
                                   [](const HierarchyCheck& c) { return !c.passed; }));
}

double HierarchyReport::worst_margin() const {
  double worst = std::numeric_limits<double>::infinity();
  for (const HierarchyCheck& c : checks) worst = std::min(worst, c.margin);
  return worst;
}

HierarchyReport verify_hierarchy(const MeasureValues& v, double tol) {
  HierarchyReport report;
  report.tol = tol;
  const std::optional<double> zero = 0.0;
  check_ge(report, "fs>=ds", v.fs, v.ds);
  check_ge(report, "md>=ds", v.md, v.ds);
  check_ge(report, "fs>=g", v.fs, v.g);
  check_ge(report, "ds>=0", v.ds, zero);
  check_ge(report, "md>=0", v.md, zero);
  check_ge(report, "g>=0", v.g, zero);
  check_ge(report, "ds<=i", v.i, v.ds);
  check_ge(report, "md<=i", v.i, v.md);
  check_ge(report, "g<=i", v.i, v.g);
  report.fs_exceeds_mi = v.fs && v.i && *v.fs > *v.i + tol;
  return report;
}

}  // namespace phigeo
