#pragma once

#include <optional>
#include <string>
#include <vector>

namespace phigeo {

// Measure values in nats; a missing entry means "not computed".
struct MeasureValues {
  std::optional<double> i;
  std::optional<double> fs;
  std::optional<double> ds;
  std::optional<double> md;
  std::optional<double> g;
};

struct HierarchyCheck {
  std::string name;    // e.g. "fs>=ds", "g<=i", "md>=0"
  double margin = 0;   // how far the inequality holds; negative = violated
  bool passed = true;
};

struct HierarchyReport {
  double tol = 0;
  std::vector<HierarchyCheck> checks;
  // Stochastic interaction is allowed to exceed I(X;Y); recorded, not failed.
  bool fs_exceeds_mi = false;
  std::vector<std::string> skipped;  // checks whose operands were missing

  bool all_passed() const;
  std::size_t violations() const;
  // Smallest margin across the checks (+infinity if none ran).
  double worst_margin() const;
};

// Checks FS >= DS, MD >= DS, FS >= G and 0 <= DS, MD, G <= I, each with
// slack `tol`.
HierarchyReport verify_hierarchy(const MeasureValues& values, double tol);

}  // namespace phigeo
