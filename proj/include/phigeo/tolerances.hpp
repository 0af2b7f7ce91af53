#pragma once

namespace phigeo {

// Every numerical threshold used by the library lives here so tests and the
// CLI read the same values.
struct Tolerances {
  // Distributions
  double normalization = 1e-12;
  double input_normalization = 1e-9;
  double row_stochastic = 1e-12;

  // IPF
  double ipf_marginal = 1e-10;
  int ipf_max_sweeps = 10000;

  // Mixed-coordinate Newton solve
  double mixed_newton = 1e-13;
  int mixed_max_iters = 200;

  // Quasi-Newton
  double qn_gradient = 1e-9;
  int qn_max_iters = 500;

  // Augmented Lagrangian
  double al_constraint = 1e-8;
  double al_lagrangian_gradient = 1e-7;
  double al_penalty_start = 10.0;
  double al_penalty_growth = 10.0;
  int al_max_rounds = 8;

  // Golden-section search
  double golden_x = 1e-9;
  int golden_max_iters = 200;

  // Mismatched decoding
  double md_beta_max = 10.0;
  double md_widen_factor = 10.0;

  // Geometric model (discrete)
  int g_restarts = 5;
  double g_smoothing = 1e-9;

  // Gaussian systems
  double symmetry = 1e-12;
  double min_eigenvalue = 1e-10;

  // Finite differences
  double fd_step = 1e-6;
};

inline const Tolerances& default_tolerances() {
  static const Tolerances tol{};
  return tol;
}

}  // namespace phigeo
