#pragma once

#include <span>
#include <vector>

#include "phigeo/discrete.hpp"
#include "phigeo/split_model.hpp"

namespace phigeo {

// ---------------------------------------------------------------------------
// Log-linear (theta) and moment (eta) coordinates.
//
// For a full-support table over 2n binary variables z = (x, y),
//
//   log p(z) = sum_{S nonempty} theta_S prod_{v in S} z_v - psi,
//   eta_S    = E[prod_{v in S} z_v].
//
// Both are stored densely by subset mask: entry S of the vector belongs to the
// monomial over the variables in S. Entry 0 holds -psi for theta and 1 for eta.
// ---------------------------------------------------------------------------

// Moebius inversion of log p over the Boolean lattice. Throws on a zero cell.
std::vector<double> loglinear_from_joint(const DiscreteJoint& p);
// Exponentiates the log-linear form; entry 0 is ignored and psi recomputed.
DiscreteJoint joint_from_loglinear(int n, std::span<const double> theta);

std::vector<double> moments_from_joint(const DiscreteJoint& p);
// Exact inversion of the full moment vector (inclusion-exclusion).
DiscreteJoint joint_from_moments(int n, std::span<const double> eta);

// Named coordinates for two-element systems. `higher` holds the five
// third- and fourth-order terms in increasing mask order
// (x1x2y1, x1x2y2, x1y1y2, x2y1y2, x1x2y1y2).
struct ThetaCoords {
  double x[2] = {0, 0};
  double y[2] = {0, 0};
  double xx12 = 0;
  double yy12 = 0;
  double xy[2][2] = {{0, 0}, {0, 0}};  // xy[i][j] couples x_{i+1}, y_{j+1}
  double higher[5] = {0, 0, 0, 0, 0};
  double psi = 0;
};

struct EtaCoords {
  double x[2] = {0, 0};
  double y[2] = {0, 0};
  double xx12 = 0;
  double yy12 = 0;
  double xy[2][2] = {{0, 0}, {0, 0}};
  double higher[5] = {0, 0, 0, 0, 0};
};

ThetaCoords theta_from_joint(const DiscreteJoint& p);
DiscreteJoint joint_from_theta(const ThetaCoords& t);
EtaCoords eta_from_joint(const DiscreteJoint& p);
DiscreteJoint joint_from_eta(const EtaCoords& e);

// Mixed coordinates: moments for the masks in `eta_masks`, log-linear
// coefficients for every other nonempty mask.
struct MixedCoords {
  int n = 0;
  std::vector<VarMask> eta_masks;
  std::vector<double> eta;
  std::vector<VarMask> theta_masks;
  std::vector<double> theta;
};

MixedCoords mixed_from_joint(const DiscreteJoint& p,
                             std::span<const VarMask> eta_masks);
// Solves for the unique distribution with the given mixed coordinates
// (damped Newton on the free log-linear coefficients).
DiscreteJoint joint_from_mixed(const MixedCoords& xi);

// Moment masks that span the e-flat manifolds FS, DS and I; the log-linear
// coefficients of every other mask vanish on the manifold.
std::vector<VarMask> flat_manifold_eta_masks(SplitModelKind kind, int n);
// Marginal cliques whose matching defines the m-projection onto the same
// manifolds.
std::vector<MarginalSpec> flat_manifold_cliques(SplitModelKind kind, int n);

// m-projection by matching the listed marginals of p (mixed coordinates with
// all other interactions zeroed).
DiscreteJoint project_via_mixed_coords(const DiscreteJoint& p,
                                       SplitModelKind kind);

// ---------------------------------------------------------------------------
// Iterative proportional fitting
// ---------------------------------------------------------------------------

struct IpfResult {
  DiscreteJoint q;
  int sweeps = 0;
  double residual = 0;  // max abs marginal deviation after the last sweep
};

// Cyclic IPF from the uniform table. The result matches every listed marginal
// of p and minimizes D(p : q) over the log-linear model generated by the
// cliques. Throws kNotConverged (carrying the residual) after `max_sweeps`.
IpfResult ipf_project(const DiscreteJoint& p,
                      std::span<const MarginalSpec> constraints);
IpfResult ipf_project(const DiscreteJoint& p,
                      std::span<const MarginalSpec> constraints, double tol,
                      int max_sweeps);

// |D(p:q) - D(p:q*) - D(q*:q)|, or +infinity if any term is infinite.
double pythagorean_check(const DiscreteJoint& p, const DiscreteJoint& q_star,
                         const DiscreteJoint& q);

}  // namespace phigeo
