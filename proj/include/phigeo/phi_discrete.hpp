#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "phigeo/discrete.hpp"
#include "phigeo/hierarchy.hpp"
#include "phigeo/numopt.hpp"
#include "phigeo/split_model.hpp"

namespace phigeo {

struct PhiDiagnostics {
  std::string status = "ok";
  int iterations = 0;
  // Constraint residual of q*: marginal mismatch (FS/DS/I), factorization gap
  // (G), or |closed form - KL| (FS).
  double residual = 0;
  // D(p : q*) evaluated directly on the returned table.
  double kl = 0;
  bool smoothed = false;  // p had empty cells and was mixed with uniform
  // Mismatched decoding only.
  std::optional<double> beta_star;
  bool beta_lower_bound_active = false;
  bool beta_bracket_widened = false;
  // Geometric model only.
  int restarts = 0;
  int best_restart = -1;
};

struct PhiResult {
  SplitModelKind kind;
  double phi = 0;  // nats
  DiscreteJoint q_star;
  PhiDiagnostics diagnostics;
};

// Stochastic interaction. q* = p(x) prod_i p(y_i | x_i); phi is the
// conditional-entropy closed form.
PhiResult phi_fs(const DiscreteJoint& p);

// Projection onto the diagonally split graphical model by IPF over the cliques
// {x}, {y}, {x_i, y_i}.
PhiResult phi_ds(const DiscreteJoint& p);

struct MdOptions {
  double beta_max = 10.0;
  double beta_tol = 1e-9;
};

// Mismatched decoding: one-dimensional family
//   q(x,y;b) = p(x) p(y) prod_i p(y_i|x_i)^b / sum_x' p(x') prod_i p(y_i|x'_i)^b
// minimized over b in [0, beta_max] (one widening by 10x if the upper end is
// active).
PhiResult phi_md(const DiscreteJoint& p, const MdOptions& options = {});

// Builds q(x, y; beta) for the table p (must have full support).
DiscreteJoint md_family_member(const DiscreteJoint& p, double beta);

struct GOptions {
  int restarts = 5;
  std::uint64_t seed = 0;
};

// Geometric (causally split) model: for every ordered pair i != j, x_i and y_j
// are conditionally independent given the remaining inputs x_{-i}. Solved by
// augmented Lagrangian over softmax logits with seeded restarts. Tables with
// empty cells, and full-support tables where every restart stalls, go to
// phi_g_conditional.
PhiResult phi_g(const DiscreteJoint& p, const GOptions& options = {});

// The same projection in conditional coordinates. The optimum keeps
// q(x) = p(x), and the constraints say q(y_j | x) ignores x_i for i != j,
// which is linear in q(y | x). The resulting convex problem is solved by a
// log-barrier Newton path on the null space of those constraints.
PhiResult phi_g_conditional(const DiscreteJoint& p);

// The objective phi_g minimizes: D(p : softmax(z)) over logits z, with one
// factorization-gap constraint per ordered pair and context. p must have full
// support.
numopt::VectorObjective geometric_objective(const DiscreteJoint& p);

// Largest factorization gap |q(x_i=1,y_j=1,u) q(x_i=0,y_j=0,u) -
// q(x_i=1,y_j=0,u) q(x_i=0,y_j=1,u)| over all pairs and contexts u.
double geometric_constraint_residual(const DiscreteJoint& q);

// Projection onto independent distributions; phi = I(X;Y).
PhiResult phi_i(const DiscreteJoint& p);

PhiResult compute_split(const DiscreteJoint& p, SplitModelKind kind,
                        std::uint64_t seed = 0);

struct MeasureOutcome {
  SplitModelKind kind;
  std::optional<PhiResult> result;
  std::string error;  // set when the computation failed
};

struct PhiSuite {
  double mutual_information = 0;
  std::vector<MeasureOutcome> measures;  // I, FS, DS, MD, G in that order
  HierarchyReport hierarchy;

  const MeasureOutcome* find(SplitModelKind kind) const;
  MeasureValues values() const;
};

// Runs every requested measure; a failing measure is reported and does not
// abort the others.
PhiSuite phi_all(const DiscreteJoint& p, double tol = 1e-6,
                 std::uint64_t seed = 0,
                 const std::vector<SplitModelKind>& kinds = {
                     kAllSplitModels.begin(), kAllSplitModels.end()});

HierarchyReport verify_hierarchy(const DiscreteJoint& p, double tol,
                                 std::uint64_t seed = 0);

}  // namespace phigeo
