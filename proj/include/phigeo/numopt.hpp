#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string_view>
#include <vector>

#include "phigeo/tolerances.hpp"

namespace phigeo::numopt {

// f: R -> R on the closed bracket [lo, hi].
struct ScalarObjective {
  std::function<double(double)> f;
  double lo = 0.0;
  double hi = 1.0;
  double tol = 1e-9;
};

struct GoldenResult {
  double argmin = 0.0;
  double min = 0.0;
  int iterations = 0;
  bool at_lower = false;
  bool at_upper = false;
  // Bracket width after each iteration, starting with the initial width.
  std::vector<double> widths;
};

// Golden-section search for a unimodal function. A minimizer that ends up
// pinned against either end of the bracket is flagged.
GoldenResult golden_section_min(const ScalarObjective& obj,
                                int max_iters = default_tolerances().golden_max_iters);

// Smooth objective with an optional equality-constraint map c(x) = 0.
// `value` writes the gradient into `grad` when it is non-null and may return
// +infinity outside its domain.
struct VectorObjective {
  using Value = std::function<double(const Eigen::VectorXd& x,
                                     Eigen::VectorXd* grad)>;
  using Constraints = std::function<void(const Eigen::VectorXd& x,
                                         Eigen::VectorXd& c,
                                         Eigen::MatrixXd* jacobian)>;

  Eigen::Index dim = 0;
  Value value;
  Eigen::Index n_constraints = 0;
  Constraints constraints;
};

enum class QnStatus { kConverged, kIterationCap, kLineSearchFailed, kStalled };

std::string_view qn_status_name(QnStatus status);

struct QnOptions {
  double gradient_tol = default_tolerances().qn_gradient;
  int max_iters = default_tolerances().qn_max_iters;
  // Iterations per stall check (no decrease in f and no halving of the
  // gradient within one window ends the run).
  int stall_window = 50;
};

struct QnResult {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd grad;
  double grad_norm = 0.0;  // infinity norm
  int iterations = 0;
  QnStatus status = QnStatus::kIterationCap;
  std::vector<double> accepted_values;
};

// BFGS with a backtracking (Armijo) line search. Accepted objective values
// never increase.
QnResult quasi_newton_min(const VectorObjective& obj,
                          const Eigen::VectorXd& x0,
                          const QnOptions& options = {});

struct AlOptions {
  double constraint_tol = default_tolerances().al_constraint;
  double lagrangian_grad_tol = default_tolerances().al_lagrangian_gradient;
  double penalty_start = default_tolerances().al_penalty_start;
  double penalty_growth = default_tolerances().al_penalty_growth;
  int max_rounds = default_tolerances().al_max_rounds;
  // Divide the starting penalty by the mean squared constraint-gradient norm.
  bool scale_penalty = true;
  int inner_max_iters = 2000;
};

struct AlResult {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd constraint;
  Eigen::VectorXd multipliers;
  double constraint_norm = 0.0;       // infinity norm
  // Infinity norm of grad f + J^T lambda with least-squares multipliers.
  double lagrangian_grad_norm = 0.0;
  int rounds = 0;
  int inner_iterations = 0;
  bool converged = false;
};

// Augmented Lagrangian for equality constraints. Multipliers take the
// first-order update each outer round; the penalty grows by a fixed factor
// after a round that leaves the constraints above tolerance without cutting
// the violation by at least 100x.
AlResult augmented_lagrangian_min(const VectorObjective& obj,
                                  const Eigen::VectorXd& x0,
                                  const AlOptions& options = {});

// Largest absolute deviation between the analytic gradient and a central
// finite-difference estimate.
double finite_diff_grad_check(const VectorObjective& obj,
                              const Eigen::VectorXd& x,
                              double step = default_tolerances().fd_step);

}  // namespace phigeo::numopt
