#include "phigeo/numopt.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <utility>

namespace phigeo::numopt {

GoldenResult golden_section_min(const ScalarObjective& obj, int max_iters) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = obj.lo;
  double b = obj.hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = obj.f(c);
  double fd = obj.f(d);

  GoldenResult out;
  out.widths.push_back(b - a);
  while (out.iterations < max_iters && (b - a) > obj.tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = obj.f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = obj.f(d);
    }
    ++out.iterations;
    out.widths.push_back(b - a);
  }

  out.argmin = fc <= fd ? c : d;
  out.min = std::min(fc, fd);

  // The bracket ends are never probed by the interior sequence; check them so
  // a monotone objective reports its boundary minimizer exactly.
  const double f_lo = obj.f(obj.lo);
  const double f_hi = obj.f(obj.hi);
  const double pin = 2.0 * std::max(b - a, obj.tol);
  if (f_lo <= out.min) {
    out.argmin = obj.lo;
    out.min = f_lo;
  }
  if (f_hi < out.min) {
    out.argmin = obj.hi;
    out.min = f_hi;
  }
  out.at_lower = out.argmin - obj.lo <= pin;
  out.at_upper = obj.hi - out.argmin <= pin;
  return out;
}

std::string_view qn_status_name(QnStatus status) {
  switch (status) {
    case QnStatus::kConverged: return "converged";
    case QnStatus::kIterationCap: return "iteration_cap";
    case QnStatus::kLineSearchFailed: return "line_search_failed";
    case QnStatus::kStalled: return "stalled";
  }
  return "unknown";
}

QnResult quasi_newton_min(const VectorObjective& obj,
                          const Eigen::VectorXd& x0,
                          const QnOptions& options) {
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxBacktracks = 60;

  const Eigen::Index n = obj.dim;
  QnResult out;
  out.x = x0;
  out.grad.resize(n);
  out.f = obj.value(out.x, &out.grad);
  out.accepted_values.push_back(out.f);

  Eigen::MatrixXd inv_hessian = Eigen::MatrixXd::Identity(n, n);
  bool fresh_hessian = true;
  Eigen::VectorXd trial_grad(n);
  double window_f = out.f;
  double window_grad = std::numeric_limits<double>::infinity();

  for (;;) {
    out.grad_norm = out.grad.lpNorm<Eigen::Infinity>();
    if (out.grad_norm < options.gradient_tol) {
      out.status = QnStatus::kConverged;
      return out;
    }
    // Stall: a full window without meaningful decrease in f or the gradient.
    if (out.iterations > 0 && out.iterations % options.stall_window == 0) {
      const double f_scale = std::max(1.0, std::abs(out.f));
      if (window_f - out.f <= 1e-14 * f_scale &&
          out.grad_norm > 0.5 * window_grad) {
        out.status = QnStatus::kStalled;
        return out;
      }
      window_f = out.f;
      window_grad = out.grad_norm;
    }
    if (out.iterations >= options.max_iters) {
      out.status = QnStatus::kIterationCap;
      return out;
    }

    Eigen::VectorXd dir = -inv_hessian * out.grad;
    double slope = out.grad.dot(dir);
    if (!(slope < 0.0)) {
      inv_hessian.setIdentity();
      fresh_hessian = true;
      dir = -out.grad;
      slope = -out.grad.squaredNorm();
    }

    // First steps along the raw gradient are scaled to unit length.
    double step = fresh_hessian ? std::min(1.0, 1.0 / dir.norm()) : 1.0;
    bool accepted = false;
    Eigen::VectorXd trial;
    double f_trial = 0.0;
    // Near the optimum the Armijo decrease falls below rounding error in f.
    // The largest non-increasing trial that still shrinks the gradient is kept
    // as a fallback.
    std::optional<std::pair<Eigen::VectorXd, double>> fallback;
    Eigen::VectorXd fallback_grad;
    for (int k = 0; k < kMaxBacktracks; ++k) {
      trial = out.x + step * dir;
      f_trial = obj.value(trial, &trial_grad);
      if (std::isfinite(f_trial) &&
          f_trial <= out.f + kArmijo * step * slope) {
        accepted = true;
        break;
      }
      if (!fallback && std::isfinite(f_trial) && f_trial <= out.f &&
          trial_grad.lpNorm<Eigen::Infinity>() < out.grad_norm) {
        fallback.emplace(trial, f_trial);
        fallback_grad = trial_grad;
      }
      step *= 0.5;
    }
    if (!accepted && fallback) {
      trial = fallback->first;
      f_trial = fallback->second;
      trial_grad = fallback_grad;
      accepted = true;
    }
    if (!accepted) {
      if (!fresh_hessian) {
        inv_hessian.setIdentity();
        fresh_hessian = true;
        continue;
      }
      out.status = QnStatus::kLineSearchFailed;
      return out;
    }

    const Eigen::VectorXd s = trial - out.x;
    const Eigen::VectorXd y = trial_grad - out.grad;
    const double sy = s.dot(y);
    if (sy > 1e-300 && sy > 1e-14 * s.norm() * y.norm()) {
      if (fresh_hessian) {
        inv_hessian *= sy / y.squaredNorm();
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = inv_hessian * y;
      inv_hessian += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) -
                     rho * (hy * s.transpose() + s * hy.transpose());
      fresh_hessian = false;
    }
    out.x = trial;
    out.f = f_trial;
    out.grad = trial_grad;
    out.accepted_values.push_back(out.f);
    ++out.iterations;
  }
}

namespace {

// Infinity norm of grad f + J^T lambda with lambda chosen by least squares,
// i.e. the part of the objective gradient outside the constraint normals.
double kkt_gradient_norm(const Eigen::VectorXd& g, const Eigen::MatrixXd& jac) {
  if (jac.rows() == 0) return g.lpNorm<Eigen::Infinity>();
  const Eigen::VectorXd lambda =
      jac.transpose().completeOrthogonalDecomposition().solve(-g);
  return (g + jac.transpose() * lambda).lpNorm<Eigen::Infinity>();
}

}  // namespace

AlResult augmented_lagrangian_min(const VectorObjective& obj,
                                  const Eigen::VectorXd& x0,
                                  const AlOptions& options) {
  const Eigen::Index m = obj.n_constraints;
  const Eigen::Index n = obj.dim;

  AlResult out;
  out.x = x0;
  out.multipliers = Eigen::VectorXd::Zero(m);
  out.constraint.resize(m);

  Eigen::MatrixXd jac(m, n);
  Eigen::VectorXd c(m);
  Eigen::VectorXd g(n);

  // The starting penalty is measured against the mean squared constraint
  // gradient at x0, so badly scaled constraints see the same schedule.
  double penalty = options.penalty_start;
  if (options.scale_penalty && m > 0) {
    obj.constraints(out.x, c, &jac);
    const double mean_sq = jac.squaredNorm() / double(m);
    if (mean_sq > 1e-300) penalty /= mean_sq;
  }

  double previous_norm = std::numeric_limits<double>::infinity();
  for (int round = 0; round < options.max_rounds; ++round) {
    const Eigen::VectorXd lambda = out.multipliers;
    VectorObjective inner;
    inner.dim = n;
    inner.value = [&, lambda, penalty](const Eigen::VectorXd& x,
                                       Eigen::VectorXd* grad) {
      Eigen::VectorXd fg(n);
      const double f = obj.value(x, grad ? &fg : nullptr);
      if (!std::isfinite(f)) return f;
      Eigen::VectorXd cx(m);
      Eigen::MatrixXd jx(m, n);
      obj.constraints(x, cx, grad ? &jx : nullptr);
      if (grad) {
        *grad = fg + jx.transpose() * (lambda + penalty * cx);
      }
      return f + lambda.dot(cx) + 0.5 * penalty * cx.squaredNorm();
    };
    QnOptions qn;
    qn.gradient_tol = 0.5 * options.lagrangian_grad_tol;
    qn.max_iters = options.inner_max_iters;
    const QnResult inner_result = quasi_newton_min(inner, out.x, qn);
    out.x = inner_result.x;
    out.inner_iterations += inner_result.iterations;
    out.rounds = round + 1;

    obj.constraints(out.x, c, &jac);
    out.multipliers += penalty * c;
    out.f = obj.value(out.x, &g);
    out.constraint = c;
    out.constraint_norm = c.lpNorm<Eigen::Infinity>();
    out.lagrangian_grad_norm = kkt_gradient_norm(g, jac);
    if (out.constraint_norm < options.constraint_tol &&
        out.lagrangian_grad_norm < options.lagrangian_grad_tol) {
      out.converged = true;
      return out;
    }
    // The penalty grows only while the constraints are above tolerance and
    // the last round failed to cut the violation by 100x. Otherwise the
    // multiplier update is doing the work, and a larger penalty would make
    // the inner problem stiffer than rounding error in f can resolve.
    if (out.constraint_norm >= options.constraint_tol &&
        out.constraint_norm > 0.01 * previous_norm) {
      penalty *= options.penalty_growth;
    }
    previous_norm = out.constraint_norm;
  }
  return out;
}

double finite_diff_grad_check(const VectorObjective& obj,
                              const Eigen::VectorXd& x, double step) {
  Eigen::VectorXd analytic(obj.dim);
  obj.value(x, &analytic);
  double worst = 0.0;
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < obj.dim; ++i) {
    probe[i] = x[i] + step;
    const double up = obj.value(probe, nullptr);
    probe[i] = x[i] - step;
    const double down = obj.value(probe, nullptr);
    probe[i] = x[i];
    const double numeric = (up - down) / (2.0 * step);
    worst = std::max(worst, std::abs(numeric - analytic[i]));
  }
  return worst;
}

}  // namespace phigeo::numopt
