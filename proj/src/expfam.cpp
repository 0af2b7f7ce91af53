#include "phigeo/expfam.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "phigeo/error.hpp"
#include "phigeo/tolerances.hpp"

namespace phigeo {

namespace {

std::size_t cell_count(int n) { return std::size_t{1} << (2 * n); }

// f[S] <- sum_{T subset of S} f[T]
void subset_sum(std::vector<double>& f) {
  for (std::size_t bit = 1; bit < f.size(); bit <<= 1) {
    for (std::size_t s = 0; s < f.size(); ++s) {
      if (s & bit) f[s] += f[s ^ bit];
    }
  }
}

// Inverse of subset_sum.
void subset_moebius(std::vector<double>& f) {
  for (std::size_t bit = 1; bit < f.size(); bit <<= 1) {
    for (std::size_t s = 0; s < f.size(); ++s) {
      if (s & bit) f[s] -= f[s ^ bit];
    }
  }
}

// f[S] <- sum_{T superset of S} f[T]
void superset_sum(std::vector<double>& f) {
  for (std::size_t bit = 1; bit < f.size(); bit <<= 1) {
    for (std::size_t s = 0; s < f.size(); ++s) {
      if (!(s & bit)) f[s] += f[s | bit];
    }
  }
}

void superset_moebius(std::vector<double>& f) {
  for (std::size_t bit = 1; bit < f.size(); bit <<= 1) {
    for (std::size_t s = 0; s < f.size(); ++s) {
      if (!(s & bit)) f[s] -= f[s | bit];
    }
  }
}

// Normalized exp of a log-table; returns log normalizer.
double exp_normalize(std::vector<double>& logp) {
  const double top = *std::max_element(logp.begin(), logp.end());
  double total = 0.0;
  for (double& v : logp) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : logp) v /= total;
  return top + std::log(total);
}

// Mask positions of the n=2 named coordinates.
constexpr VarMask kX1 = 0b0001, kX2 = 0b0010, kY1 = 0b0100, kY2 = 0b1000;
constexpr VarMask kHigher[5] = {0b0111, 0b1011, 0b1101, 0b1110, 0b1111};

template <class Coords>
void scatter_named(const Coords& c, std::vector<double>& by_mask) {
  by_mask[kX1] = c.x[0];
  by_mask[kX2] = c.x[1];
  by_mask[kY1] = c.y[0];
  by_mask[kY2] = c.y[1];
  by_mask[kX1 | kX2] = c.xx12;
  by_mask[kY1 | kY2] = c.yy12;
  by_mask[kX1 | kY1] = c.xy[0][0];
  by_mask[kX1 | kY2] = c.xy[0][1];
  by_mask[kX2 | kY1] = c.xy[1][0];
  by_mask[kX2 | kY2] = c.xy[1][1];
  for (int k = 0; k < 5; ++k) by_mask[kHigher[k]] = c.higher[k];
}

template <class Coords>
void gather_named(const std::vector<double>& by_mask, Coords& c) {
  c.x[0] = by_mask[kX1];
  c.x[1] = by_mask[kX2];
  c.y[0] = by_mask[kY1];
  c.y[1] = by_mask[kY2];
  c.xx12 = by_mask[kX1 | kX2];
  c.yy12 = by_mask[kY1 | kY2];
  c.xy[0][0] = by_mask[kX1 | kY1];
  c.xy[0][1] = by_mask[kX1 | kY2];
  c.xy[1][0] = by_mask[kX2 | kY1];
  c.xy[1][1] = by_mask[kX2 | kY2];
  for (int k = 0; k < 5; ++k) c.higher[k] = by_mask[kHigher[k]];
}

void require_two_elements(const DiscreteJoint& p) {
  if (p.n() != 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "named coordinates are defined for two-element systems");
  }
}

}  // namespace

std::vector<double> loglinear_from_joint(const DiscreteJoint& p) {
  std::vector<double> f(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0)) {
      throw Error(ErrorCode::kZeroProbability,
                  "log-linear coordinates need a full-support table (cell " +
                      std::to_string(i) + " is zero)");
    }
    f[i] = std::log(p[i]);
  }
  subset_moebius(f);
  return f;
}

DiscreteJoint joint_from_loglinear(int n, std::span<const double> theta) {
  if (theta.size() != cell_count(n)) {
    throw Error(ErrorCode::kDimensionMismatch, "log-linear vector size");
  }
  std::vector<double> f(theta.begin(), theta.end());
  f[0] = 0.0;
  for (double v : f) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "log-linear coefficients must be finite");
    }
  }
  subset_sum(f);
  exp_normalize(f);
  return DiscreteJoint::from_weights(n, std::move(f));
}

std::vector<double> moments_from_joint(const DiscreteJoint& p) {
  std::vector<double> f(p.probs().begin(), p.probs().end());
  superset_sum(f);
  return f;
}

DiscreteJoint joint_from_moments(int n, std::span<const double> eta) {
  if (eta.size() != cell_count(n)) {
    throw Error(ErrorCode::kDimensionMismatch, "moment vector size");
  }
  std::vector<double> f(eta.begin(), eta.end());
  f[0] = 1.0;
  superset_moebius(f);
  for (double& v : f) {
    if (v < -1e-12) {
      throw Error(ErrorCode::kInvalidArgument,
                  "moments are not realizable by a distribution");
    }
    v = std::max(v, 0.0);
  }
  return DiscreteJoint::from_weights(n, std::move(f));
}

ThetaCoords theta_from_joint(const DiscreteJoint& p) {
  require_two_elements(p);
  const std::vector<double> f = loglinear_from_joint(p);
  ThetaCoords t;
  gather_named(f, t);
  t.psi = -f[0];
  return t;
}

DiscreteJoint joint_from_theta(const ThetaCoords& t) {
  std::vector<double> f(16, 0.0);
  scatter_named(t, f);
  return joint_from_loglinear(2, f);
}

EtaCoords eta_from_joint(const DiscreteJoint& p) {
  require_two_elements(p);
  EtaCoords e;
  gather_named(moments_from_joint(p), e);
  return e;
}

DiscreteJoint joint_from_eta(const EtaCoords& e) {
  std::vector<double> f(16, 0.0);
  scatter_named(e, f);
  return joint_from_moments(2, f);
}

MixedCoords mixed_from_joint(const DiscreteJoint& p,
                             std::span<const VarMask> eta_masks) {
  const std::size_t cells = p.size();
  std::vector<char> in_eta(cells, 0);
  for (VarMask s : eta_masks) {
    if (s == 0 || s >= cells || in_eta[s]) {
      throw Error(ErrorCode::kInvalidArgument,
                  "mixed coordinate masks must be distinct and nonempty");
    }
    in_eta[s] = 1;
  }
  const std::vector<double> eta = moments_from_joint(p);
  const std::vector<double> theta = loglinear_from_joint(p);

  MixedCoords xi;
  xi.n = p.n();
  for (VarMask s = 1; s < cells; ++s) {
    if (in_eta[s]) {
      xi.eta_masks.push_back(s);
      xi.eta.push_back(eta[s]);
    } else {
      xi.theta_masks.push_back(s);
      xi.theta.push_back(theta[s]);
    }
  }
  return xi;
}

DiscreteJoint joint_from_mixed(const MixedCoords& xi) {
  const int n = xi.n;
  const std::size_t cells = cell_count(n);
  if (xi.eta_masks.size() != xi.eta.size() ||
      xi.theta_masks.size() != xi.theta.size() ||
      xi.eta_masks.size() + xi.theta_masks.size() != cells - 1) {
    throw Error(ErrorCode::kDimensionMismatch,
                "mixed coordinates must cover every nonempty mask once");
  }
  std::vector<char> seen(cells, 0);
  for (VarMask s : xi.eta_masks) seen[s]++;
  for (VarMask s : xi.theta_masks) seen[s]++;
  for (std::size_t s = 1; s < cells; ++s) {
    if (seen[s] != 1) {
      throw Error(ErrorCode::kInvalidArgument,
                  "mixed coordinates must cover every nonempty mask once");
    }
  }

  const Tolerances& tol = default_tolerances();
  const Eigen::Index k = Eigen::Index(xi.eta_masks.size());
  std::vector<double> theta(cells, 0.0);
  for (std::size_t i = 0; i < xi.theta_masks.size(); ++i) {
    theta[xi.theta_masks[i]] = xi.theta[i];
  }

  // Dual objective psi(theta) - <eta, theta_free>, convex in theta_free.
  auto evaluate = [&](const std::vector<double>& th, std::vector<double>& q) {
    q = th;
    q[0] = 0.0;
    subset_sum(q);
    const double psi = exp_normalize(q);
    double obj = psi;
    for (Eigen::Index a = 0; a < k; ++a) obj -= xi.eta[a] * th[xi.eta_masks[a]];
    return obj;
  };

  std::vector<double> q;
  double obj = evaluate(theta, q);
  for (int iter = 0; iter < tol.mixed_max_iters; ++iter) {
    std::vector<double> m = q;
    superset_sum(m);
    Eigen::VectorXd grad(k);
    Eigen::MatrixXd hess(k, k);
    for (Eigen::Index a = 0; a < k; ++a) {
      const VarMask sa = xi.eta_masks[a];
      grad[a] = m[sa] - xi.eta[a];
      for (Eigen::Index b = 0; b <= a; ++b) {
        const VarMask sb = xi.eta_masks[b];
        hess(a, b) = hess(b, a) = m[sa | sb] - m[sa] * m[sb];
      }
    }
    if (grad.lpNorm<Eigen::Infinity>() < tol.mixed_newton) break;

    const Eigen::VectorXd step = -hess.ldlt().solve(grad);
    double t = 1.0;
    std::vector<double> trial(cells);
    std::vector<double> q_trial;
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt) {
      trial = theta;
      for (Eigen::Index a = 0; a < k; ++a) {
        trial[xi.eta_masks[a]] += t * step[a];
      }
      const double obj_trial = evaluate(trial, q_trial);
      if (obj_trial <= obj + 1e-4 * t * grad.dot(step)) {
        theta = trial;
        q = q_trial;
        obj = obj_trial;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
  }
  return DiscreteJoint::from_weights(n, std::move(q));
}

std::vector<VarMask> flat_manifold_eta_masks(SplitModelKind kind, int n) {
  const VarMask xs = x_mask(n);
  const VarMask ys = y_mask(n);
  std::vector<VarMask> out;
  for (VarMask s = 1; s <= all_mask(n); ++s) {
    const bool pure_x = (s & ~xs) == 0;
    const bool pure_y = (s & ~ys) == 0;
    bool diagonal_pair = false;
    for (int i = 0; i < n; ++i) {
      diagonal_pair |= s == (x_var(i) | y_var(n, i));
    }
    bool keep = false;
    switch (kind) {
      case SplitModelKind::kI:
        keep = pure_x || pure_y;
        break;
      case SplitModelKind::kFS:
        keep = pure_x || (pure_y && std::popcount(s) == 1) || diagonal_pair;
        break;
      case SplitModelKind::kDS:
        keep = pure_x || pure_y || diagonal_pair;
        break;
      default:
        throw Error(ErrorCode::kInvalidArgument,
                    "only FS, DS and I are e-flat split manifolds");
    }
    if (keep) out.push_back(s);
  }
  return out;
}

std::vector<MarginalSpec> flat_manifold_cliques(SplitModelKind kind, int n) {
  std::vector<MarginalSpec> out;
  switch (kind) {
    case SplitModelKind::kI:
      out = {{x_mask(n)}, {y_mask(n)}};
      break;
    case SplitModelKind::kFS:
      out.push_back({x_mask(n)});
      for (int i = 0; i < n; ++i) out.push_back({x_var(i) | y_var(n, i)});
      break;
    case SplitModelKind::kDS:
      out = {{x_mask(n)}, {y_mask(n)}};
      for (int i = 0; i < n; ++i) out.push_back({x_var(i) | y_var(n, i)});
      break;
    default:
      throw Error(ErrorCode::kInvalidArgument,
                  "only FS, DS and I are e-flat split manifolds");
  }
  return out;
}

DiscreteJoint project_via_mixed_coords(const DiscreteJoint& p,
                                       SplitModelKind kind) {
  const std::vector<VarMask> masks = flat_manifold_eta_masks(kind, p.n());
  const std::vector<double> eta = moments_from_joint(p);
  MixedCoords xi;
  xi.n = p.n();
  std::vector<char> in_eta(p.size(), 0);
  for (VarMask s : masks) in_eta[s] = 1;
  for (VarMask s = 1; s < p.size(); ++s) {
    if (in_eta[s]) {
      xi.eta_masks.push_back(s);
      xi.eta.push_back(eta[s]);
    } else {
      xi.theta_masks.push_back(s);
      xi.theta.push_back(0.0);
    }
  }
  return joint_from_mixed(xi);
}

IpfResult ipf_project(const DiscreteJoint& p,
                      std::span<const MarginalSpec> constraints) {
  const Tolerances& tol = default_tolerances();
  return ipf_project(p, constraints, tol.ipf_marginal, tol.ipf_max_sweeps);
}

IpfResult ipf_project(const DiscreteJoint& p,
                      std::span<const MarginalSpec> constraints, double tol,
                      int max_sweeps) {
  if (constraints.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "IPF needs at least one clique");
  }
  const std::size_t cells = p.size();
  struct Clique {
    std::vector<std::size_t> index;  // cell -> packed marginal index
    std::vector<double> target;
    std::vector<double> current;
  };
  std::vector<Clique> cliques;
  for (const MarginalSpec& spec : constraints) {
    Clique c;
    c.target = marginal(p, spec);
    c.current.resize(c.target.size());
    c.index.resize(cells);
    for (std::size_t cell = 0; cell < cells; ++cell) {
      c.index[cell] = compress_bits(cell, spec.vars);
    }
    cliques.push_back(std::move(c));
  }

  std::vector<double> q(cells, 1.0 / double(cells));
  auto refresh = [&](Clique& c) {
    std::fill(c.current.begin(), c.current.end(), 0.0);
    for (std::size_t cell = 0; cell < cells; ++cell) {
      c.current[c.index[cell]] += q[cell];
    }
  };

  IpfResult out{DiscreteJoint::uniform(p.n()), 0,
                std::numeric_limits<double>::infinity()};
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    for (Clique& c : cliques) {
      refresh(c);
      for (std::size_t cell = 0; cell < cells; ++cell) {
        const double cur = c.current[c.index[cell]];
        q[cell] = cur > 0.0 ? q[cell] * (c.target[c.index[cell]] / cur) : 0.0;
      }
    }
    double residual = 0.0;
    for (Clique& c : cliques) {
      refresh(c);
      for (std::size_t g = 0; g < c.target.size(); ++g) {
        residual = std::max(residual, std::abs(c.current[g] - c.target[g]));
      }
    }
    out.sweeps = sweep;
    out.residual = residual;
    if (residual < tol) {
      out.q = DiscreteJoint::from_weights(p.n(), std::move(q));
      return out;
    }
  }
  throw Error(ErrorCode::kNotConverged,
              "IPF did not converge after " + std::to_string(max_sweeps) +
                  " sweeps (residual " + std::to_string(out.residual) + ")");
}

double pythagorean_check(const DiscreteJoint& p, const DiscreteJoint& q_star,
                         const DiscreteJoint& q) {
  const double d_pq = kl_divergence(p, q);
  const double d_pqs = kl_divergence(p, q_star);
  const double d_qsq = kl_divergence(q_star, q);
  if (!std::isfinite(d_pq) || !std::isfinite(d_pqs) || !std::isfinite(d_qsq)) {
    return std::numeric_limits<double>::infinity();
  }
  return std::abs(d_pq - d_pqs - d_qsq);
}

}  // namespace phigeo
