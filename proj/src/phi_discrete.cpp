#include "phigeo/phi_discrete.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <random>

#include "phigeo/error.hpp"
#include "phigeo/expfam.hpp"
#include "phigeo/numopt.hpp"
#include "phigeo/tolerances.hpp"

namespace phigeo {

namespace {

// p(y_i = b | x_i = a) for every element, as table[i][a][b]; zero-mass rows
// are left at zero since they carry no weight in p.
std::vector<std::array<std::array<double, 2>, 2>> per_element_conditionals(
    const DiscreteJoint& p) {
  const int n = p.n();
  std::vector<std::array<std::array<double, 2>, 2>> out(n);
  for (int i = 0; i < n; ++i) {
    const ConditionalTable c = conditional(p, y_var(n, i), x_var(i));
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        out[i][a][b] = c.defined(a) ? c(b, a) : 0.0;
      }
    }
  }
  return out;
}

double marginal_mismatch(const DiscreteJoint& p, const DiscreteJoint& q,
                         std::span<const MarginalSpec> specs) {
  double worst = 0.0;
  for (const MarginalSpec& s : specs) {
    worst = std::max(worst, max_abs_difference(marginal(p, s), marginal(q, s)));
  }
  return worst;
}

DiscreteJoint interior(const DiscreteJoint& p, bool& smoothed) {
  smoothed = !p.full_support();
  return smoothed ? p.smoothed(default_tolerances().g_smoothing) : p;
}

// ---------------------------------------------------------------------------
// Geometric model constraints.
//
// For an ordered pair (i, j), i != j, and a context u of x_{-i}, let
// q_ab = q(x_i = a, x_{-i} = u, y_j = b) (other outputs summed out). The
// conditional independence x_i _|_ y_j | x_{-i} = u is q_11 q_00 - q_10 q_01 = 0.
// ---------------------------------------------------------------------------
struct GapTerm {
  // Cells grouped by (a, b) = (x_i, y_j) for one (i, j, u).
  std::array<std::vector<std::size_t>, 4> cells;
};

std::vector<GapTerm> geometric_gap_terms(int n) {
  std::vector<GapTerm> terms;
  const std::size_t cells = std::size_t{1} << (2 * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const VarMask context = x_mask(n) & ~x_var(i);
      for (std::size_t u = 0; u < (std::size_t{1} << (n - 1)); ++u) {
        GapTerm t;
        const std::size_t u_bits = expand_bits(u, context);
        for (std::size_t c = 0; c < cells; ++c) {
          if ((c & context) != u_bits) continue;
          const int a = (c & x_var(i)) ? 1 : 0;
          const int b = (c & y_var(n, j)) ? 1 : 0;
          t.cells[2 * a + b].push_back(c);
        }
        terms.push_back(std::move(t));
      }
    }
  }
  return terms;
}

// Gap values, and optionally their gradients with respect to the table.
void geometric_gaps(const std::vector<GapTerm>& terms,
                    std::span<const double> q, Eigen::VectorXd& gaps,
                    Eigen::MatrixXd* dq) {
  gaps.resize(Eigen::Index(terms.size()));
  if (dq) dq->setZero(Eigen::Index(terms.size()), Eigen::Index(q.size()));
  for (std::size_t k = 0; k < terms.size(); ++k) {
    double m[4] = {0, 0, 0, 0};
    for (int ab = 0; ab < 4; ++ab) {
      for (std::size_t c : terms[k].cells[ab]) m[ab] += q[c];
    }
    // m[0]=q00, m[1]=q01, m[2]=q10, m[3]=q11
    gaps[Eigen::Index(k)] = m[3] * m[0] - m[2] * m[1];
    if (dq) {
      const double d[4] = {m[3], -m[2], -m[1], m[0]};
      for (int ab = 0; ab < 4; ++ab) {
        for (std::size_t c : terms[k].cells[ab]) {
          (*dq)(Eigen::Index(k), Eigen::Index(c)) = d[ab];
        }
      }
    }
  }
}

void softmax(const Eigen::VectorXd& z, std::vector<double>& q) {
  const double top = z.maxCoeff();
  q.resize(std::size_t(z.size()));
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    q[std::size_t(i)] = std::exp(z[i] - top);
    total += q[std::size_t(i)];
  }
  for (double& v : q) v /= total;
}

}  // namespace

PhiResult phi_fs(const DiscreteJoint& p) {
  const int n = p.n();
  const auto cond = per_element_conditionals(p);
  const std::vector<double> px = marginal(p.probs(), x_mask(n));
  std::vector<double> q(p.size());
  for (std::size_t cell = 0; cell < q.size(); ++cell) {
    const std::size_t x = cell & x_mask(n);
    double v = px[x];
    for (int i = 0; i < n && v > 0.0; ++i) {
      const int a = (cell >> i) & 1;
      const int b = (cell >> (n + i)) & 1;
      v *= cond[i][a][b];
    }
    q[cell] = v;
  }
  DiscreteJoint q_star = DiscreteJoint::from_weights(n, std::move(q));

  double closed = -conditional_entropy(p, y_mask(n), x_mask(n));
  for (int i = 0; i < n; ++i) {
    closed += conditional_entropy(p, y_var(n, i), x_var(i));
  }
  PhiDiagnostics diag;
  diag.kl = kl_divergence(p, q_star);
  diag.residual = std::abs(closed - diag.kl);
  return {SplitModelKind::kFS, closed, std::move(q_star), diag};
}

PhiResult phi_ds(const DiscreteJoint& p) {
  const std::vector<MarginalSpec> cliques =
      flat_manifold_cliques(SplitModelKind::kDS, p.n());
  PhiDiagnostics diag;
  DiscreteJoint q = p;
  try {
    IpfResult ipf = ipf_project(p, cliques);
    diag.iterations = ipf.sweeps;
    q = std::move(ipf.q);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNotConverged) throw;
    // IPF is sublinear when the projection has zeros that no zero marginal
    // explains. Newton on the dual drives those cells to zero geometrically.
    q = project_via_mixed_coords(p, SplitModelKind::kDS);
    diag.status = "newton";
    diag.iterations = default_tolerances().ipf_max_sweeps;
    const double residual = marginal_mismatch(p, q, cliques);
    if (residual > default_tolerances().al_constraint) {
      throw Error(ErrorCode::kNotConverged,
                  "diagonally split projection: marginal residual " +
                      std::to_string(residual));
    }
  }
  diag.residual = marginal_mismatch(p, q, cliques);
  diag.kl = kl_divergence(p, q);
  return {SplitModelKind::kDS, diag.kl, std::move(q), diag};
}

PhiResult phi_i(const DiscreteJoint& p) {
  DiscreteJoint q = independent_product(p);
  PhiDiagnostics diag;
  const std::vector<MarginalSpec> specs =
      flat_manifold_cliques(SplitModelKind::kI, p.n());
  diag.residual = marginal_mismatch(p, q, specs);
  diag.kl = kl_divergence(p, q);
  return {SplitModelKind::kI, diag.kl, std::move(q), diag};
}

namespace {

// Precomputed pieces of the mismatched-decoding family for a full-support p.
struct MdFamily {
  int n = 0;
  std::vector<double> px, py;
  std::vector<double> log_split;  // sum_i log p(y_i | x_i) per cell

  explicit MdFamily(const DiscreteJoint& p) : n(p.n()) {
    px = marginal(p.probs(), x_mask(n));
    py = marginal(p.probs(), y_mask(n));
    const auto cond = per_element_conditionals(p);
    log_split.resize(p.size());
    for (std::size_t cell = 0; cell < p.size(); ++cell) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) {
        s += std::log(cond[i][(cell >> i) & 1][(cell >> (n + i)) & 1]);
      }
      log_split[cell] = s;
    }
  }

  std::vector<double> member(double beta) const {
    const std::size_t states = px.size();
    std::vector<double> q(states * states);
    for (std::size_t y = 0; y < states; ++y) {
      // Normalizer over x' for this y, computed with a max shift.
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t x = 0; x < states; ++x) {
        top = std::max(top, beta * log_split[x | (y << n)]);
      }
      double z = 0.0;
      for (std::size_t x = 0; x < states; ++x) {
        z += px[x] * std::exp(beta * log_split[x | (y << n)] - top);
      }
      for (std::size_t x = 0; x < states; ++x) {
        const std::size_t cell = x | (y << n);
        q[cell] = px[x] * py[y] * std::exp(beta * log_split[cell] - top) / z;
      }
    }
    return q;
  }
};

}  // namespace

DiscreteJoint md_family_member(const DiscreteJoint& p, double beta) {
  if (!p.full_support()) {
    throw Error(ErrorCode::kZeroProbability,
                "mismatched decoding family needs a full-support table");
  }
  return DiscreteJoint::from_weights(p.n(), MdFamily(p).member(beta));
}

PhiResult phi_md(const DiscreteJoint& p, const MdOptions& options) {
  bool smoothed = false;
  const DiscreteJoint work = interior(p, smoothed);
  const MdFamily family(work);
  auto objective = [&](double beta) {
    return kl_divergence(work.probs(), family.member(beta));
  };

  numopt::ScalarObjective obj{objective, 0.0, options.beta_max,
                              options.beta_tol};
  numopt::GoldenResult gs = numopt::golden_section_min(obj);
  PhiDiagnostics diag;
  diag.smoothed = smoothed;
  diag.iterations = gs.iterations;
  if (gs.at_upper) {
    obj.hi = options.beta_max * default_tolerances().md_widen_factor;
    gs = numopt::golden_section_min(obj);
    diag.iterations += gs.iterations;
    diag.beta_bracket_widened = true;
    if (gs.at_upper) {
      throw Error(ErrorCode::kBoundaryActive,
                  "mismatched decoding minimum sits at beta = " +
                      std::to_string(obj.hi));
    }
  }
  // An active lower bound means the unconstrained minimum may lie at b < 0.
  if (gs.at_lower) {
    diag.beta_lower_bound_active = objective(obj.tol) > objective(0.0);
  }
  diag.beta_star = gs.argmin;
  DiscreteJoint q_star =
      DiscreteJoint::from_weights(p.n(), family.member(gs.argmin));
  diag.kl = kl_divergence(p, q_star);
  diag.residual = std::abs(diag.kl - gs.min);
  return {SplitModelKind::kMD, diag.kl, std::move(q_star), diag};
}

double geometric_constraint_residual(const DiscreteJoint& q) {
  Eigen::VectorXd gaps;
  geometric_gaps(geometric_gap_terms(q.n()), q.probs(), gaps, nullptr);
  return gaps.size() ? gaps.lpNorm<Eigen::Infinity>() : 0.0;
}

numopt::VectorObjective geometric_objective(const DiscreteJoint& p) {
  if (!p.full_support()) {
    throw Error(ErrorCode::kZeroProbability,
                "geometric objective needs a full-support table");
  }
  const auto terms =
      std::make_shared<const std::vector<GapTerm>>(geometric_gap_terms(p.n()));
  const auto pw = std::make_shared<const std::vector<double>>(
      p.probs().begin(), p.probs().end());
  const Eigen::Index cells = Eigen::Index(p.size());
  double neg_entropy = 0.0;
  for (double v : *pw) neg_entropy += v * std::log(v);

  numopt::VectorObjective obj;
  obj.dim = cells;
  obj.n_constraints = Eigen::Index(terms->size());
  // D(p : softmax(z)); gradient q - p.
  obj.value = [pw, cells, neg_entropy](const Eigen::VectorXd& z,
                                       Eigen::VectorXd* grad) {
    const double top = z.maxCoeff();
    double lse = 0.0;
    for (Eigen::Index i = 0; i < cells; ++i) lse += std::exp(z[i] - top);
    lse = top + std::log(lse);
    double cross = 0.0;
    for (Eigen::Index i = 0; i < cells; ++i) {
      cross += (*pw)[std::size_t(i)] * (z[i] - lse);
    }
    if (grad) {
      grad->resize(cells);
      for (Eigen::Index i = 0; i < cells; ++i) {
        (*grad)[i] = std::exp(z[i] - lse) - (*pw)[std::size_t(i)];
      }
    }
    return neg_entropy - cross;
  };
  obj.constraints = [terms, cells](const Eigen::VectorXd& z,
                                   Eigen::VectorXd& c, Eigen::MatrixXd* jac) {
    std::vector<double> q;
    softmax(z, q);
    if (!jac) {
      geometric_gaps(*terms, q, c, nullptr);
      return;
    }
    Eigen::MatrixXd dq;
    geometric_gaps(*terms, q, c, &dq);
    // Chain rule through softmax: dz_c = q_c (g_c - <q, g>).
    jac->resize(c.size(), cells);
    const Eigen::Map<const Eigen::VectorXd> qv(q.data(), cells);
    for (Eigen::Index k = 0; k < c.size(); ++k) {
      const double mean = dq.row(k).dot(qv);
      for (Eigen::Index i = 0; i < cells; ++i) {
        (*jac)(k, i) = qv[i] * (dq(k, i) - mean);
      }
    }
  };
  return obj;
}

PhiResult phi_g_conditional(const DiscreteJoint& p) {
  const int n = p.n();
  const std::size_t states = std::size_t{1} << n;
  const Eigen::Index cells = Eigen::Index(p.size());

  // Linear constraints on the conditional table c -> q(y | x): rows sum to one
  // and the mass on y_j = 1 is unchanged by flipping any x_i, i != j.
  std::vector<Eigen::VectorXd> rows;
  for (std::size_t x = 0; x < states; ++x) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(cells);
    for (std::size_t y = 0; y < states; ++y) r[Eigen::Index(x | (y << n))] = 1.0;
    rows.push_back(std::move(r));
  }
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (i == j) continue;
      for (std::size_t x = 0; x < states; ++x) {
        if ((x >> i) & 1) continue;
        const std::size_t flipped = x | (std::size_t{1} << i);
        Eigen::VectorXd r = Eigen::VectorXd::Zero(cells);
        for (std::size_t y = 0; y < states; ++y) {
          if (!((y >> j) & 1)) continue;
          r[Eigen::Index(x | (y << n))] += 1.0;
          r[Eigen::Index(flipped | (y << n))] -= 1.0;
        }
        rows.push_back(std::move(r));
      }
    }
  }
  Eigen::MatrixXd a(Eigen::Index(rows.size()), cells);
  for (std::size_t k = 0; k < rows.size(); ++k) a.row(Eigen::Index(k)) = rows[k].transpose();
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv[rank] > 1e-10 * sv[0]) ++rank;
  const Eigen::MatrixXd basis = svd.matrixV().rightCols(cells - rank);

  Eigen::VectorXd w(cells);
  for (Eigen::Index c = 0; c < cells; ++c) w[c] = p[std::size_t(c)];

  // Log-barrier path: minimize -sum (w + mu) log q over the affine set for
  // decreasing mu, starting from the uniform conditional (strictly feasible).
  // The final point is within cells * mu of the optimum.
  Eigen::VectorXd q = Eigen::VectorXd::Constant(cells, 1.0 / double(states));
  auto barrier = [&](const Eigen::VectorXd& v, double mu) {
    double f = 0.0;
    for (Eigen::Index c = 0; c < cells; ++c) f -= (w[c] + mu) * std::log(v[c]);
    return f;
  };
  int iterations = 0;
  for (double mu = 1.0; mu > 1e-14; mu *= 0.1) {
    for (int it = 0; it < 100; ++it) {
      const Eigen::VectorXd weight = w.array() + mu;
      const Eigen::VectorXd grad = basis.transpose() * (-weight.cwiseQuotient(q));
      const Eigen::VectorXd curv = weight.cwiseQuotient(q.cwiseProduct(q));
      const Eigen::MatrixXd hess = basis.transpose() * curv.asDiagonal() * basis;
      const Eigen::VectorXd dz = -hess.ldlt().solve(grad);
      const double decrement = -grad.dot(dz);
      if (!(decrement > 1e-20)) break;
      const Eigen::VectorXd dq = basis * dz;
      double t = 1.0;
      for (Eigen::Index c = 0; c < cells; ++c) {
        if (dq[c] < 0.0) t = std::min(t, -0.99 * q[c] / dq[c]);
      }
      const double f0 = barrier(q, mu);
      bool moved = false;
      for (int bt = 0; bt < 60; ++bt, t *= 0.5) {
        const Eigen::VectorXd trial = q + t * dq;
        if (trial.minCoeff() <= 0.0) continue;
        if (barrier(trial, mu) <= f0 - 1e-4 * t * decrement) {
          q = trial;
          moved = true;
          break;
        }
      }
      ++iterations;
      if (!moved || decrement < 1e-15) break;
    }
  }

  const std::vector<double> px = marginal(p.probs(), x_mask(n));
  std::vector<double> joint(p.size());
  for (std::size_t c = 0; c < p.size(); ++c) {
    joint[c] = px[c & (states - 1)] * std::max(q[Eigen::Index(c)], 0.0);
  }
  DiscreteJoint q_star = DiscreteJoint::from_weights(n, std::move(joint));
  PhiDiagnostics diag;
  diag.status = "barrier";
  diag.iterations = iterations;
  diag.residual = geometric_constraint_residual(q_star);
  diag.kl = kl_divergence(p, q_star);
  if (diag.residual >= default_tolerances().al_constraint) {
    throw Error(ErrorCode::kNotConverged,
                "geometric projection: constraint residual " + std::to_string(diag.residual));
  }
  return {SplitModelKind::kG, diag.kl, std::move(q_star), diag};
}

PhiResult phi_g(const DiscreteJoint& p, const GOptions& options) {
  // Tables with empty cells put the optimum on the boundary of the simplex,
  // out of reach of the logit parameterization.
  if (!p.full_support()) return phi_g_conditional(p);

  const int n = p.n();
  const DiscreteJoint& work = p;
  const Eigen::Index cells = Eigen::Index(work.size());
  const numopt::VectorObjective obj = geometric_objective(work);

  // Restart 0 starts from the fully split projection, which satisfies every
  // constraint; later restarts perturb it with seeded noise.
  const PhiResult fs = phi_fs(work);
  const DiscreteJoint& start = fs.q_star;
  Eigen::VectorXd z0(cells);
  for (Eigen::Index i = 0; i < cells; ++i) {
    z0[i] = std::log(std::max(start[std::size_t(i)], 1e-300));
  }

  const Tolerances& tol = default_tolerances();
  // The solver aims 10x below the acceptance threshold so accepted tables
  // clear it with margin.
  numopt::AlOptions al_opts;
  al_opts.constraint_tol = 0.1 * tol.al_constraint;
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> noise(0.0, 0.5);

  PhiDiagnostics diag;
  diag.restarts = std::max(options.restarts, 1);
  std::optional<Eigen::VectorXd> best_z;
  double best_kl = std::numeric_limits<double>::infinity();
  double best_residual = std::numeric_limits<double>::infinity();
  for (int r = 0; r < diag.restarts; ++r) {
    Eigen::VectorXd x0 = z0;
    if (r > 0) {
      for (Eigen::Index i = 0; i < cells; ++i) x0[i] += noise(rng);
    }
    const numopt::AlResult al = numopt::augmented_lagrangian_min(obj, x0, al_opts);
    diag.iterations += al.inner_iterations;
    if (al.constraint_norm >= tol.al_constraint) continue;
    if (al.f < best_kl - 1e-12) {
      best_kl = al.f;
      best_z = al.x;
      best_residual = al.constraint_norm;
      diag.best_restart = r;
    }
  }
  // The fully split table is feasible, so a result above its KL means every
  // restart stalled; the convex conditional formulation settles it.
  if (!best_z || best_kl > fs.phi + 1e-9) {
    PhiResult r = phi_g_conditional(p);
    r.diagnostics.iterations += diag.iterations;
    r.diagnostics.restarts = diag.restarts;
    return r;
  }

  std::vector<double> q;
  softmax(*best_z, q);
  DiscreteJoint q_star = DiscreteJoint::from_weights(n, std::move(q));
  diag.residual = best_residual;
  diag.kl = kl_divergence(p, q_star);
  return {SplitModelKind::kG, diag.kl, std::move(q_star), diag};
}

PhiResult compute_split(const DiscreteJoint& p, SplitModelKind kind,
                        std::uint64_t seed) {
  switch (kind) {
    case SplitModelKind::kFS: return phi_fs(p);
    case SplitModelKind::kDS: return phi_ds(p);
    case SplitModelKind::kMD: return phi_md(p);
    case SplitModelKind::kG: {
      GOptions g;
      g.seed = seed;
      g.restarts = default_tolerances().g_restarts;
      return phi_g(p, g);
    }
    case SplitModelKind::kI: return phi_i(p);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown split model");
}

const MeasureOutcome* PhiSuite::find(SplitModelKind kind) const {
  for (const MeasureOutcome& m : measures) {
    if (m.kind == kind) return &m;
  }
  return nullptr;
}

MeasureValues PhiSuite::values() const {
  auto get = [&](SplitModelKind kind) -> std::optional<double> {
    const MeasureOutcome* m = find(kind);
    if (!m || !m->result) return std::nullopt;
    return m->result->phi;
  };
  MeasureValues v;
  v.i = get(SplitModelKind::kI);
  v.fs = get(SplitModelKind::kFS);
  v.ds = get(SplitModelKind::kDS);
  v.md = get(SplitModelKind::kMD);
  v.g = get(SplitModelKind::kG);
  return v;
}

PhiSuite phi_all(const DiscreteJoint& p, double tol, std::uint64_t seed,
                 const std::vector<SplitModelKind>& kinds) {
  PhiSuite suite;
  suite.mutual_information = mutual_information(p);
  for (SplitModelKind kind : kAllSplitModels) {
    if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) continue;
    MeasureOutcome outcome{kind, std::nullopt, {}};
    try {
      outcome.result = compute_split(p, kind, seed);
    } catch (const Error& e) {
      outcome.error = e.what();
    }
    suite.measures.push_back(std::move(outcome));
  }
  MeasureValues values = suite.values();
  values.i = suite.mutual_information;
  suite.hierarchy = verify_hierarchy(values, tol);
  return suite;
}

HierarchyReport verify_hierarchy(const DiscreteJoint& p, double tol,
                                 std::uint64_t seed) {
  return phi_all(p, tol, seed).hierarchy;
}

}  // namespace phigeo
