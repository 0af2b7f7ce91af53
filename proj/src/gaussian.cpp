#include "phigeo/gaussian.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <utility>

#include "phigeo/error.hpp"
#include "phigeo/random.hpp"
#include "phigeo/tolerances.hpp"

namespace phigeo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_covariance(const Eigen::MatrixXd& s, int n, const char* name) {
  if (s.rows() != n || s.cols() != n) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(name) + " must be " + std::to_string(n) + "x" +
                    std::to_string(n));
  }
  if (!s.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(name) + " has non-finite entries");
  }
  const Tolerances& tol = default_tolerances();
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > tol.symmetry * scale) {
    throw Error(ErrorCode::kNotSymmetric, std::string(name) + " is not symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
      s, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= tol.min_eigenvalue) {
    throw Error(ErrorCode::kNotPositiveDefinite,
                std::string(name) + " is not positive definite (min eigenvalue " +
                    std::to_string(eig.eigenvalues().minCoeff()) + ")");
  }
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& s) {
  return 0.5 * (s + s.transpose());
}

// log det from a Cholesky factorization, or nullopt if the factored matrix is
// not positive definite.
std::optional<double> log_det_spd(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  if (llt.info() != Eigen::Success) return std::nullopt;
  const Eigen::VectorXd diag = llt.matrixLLT().diagonal();
  if ((diag.array() <= 0.0).any()) return std::nullopt;
  return 2.0 * diag.array().log().sum();
}

std::optional<double> log_det_spd(const Eigen::MatrixXd& s) {
  return log_det_spd(Eigen::LLT<Eigen::MatrixXd>(s));
}

double log_det_checked(const Eigen::MatrixXd& s, const char* what) {
  const auto v = log_det_spd(s);
  if (!v) {
    throw Error(ErrorCode::kNotPositiveDefinite,
                std::string(what) + " is not positive definite");
  }
  return *v;
}

}  // namespace

void validate(const GaussianSystem& sys) {
  if (sys.n < 1) {
    throw Error(ErrorCode::kInvalidArgument, "Gaussian system needs n >= 1");
  }
  check_covariance(sys.sigma_x, sys.n, "sigma_x");
  check_covariance(sys.sigma_e, sys.n, "sigma_e");
  if (sys.a.rows() != sys.n || sys.a.cols() != sys.n) {
    throw Error(ErrorCode::kDimensionMismatch,
                "A must be " + std::to_string(sys.n) + "x" + std::to_string(sys.n));
  }
  if (!sys.a.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "A has non-finite entries");
  }
}

GaussianSystem make_gaussian_system(Eigen::MatrixXd sigma_x, Eigen::MatrixXd a,
                                    Eigen::MatrixXd sigma_e) {
  GaussianSystem sys{int(sigma_x.rows()), std::move(sigma_x), std::move(a),
                     std::move(sigma_e)};
  validate(sys);
  sys.sigma_x = symmetrized(sys.sigma_x);
  sys.sigma_e = symmetrized(sys.sigma_e);
  return sys;
}

GaussianJoint joint_covariance(const GaussianSystem& sys) {
  validate(sys);
  const int n = sys.n;
  GaussianJoint j;
  j.n = n;
  j.cov.resize(2 * n, 2 * n);
  const Eigen::MatrixXd xy = sys.sigma_x * sys.a.transpose();
  j.cov.topLeftCorner(n, n) = sys.sigma_x;
  j.cov.topRightCorner(n, n) = xy;
  j.cov.bottomLeftCorner(n, n) = xy.transpose();
  j.cov.bottomRightCorner(n, n) =
      symmetrized(sys.a * sys.sigma_x * sys.a.transpose() + sys.sigma_e);
  log_det_checked(j.cov, "joint covariance");
  return j;
}

GaussianJoint make_gaussian_joint(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols() || cov.rows() % 2 != 0 || cov.rows() == 0) {
    throw Error(ErrorCode::kDimensionMismatch,
                "joint covariance must be 2n x 2n");
  }
  const int n = int(cov.rows() / 2);
  check_covariance(cov, 2 * n, "joint covariance");
  return {n, symmetrized(cov)};
}

GaussianSystem system_from_joint(const GaussianJoint& joint) {
  const Eigen::MatrixXd sx = joint.xx();
  const Eigen::MatrixXd at = sx.llt().solve(joint.xy());
  GaussianSystem sys;
  sys.n = joint.n;
  sys.sigma_x = sx;
  sys.a = at.transpose();
  sys.sigma_e = symmetrized(joint.yy() - sys.a * joint.xy());
  return sys;
}

double gaussian_mutual_info(const GaussianSystem& sys) {
  validate(sys);
  const Eigen::MatrixXd sy = sys.a * sys.sigma_x * sys.a.transpose() + sys.sigma_e;
  return 0.5 * (log_det_checked(symmetrized(sy), "sigma_y") -
                log_det_checked(sys.sigma_e, "sigma_e"));
}

double gaussian_mutual_info(const GaussianJoint& joint) {
  return 0.5 * (log_det_checked(joint.xx(), "sigma_x") +
                log_det_checked(joint.yy(), "sigma_y") -
                log_det_checked(joint.cov, "joint covariance"));
}

double gaussian_kl(const GaussianJoint& p, const GaussianJoint& q) {
  if (p.n != q.n || p.cov.rows() != q.cov.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "Gaussian KL of mismatched sizes");
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(q.cov);
  const double ld_q = log_det_checked(q.cov, "q covariance");
  const double ld_p = log_det_checked(p.cov, "p covariance");
  const double trace = llt.solve(p.cov).trace();
  return 0.5 * (trace - double(p.cov.rows()) + ld_q - ld_p);
}

GaussianThetaCoords gaussian_theta(const GaussianSystem& sys) {
  validate(sys);
  GaussianThetaCoords t;
  t.theta_xx = symmetrized(sys.sigma_x.inverse());
  t.theta_yy = symmetrized(sys.sigma_e.inverse());
  t.theta_xy = -sys.a.transpose() * t.theta_yy;
  return t;
}

GaussianSystem system_from_theta(const GaussianThetaCoords& t) {
  GaussianSystem sys;
  sys.n = int(t.theta_xx.rows());
  sys.sigma_x = symmetrized(t.theta_xx.inverse());
  sys.sigma_e = symmetrized(t.theta_yy.inverse());
  // theta_xy = -A^T theta_yy  =>  A = -(theta_xy theta_yy^-1)^T.
  sys.a = -(t.theta_xy * sys.sigma_e).transpose();
  validate(sys);
  return sys;
}

Eigen::MatrixXd joint_precision(const GaussianThetaCoords& t) {
  const Eigen::Index n = t.theta_xx.rows();
  Eigen::MatrixXd k(2 * n, 2 * n);
  k.topLeftCorner(n, n) =
      t.theta_xx + t.theta_xy * t.theta_yy.llt().solve(t.theta_xy.transpose());
  k.topRightCorner(n, n) = t.theta_xy;
  k.bottomLeftCorner(n, n) = t.theta_xy.transpose();
  k.bottomRightCorner(n, n) = t.theta_yy;
  return symmetrized(k);
}

GaussianSplitResult phi_fs_gauss(const GaussianSystem& sys) {
  const GaussianJoint joint = joint_covariance(sys);
  const int n = sys.n;
  const Eigen::MatrixXd yx = joint.yx();
  const Eigen::MatrixXd yy = joint.yy();
  GaussianSplitResult out;
  out.kind = SplitModelKind::kFS;
  out.a_split = Eigen::MatrixXd::Zero(n, n);
  out.sigma_e_split = Eigen::MatrixXd::Zero(n, n);
  double sum_log_var = 0.0;
  for (int i = 0; i < n; ++i) {
    const double b = yx(i, i) / sys.sigma_x(i, i);
    const double v = yy(i, i) - yx(i, i) * b;
    out.a_split(i, i) = b;
    out.sigma_e_split(i, i) = v;
    sum_log_var += std::log(v);
  }
  out.phi = 0.5 * (sum_log_var - log_det_checked(sys.sigma_e, "sigma_e"));
  return out;
}

namespace {

// Entries (i <= j) of the joint precision left free in the diagonally split
// model: everything except x_i-y_j with i != j.
std::vector<std::pair<int, int>> ds_free_entries(int n) {
  std::vector<std::pair<int, int>> free;
  for (int i = 0; i < 2 * n; ++i) {
    for (int j = i; j < 2 * n; ++j) {
      const bool cross = i < n && j >= n;
      if (cross && j - n != i) continue;
      free.emplace_back(i, j);
    }
  }
  return free;
}

}  // namespace

GaussianSplitResult phi_ds_gauss(const GaussianSystem& sys) {
  const GaussianJoint joint = joint_covariance(sys);
  const int n = sys.n;
  const int m = 2 * n;

  // Work with the correlation matrix; the zero pattern of the precision is
  // unchanged by diagonal rescaling.
  const Eigen::VectorXd scale = joint.cov.diagonal().cwiseSqrt();
  const Eigen::MatrixXd corr =
      scale.cwiseInverse().asDiagonal() * joint.cov * scale.cwiseInverse().asDiagonal();
  const auto free = ds_free_entries(n);

  auto build = [&](const Eigen::VectorXd& k) {
    Eigen::MatrixXd km = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t f = 0; f < free.size(); ++f) {
      const auto [i, j] = free[f];
      km(i, j) = k[Eigen::Index(f)];
      km(j, i) = k[Eigen::Index(f)];
    }
    return km;
  };

  // Maximum-likelihood covariance selection: minimize tr(K R) - log det K.
  numopt::VectorObjective obj;
  obj.dim = Eigen::Index(free.size());
  obj.value = [&](const Eigen::VectorXd& k, Eigen::VectorXd* grad) {
    const Eigen::MatrixXd km = build(k);
    const Eigen::LLT<Eigen::MatrixXd> llt(km);
    const auto ld = log_det_spd(llt);
    if (!ld) return kInf;
    if (grad) {
      const Eigen::MatrixXd g =
          corr - llt.solve(Eigen::MatrixXd::Identity(m, m));
      grad->resize(obj.dim);
      for (std::size_t f = 0; f < free.size(); ++f) {
        const auto [i, j] = free[f];
        (*grad)[Eigen::Index(f)] = (i == j ? 1.0 : 2.0) * g(i, j);
      }
    }
    return (km * corr).trace() - *ld;
  };

  Eigen::VectorXd k0 = Eigen::VectorXd::Zero(obj.dim);
  for (std::size_t f = 0; f < free.size(); ++f) {
    if (free[f].first == free[f].second) k0[Eigen::Index(f)] = 1.0;
  }
  numopt::QnResult qn = numopt::quasi_newton_min(obj, k0);

  // Newton polish on the moment mismatch. Near the optimum f changes by less
  // than its rounding error, so steps are accepted on the gradient instead.
  auto mismatch = [&](const Eigen::VectorXd& k, Eigen::MatrixXd* s_out) {
    const Eigen::LLT<Eigen::MatrixXd> llt(build(k));
    if (llt.info() != Eigen::Success || !log_det_spd(llt)) return kInf;
    const Eigen::MatrixXd s = llt.solve(Eigen::MatrixXd::Identity(m, m));
    double worst = 0.0;
    for (const auto& [i, j] : free) worst = std::max(worst, std::abs(corr(i, j) - s(i, j)));
    if (s_out) *s_out = s;
    return worst;
  };
  Eigen::MatrixXd s;
  double mis = mismatch(qn.x, &s);
  for (int it = 0; it < 20 && mis > 1e-14; ++it) {
    const Eigen::Index d = obj.dim;
    Eigen::VectorXd g(d);
    Eigen::MatrixXd h(d, d);
    for (Eigen::Index a = 0; a < d; ++a) {
      const auto [i, j] = free[std::size_t(a)];
      g[a] = corr(i, j) - s(i, j);
      for (Eigen::Index b = 0; b < d; ++b) {
        const auto [k, l] = free[std::size_t(b)];
        h(a, b) = k == l ? s(i, k) * s(k, j) : s(i, k) * s(l, j) + s(i, l) * s(k, j);
      }
    }
    const Eigen::VectorXd step = h.partialPivLu().solve(-g);
    bool improved = false;
    for (double t = 1.0; t > 1e-4; t *= 0.5) {
      Eigen::MatrixXd s_trial;
      const double trial = mismatch(qn.x + t * step, &s_trial);
      if (trial < mis) {
        qn.x += t * step;
        mis = trial;
        s = s_trial;
        improved = true;
        break;
      }
    }
    if (!improved) break;
    ++qn.iterations;
  }
  if (mis < 1e-11) qn.status = numopt::QnStatus::kConverged;
  qn.grad_norm = mis;

  const Eigen::MatrixXd corr_star = build(qn.x).inverse();
  GaussianJoint q;
  q.n = n;
  q.cov = symmetrized(scale.asDiagonal() * corr_star * scale.asDiagonal());

  double residual = 0.0;
  for (const auto& [i, j] : free) {
    residual = std::max(residual, std::abs(q.cov(i, j) - joint.cov(i, j)));
  }
  const double cov_scale = std::max(1.0, joint.cov.cwiseAbs().maxCoeff());
  if (qn.status != numopt::QnStatus::kConverged &&
      residual > default_tolerances().al_constraint * cov_scale) {
    throw Error(ErrorCode::kNotConverged,
                "diagonally split projection: " +
                    std::string(numopt::qn_status_name(qn.status)) +
                    ", moment residual " + std::to_string(residual));
  }

  const GaussianSystem projected = system_from_joint(q);
  GaussianSplitResult out;
  out.kind = SplitModelKind::kDS;
  out.a_split = projected.a;
  out.sigma_e_split = projected.sigma_e;
  out.phi = gaussian_kl(joint, q);
  out.status = std::string(numopt::qn_status_name(qn.status));
  out.iterations = qn.iterations;
  out.gradient_norm = qn.grad_norm;
  out.residual = residual;
  return out;
}

numopt::VectorObjective gaussian_geometric_objective(const GaussianSystem& sys) {
  const GaussianJoint joint = joint_covariance(sys);
  const Eigen::MatrixXd sx = joint.xx();
  const Eigen::MatrixXd syx = joint.yx();
  const Eigen::MatrixXd sy = joint.yy();
  const double ld_e = log_det_checked(sys.sigma_e, "sigma_e");
  numopt::VectorObjective obj;
  obj.dim = sys.n;
  obj.value = [sx, syx, sy, ld_e](const Eigen::VectorXd& d,
                                  Eigen::VectorXd* grad) {
    const auto dm = d.asDiagonal();
    // cov(y - D x) = sy - D sxy - syx D + D sx D.
    const Eigen::MatrixXd c = symmetrized(sy - dm * syx.transpose() - syx * dm +
                                          dm * sx * dm);
    const Eigen::LLT<Eigen::MatrixXd> llt(c);
    const auto ld = log_det_spd(llt);
    if (!ld) return kInf;
    if (grad) *grad = llt.solve(dm * sx - syx).diagonal();
    return 0.5 * (*ld - ld_e);
  };
  return obj;
}

GaussianSplitResult phi_g_gauss(const GaussianSystem& sys) {
  const GaussianJoint joint = joint_covariance(sys);
  const int n = sys.n;
  const numopt::VectorObjective obj = gaussian_geometric_objective(sys);

  // Two starts: per-channel regression coefficients and zero.
  Eigen::VectorXd regress(n);
  const Eigen::MatrixXd syx = joint.yx();
  for (int i = 0; i < n; ++i) regress[i] = syx(i, i) / sys.sigma_x(i, i);
  std::optional<numopt::QnResult> best;
  int total_iterations = 0;
  for (const Eigen::VectorXd& start :
       {regress, Eigen::VectorXd(Eigen::VectorXd::Zero(n))}) {
    numopt::QnResult r = numopt::quasi_newton_min(obj, start);
    total_iterations += r.iterations;
    if (!best || r.f < best->f) best = std::move(r);
  }
  if (!std::isfinite(best->f)) {
    throw Error(ErrorCode::kNotPositiveDefinite,
                "geometric projection: residual covariance is not positive definite");
  }

  GaussianSplitResult out;
  out.kind = SplitModelKind::kG;
  out.a_split = best->x.asDiagonal();
  const auto dm = best->x.asDiagonal();
  out.sigma_e_split = symmetrized(joint.yy() - dm * joint.xy() - syx * dm +
                                  dm * sys.sigma_x * dm);
  out.phi = best->f;
  out.status = std::string(numopt::qn_status_name(best->status));
  out.iterations = total_iterations;
  out.gradient_norm = best->grad_norm;
  Eigen::MatrixXd off = out.a_split;
  off.diagonal().setZero();
  out.residual = off.cwiseAbs().maxCoeff();
  return out;
}

const GaussianMeasureOutcome* GaussianSuite::find(SplitModelKind kind) const {
  for (const GaussianMeasureOutcome& m : measures) {
    if (m.kind == kind) return &m;
  }
  return nullptr;
}

MeasureValues GaussianSuite::values() const {
  auto get = [&](SplitModelKind kind) -> std::optional<double> {
    const GaussianMeasureOutcome* m = find(kind);
    if (m && m->result) return m->result->phi;
    return std::nullopt;
  };
  MeasureValues v;
  v.i = mutual_information;
  v.fs = get(SplitModelKind::kFS);
  v.ds = get(SplitModelKind::kDS);
  v.g = get(SplitModelKind::kG);
  return v;
}

GaussianSuite gaussian_phi_all(const GaussianSystem& sys, double tol) {
  GaussianSuite suite;
  suite.mutual_information = gaussian_mutual_info(sys);
  using Fn = GaussianSplitResult (*)(const GaussianSystem&);
  const std::pair<SplitModelKind, Fn> runs[] = {
      {SplitModelKind::kFS, &phi_fs_gauss},
      {SplitModelKind::kDS, &phi_ds_gauss},
      {SplitModelKind::kG, &phi_g_gauss}};
  for (const auto& [kind, fn] : runs) {
    GaussianMeasureOutcome m{kind, std::nullopt, {}};
    try {
      m.result = fn(sys);
    } catch (const Error& e) {
      m.error = e.what();
    }
    suite.measures.push_back(std::move(m));
  }
  suite.hierarchy = verify_hierarchy(suite.values(), tol);
  return suite;
}

GaussianSystem random_gaussian_system(int n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "n must be >= 1");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  auto covariance = [&] {
    Eigen::MatrixXd f(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) f(i, j) = normal(rng);
    }
    return symmetrized(f * f.transpose() / double(n) +
                       1e-3 * Eigen::MatrixXd::Identity(n, n));
  };
  GaussianSystem sys;
  sys.n = n;
  sys.sigma_x = covariance();
  sys.a.resize(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) sys.a(i, j) = uniform(rng);
  }
  const double radius =
      Eigen::EigenSolver<Eigen::MatrixXd>(sys.a, false).eigenvalues().cwiseAbs().maxCoeff();
  if (radius > 0.9) sys.a *= 0.9 / radius;
  sys.sigma_e = covariance();
  return sys;
}

}  // namespace phigeo
