#include <cmath>
#include <random>

#include "doctest.h"
#include "phigeo/error.hpp"
#include "phigeo/gaussian.hpp"

using namespace phigeo;
using doctest::Approx;
using Eigen::MatrixXd;

namespace {

MatrixXd mat2(double a, double b, double c, double d) {
  MatrixXd m(2, 2);
  m << a, b, c, d;
  return m;
}

MatrixXd eye(int n) { return MatrixXd::Identity(n, n); }

double max_abs(const MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

// Maximum-determinant completion of the joint covariance over the two unknown
// cross entries cov(x1, y2) and cov(x2, y1), found by nested grid search.
MatrixXd max_det_completion(const MatrixXd& cov) {
  auto log_det = [&](double u, double v) {
    MatrixXd s = cov;
    s(0, 3) = s(3, 0) = u;
    s(1, 2) = s(2, 1) = v;
    const Eigen::LLT<MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) return -1e300;
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  };
  const double ru = std::sqrt(cov(0, 0) * cov(3, 3));
  const double rv = std::sqrt(cov(1, 1) * cov(2, 2));
  double bu = 0, bv = 0, best = log_det(0, 0);
  double step_u = ru / 100, step_v = rv / 100;
  double lo_u = -ru, hi_u = ru, lo_v = -rv, hi_v = rv;
  while (step_u > 1e-11 * ru) {
    for (double u = lo_u; u <= hi_u + 0.5 * step_u; u += step_u) {
      for (double v = lo_v; v <= hi_v + 0.5 * step_v; v += step_v) {
        const double f = log_det(u, v);
        if (f > best) {
          best = f;
          bu = u;
          bv = v;
        }
      }
    }
    lo_u = bu - 2 * step_u;
    hi_u = bu + 2 * step_u;
    lo_v = bv - 2 * step_v;
    hi_v = bv + 2 * step_v;
    step_u /= 10;
    step_v /= 10;
  }
  MatrixXd s = cov;
  s(0, 3) = s(3, 0) = bu;
  s(1, 2) = s(2, 1) = bv;
  return s;
}

GaussianJoint joint_of(const MatrixXd& sx, const MatrixXd& a, const MatrixXd& se) {
  return joint_covariance(make_gaussian_system(sx, a, se));
}

}  // namespace

TEST_CASE("system validation") {
  CHECK_NOTHROW(make_gaussian_system(eye(2), eye(2), eye(2)));
  auto code_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kInvalidArgument;
  };
  CHECK(code_of([] { make_gaussian_system(mat2(1, 0.5, 0.4, 1), eye(2), eye(2)); }) ==
        ErrorCode::kNotSymmetric);
  CHECK(code_of([] { make_gaussian_system(eye(2), eye(2), mat2(1, 2, 2, 1)); }) ==
        ErrorCode::kNotPositiveDefinite);
  CHECK(code_of([] { make_gaussian_system(eye(2), eye(3), eye(2)); }) ==
        ErrorCode::kDimensionMismatch);
  CHECK(code_of([] { make_gaussian_system(eye(2), eye(2), 1e-12 * eye(2)); }) ==
        ErrorCode::kNotPositiveDefinite);
}

TEST_CASE("joint covariance") {
  SUBCASE("A = 0 is block diagonal") {
    const MatrixXd sx = mat2(2, 0.3, 0.3, 1);
    const MatrixXd se = mat2(1, -0.2, -0.2, 0.5);
    const GaussianJoint j = joint_of(sx, MatrixXd::Zero(2, 2), se);
    CHECK(max_abs(j.xx() - sx) == 0.0);
    CHECK(max_abs(j.yy() - se) == 0.0);
    CHECK(max_abs(j.xy()) == 0.0);
  }
  SUBCASE("identity coupling") {
    const double s2 = 0.3;
    const GaussianJoint j = joint_of(eye(2), eye(2), s2 * eye(2));
    CHECK(max_abs(j.xy() - eye(2)) < 1e-15);
    CHECK(max_abs(j.yy() - (1 + s2) * eye(2)) < 1e-15);
  }
  SUBCASE("cross block follows y = A x") {
    const MatrixXd a = mat2(0.2, 0.7, -0.1, 0.4);
    const MatrixXd sx = mat2(1.5, 0.2, 0.2, 0.8);
    const GaussianJoint j = joint_of(sx, a, eye(2));
    // cov(x, y) = E[x (A x)^T] = sigma_x A^T.
    CHECK(max_abs(j.xy() - sx * a.transpose()) < 1e-15);
    CHECK(max_abs(j.yx() - a * sx) < 1e-15);
  }
  SUBCASE("random systems are positive definite") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const GaussianJoint j = joint_covariance(random_gaussian_system(2 + int(seed % 3), seed));
      const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(j.cov);
      CHECK(eig.eigenvalues().minCoeff() > 0.0);
      CHECK(max_abs(j.cov - j.cov.transpose()) == 0.0);
    }
  }
  SUBCASE("round trip through regression") {
    const GaussianSystem s = random_gaussian_system(3, 4);
    const GaussianSystem back = system_from_joint(joint_covariance(s));
    CHECK(max_abs(back.a - s.a) < 1e-10);
    CHECK(max_abs(back.sigma_e - s.sigma_e) < 1e-10);
  }
}

TEST_CASE("mutual information") {
  CHECK(gaussian_mutual_info(make_gaussian_system(eye(2), MatrixXd::Zero(2, 2),
                                                  eye(2))) == Approx(0.0));
  const GaussianSystem scalar = make_gaussian_system(eye(1), eye(1), eye(1));
  CHECK(gaussian_mutual_info(scalar) == Approx(0.5 * std::log(2.0)).epsilon(1e-14));
  CHECK(gaussian_mutual_info(scalar) == Approx(0.346574).epsilon(1e-6));

  const GaussianSystem diag = make_gaussian_system(eye(2), 0.9 * eye(2), 0.19 * eye(2));
  const double expected = std::log(1.0 / 0.19);  // two channels of 1/2 log(1/0.19)
  CHECK(gaussian_mutual_info(diag) == Approx(expected).epsilon(1e-12));
  CHECK(std::abs(gaussian_mutual_info(diag) -
                 gaussian_mutual_info(joint_covariance(diag))) < 1e-10);

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const GaussianSystem s = random_gaussian_system(1 + int(seed % 4), seed);
    CHECK(std::abs(gaussian_mutual_info(s) -
                   gaussian_mutual_info(joint_covariance(s))) < 1e-10);
  }
}

TEST_CASE("Gaussian KL") {
  const GaussianJoint p = joint_covariance(random_gaussian_system(2, 1));
  const GaussianJoint q = joint_covariance(random_gaussian_system(2, 2));
  CHECK(std::abs(gaussian_kl(p, p)) < 1e-14);
  CHECK(std::abs(gaussian_kl(p, q) - gaussian_kl(q, p)) > 1e-3);
  CHECK(gaussian_kl(p, q) > 0.0);

  // One-dimensional case: 1/2 (1/2 - 1 + ln 2) for variances 1 and 2 (as 2x2
  // joints with an independent standard-normal partner).
  MatrixXd cp = eye(2), cq = eye(2);
  cq(0, 0) = 2.0;
  const double v = gaussian_kl(make_gaussian_joint(cp), make_gaussian_joint(cq));
  CHECK(v == Approx(0.5 * (0.5 - 1.0 + std::log(2.0))).epsilon(1e-14));
  CHECK(v == Approx(0.096574).epsilon(1e-5));

  CHECK_THROWS_AS(gaussian_kl(p, joint_covariance(random_gaussian_system(3, 0))), Error);
}

TEST_CASE("theta coordinates") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const GaussianSystem s = random_gaussian_system(2 + int(seed % 2), seed);
    const GaussianThetaCoords t = gaussian_theta(s);
    CHECK(max_abs(t.theta_xx * s.sigma_x - eye(s.n)) < 1e-9);
    CHECK(max_abs(t.theta_yy * s.sigma_e - eye(s.n)) < 1e-9);
    const GaussianSystem back = system_from_theta(t);
    CHECK(max_abs(back.sigma_x - s.sigma_x) < 1e-9);
    CHECK(max_abs(back.a - s.a) < 1e-9);
    CHECK(max_abs(back.sigma_e - s.sigma_e) < 1e-9);
    // Assembled precision inverts the joint covariance.
    const MatrixXd k = joint_precision(t);
    CHECK(max_abs(k * joint_covariance(s).cov - eye(2 * s.n)) < 1e-9);
  }
}

TEST_CASE("fully split Gaussian measure") {
  SUBCASE("diagonal system") {
    const GaussianSystem s = make_gaussian_system(
        mat2(2, 0, 0, 0.5), mat2(0.6, 0, 0, -0.3), mat2(0.4, 0, 0, 1.1));
    CHECK(std::abs(phi_fs_gauss(s).phi) < 1e-14);
  }
  SUBCASE("correlated noise without coupling") {
    const GaussianSystem s = make_gaussian_system(
        mat2(1.3, 0.4, 0.4, 0.9), MatrixXd::Zero(2, 2), mat2(1, 0.5, 0.5, 1));
    CHECK(phi_fs_gauss(s).phi == Approx(-0.5 * std::log(0.75)).epsilon(1e-12));
    CHECK(phi_fs_gauss(s).phi == Approx(0.143841).epsilon(1e-5));
    CHECK(std::abs(gaussian_mutual_info(s)) < 1e-15);
  }
  SUBCASE("matches the KL to the per-channel regression model") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const GaussianSystem s = random_gaussian_system(2 + int(seed % 3), seed);
      const GaussianJoint p = joint_covariance(s);
      // Build q* independently: y_i = b_i x_i + e_i, e independent.
      MatrixXd b = MatrixXd::Zero(s.n, s.n), v = MatrixXd::Zero(s.n, s.n);
      for (int i = 0; i < s.n; ++i) {
        const double cxy = p.cov(i, s.n + i);
        b(i, i) = cxy / p.cov(i, i);
        v(i, i) = p.cov(s.n + i, s.n + i) - cxy * cxy / p.cov(i, i);
      }
      const GaussianJoint q = joint_of(s.sigma_x, b, v);
      const GaussianSplitResult r = phi_fs_gauss(s);
      CHECK(std::abs(r.phi - gaussian_kl(p, q)) < 1e-10);
      CHECK(max_abs(r.a_split - b) < 1e-12);
    }
  }
}

TEST_CASE("diagonally split Gaussian measure") {
  SUBCASE("diagonal coupling and noise with correlated inputs") {
    const MatrixXd a = mat2(0.5, 0, 0, -0.7);
    const GaussianSystem s =
        make_gaussian_system(mat2(1.2, 0.6, 0.6, 0.9), a, mat2(0.3, 0, 0, 0.8));
    const GaussianSplitResult r = phi_ds_gauss(s);
    CHECK(std::abs(r.phi) < 1e-10);
    CHECK(max_abs(r.a_split - a) < 1e-7);
  }
  SUBCASE("correlated noise without coupling") {
    const GaussianSystem s = make_gaussian_system(
        mat2(1.3, 0.4, 0.4, 0.9), MatrixXd::Zero(2, 2), mat2(1, 0.5, 0.5, 1));
    CHECK(std::abs(phi_ds_gauss(s).phi) < 1e-10);
  }
  SUBCASE("cross-coupled example keeps off-diagonal connectivity") {
    const GaussianSystem s =
        make_gaussian_system(eye(2), mat2(0.8, 0.3, 0.3, 0.8), 0.1 * eye(2));
    const GaussianSplitResult r = phi_ds_gauss(s);
    CHECK(std::abs(r.a_split(0, 1)) > 1e-3);
    CHECK(std::abs(r.a_split(1, 0)) > 1e-3);

    const MatrixXd p = joint_covariance(s).cov;
    const MatrixXd ref = max_det_completion(p);
    const GaussianSystem ref_sys = system_from_joint(make_gaussian_joint(ref));
    CHECK(max_abs(r.a_split - ref_sys.a) < 1e-6);
    CHECK(max_abs(r.sigma_e_split - ref_sys.sigma_e) < 1e-6);
    CHECK(std::abs(r.phi - gaussian_kl(make_gaussian_joint(p),
                                       make_gaussian_joint(ref))) < 1e-8);
  }
  SUBCASE("preserved moments and zero cross precision on random systems") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const GaussianSystem s = random_gaussian_system(2, seed);
      const GaussianSplitResult r = phi_ds_gauss(s);
      CHECK(r.residual < 1e-8);
      const GaussianSystem q_sys{2, s.sigma_x, r.a_split, r.sigma_e_split};
      const MatrixXd k = joint_covariance(q_sys).cov.inverse();
      CHECK(std::abs(k(0, 3)) < 1e-6);
      CHECK(std::abs(k(1, 2)) < 1e-6);

      const MatrixXd ref = max_det_completion(joint_covariance(s).cov);
      CHECK(std::abs(r.phi - gaussian_kl(joint_covariance(s),
                                         make_gaussian_joint(ref))) < 1e-7);
    }
  }
  SUBCASE("three elements") {
    const GaussianSystem s = random_gaussian_system(3, 8);
    const GaussianSplitResult r = phi_ds_gauss(s);
    CHECK(r.residual < 1e-8);
    CHECK(r.phi <= gaussian_mutual_info(s) + 1e-8);
    CHECK(r.phi <= phi_fs_gauss(s).phi + 1e-8);
  }
}

TEST_CASE("geometric Gaussian measure") {
  SUBCASE("pure cross coupling") {
    for (int k = 0; k <= 5; ++k) {
      const double a = 0.1 * k;
      const GaussianSystem s = make_gaussian_system(eye(2), mat2(0, a, a, 0), eye(2));
      const GaussianSplitResult r = phi_g_gauss(s);
      CAPTURE(a);
      CHECK(std::abs(r.phi - std::log(1 + a * a)) < 1e-6);
      CHECK(max_abs(r.a_split) < 1e-6);
      CHECK(r.residual < 1e-8);
    }
    const GaussianSystem s =
        make_gaussian_system(eye(2), mat2(0, 0.5, 0.5, 0), eye(2));
    CHECK(phi_g_gauss(s).phi == Approx(0.223144).epsilon(1e-5));
  }
  SUBCASE("diagonal system") {
    const MatrixXd a = mat2(0.4, 0, 0, 0.9);
    const GaussianSystem s =
        make_gaussian_system(mat2(1.5, 0, 0, 0.7), a, mat2(0.2, 0, 0, 0.6));
    const GaussianSplitResult r = phi_g_gauss(s);
    CHECK(std::abs(r.phi) < 1e-10);
    CHECK(max_abs(r.a_split - a) < 1e-8);
    CHECK(std::abs(phi_ds_gauss(s).phi) < 1e-8);
    CHECK(std::abs(phi_fs_gauss(s).phi) < 1e-8);
  }
  SUBCASE("per-entry calculus oracle") {
    // With sigma_x = I and symmetric cross coupling the objective separates
    // into a 1-D problem along d1 = d2 = d; compare to a fine grid.
    const GaussianSystem s =
        make_gaussian_system(eye(2), mat2(0.6, 0.25, 0.25, 0.6), 0.5 * eye(2));
    const numopt::VectorObjective obj = gaussian_geometric_objective(s);
    double best_d = 0, best_f = 1e300;
    for (double d = -2; d <= 2; d += 1e-5) {
      const double f = obj.value(Eigen::Vector2d(d, d), nullptr);
      if (f < best_f) {
        best_f = f;
        best_d = d;
      }
    }
    const GaussianSplitResult r = phi_g_gauss(s);
    CHECK(std::abs(r.a_split(0, 0) - best_d) < 1e-4);
    CHECK(std::abs(r.phi - best_f) < 1e-8);
  }
  SUBCASE("projected noise minimizes KL for the fitted connectivity") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const GaussianSystem s = random_gaussian_system(2, seed);
      const GaussianSplitResult r = phi_g_gauss(s);
      const GaussianJoint p = joint_covariance(s);
      const GaussianSystem q_sys{2, s.sigma_x, r.a_split, r.sigma_e_split};
      const double base = gaussian_kl(p, joint_covariance(q_sys));
      CHECK(std::abs(base - r.phi) < 1e-10);
      for (int k = 0; k < 20; ++k) {
        MatrixXd e(2, 2);
        e << nd(rng), nd(rng), 0, nd(rng);
        e(1, 0) = e(0, 1);
        MatrixXd se = r.sigma_e_split + 0.05 * e;
        if (Eigen::SelfAdjointEigenSolver<MatrixXd>(se).eigenvalues().minCoeff() <= 0) {
          continue;
        }
        const GaussianSystem pert{2, s.sigma_x, r.a_split, se};
        CHECK(gaussian_kl(p, joint_covariance(pert)) >= base - 1e-14);
      }
    }
  }
  SUBCASE("gradient check") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd(0.0, 0.5);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const GaussianSystem s = random_gaussian_system(2 + int(seed % 3), seed);
      Eigen::VectorXd d(s.n);
      for (int i = 0; i < s.n; ++i) d[i] = nd(rng);
      CHECK(numopt::finite_diff_grad_check(gaussian_geometric_objective(s), d) < 1e-5);
    }
  }
}

TEST_CASE("Gaussian hierarchy") {
  SUBCASE("correlated noise breaks the FS upper bound only") {
    const GaussianSystem s = make_gaussian_system(
        eye(2), MatrixXd::Zero(2, 2), mat2(1, 0.5, 0.5, 1));
    const GaussianSuite suite = gaussian_phi_all(s);
    CHECK(suite.hierarchy.fs_exceeds_mi);
    CHECK(suite.hierarchy.all_passed());
  }
  SUBCASE("random systems") {
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
      const GaussianSystem s = random_gaussian_system(2, seed);
      const GaussianSuite suite = gaussian_phi_all(s, 1e-8);
      CAPTURE(seed);
      for (const GaussianMeasureOutcome& m : suite.measures) {
        CHECK(m.result.has_value());
      }
      CHECK(suite.hierarchy.all_passed());
      const GaussianMeasureOutcome* g = suite.find(SplitModelKind::kG);
      REQUIRE(g);
      CHECK(g->result->residual < 1e-8);
    }
  }
}
