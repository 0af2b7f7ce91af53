#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "phigeo/hierarchy.hpp"
#include "phigeo/numopt.hpp"
#include "phigeo/split_model.hpp"

namespace phigeo {

// Zero-mean linear Gaussian system y = A x + e with x ~ N(0, sigma_x) and
// e ~ N(0, sigma_e) independent of x.
struct GaussianSystem {
  int n = 0;
  Eigen::MatrixXd sigma_x;
  Eigen::MatrixXd a;
  Eigen::MatrixXd sigma_e;
};

// Checks shapes, symmetry (1e-12) and positive definiteness (smallest
// eigenvalue above 1e-10) of both covariances.
void validate(const GaussianSystem& sys);
GaussianSystem make_gaussian_system(Eigen::MatrixXd sigma_x, Eigen::MatrixXd a,
                                    Eigen::MatrixXd sigma_e);

// Covariance of (x, y):
//   [ sigma_x        sigma_x A^T               ]
//   [ A sigma_x      A sigma_x A^T + sigma_e   ]
struct GaussianJoint {
  int n = 0;
  Eigen::MatrixXd cov;

  Eigen::MatrixXd xx() const { return cov.topLeftCorner(n, n); }
  Eigen::MatrixXd yy() const { return cov.bottomRightCorner(n, n); }
  Eigen::MatrixXd xy() const { return cov.topRightCorner(n, n); }
  Eigen::MatrixXd yx() const { return cov.bottomLeftCorner(n, n); }
};

GaussianJoint joint_covariance(const GaussianSystem& sys);
// Wraps a 2n x 2n covariance after checking symmetry and definiteness.
GaussianJoint make_gaussian_joint(const Eigen::MatrixXd& cov);
// Regression of y on x: A = cov_yx sigma_x^-1, sigma_e = cov_yy - A sigma_x A^T.
GaussianSystem system_from_joint(const GaussianJoint& joint);

// I(X;Y) = 1/2 log(det sigma_y / det sigma_e).
double gaussian_mutual_info(const GaussianSystem& sys);
// I(X;Y) = 1/2 log(det sigma_x det sigma_y / det cov).
double gaussian_mutual_info(const GaussianJoint& joint);

// D(p : q) = 1/2 (tr(q^-1 p) - 2n + log(det q / det p)).
double gaussian_kl(const GaussianJoint& p, const GaussianJoint& q);

// Parameters of the factorized density p(x) p(y|x):
//   theta_xx = sigma_x^-1, theta_yy = sigma_e^-1, theta_xy = -A^T sigma_e^-1.
// theta_xx is the precision of the x marginal; the xx block of the joint
// precision is theta_xx + theta_xy theta_yy^-1 theta_xy^T.
struct GaussianThetaCoords {
  Eigen::MatrixXd theta_xx;
  Eigen::MatrixXd theta_yy;
  Eigen::MatrixXd theta_xy;
};

GaussianThetaCoords gaussian_theta(const GaussianSystem& sys);
GaussianSystem system_from_theta(const GaussianThetaCoords& theta);
Eigen::MatrixXd joint_precision(const GaussianThetaCoords& theta);

struct GaussianSplitResult {
  SplitModelKind kind = SplitModelKind::kFS;
  // Connectivity and noise covariance of the projected system.
  Eigen::MatrixXd a_split;
  Eigen::MatrixXd sigma_e_split;
  double phi = 0;  // nats
  std::string status = "ok";
  int iterations = 0;
  double gradient_norm = 0;
  // DS: largest mismatch on the preserved moments. G: largest off-diagonal
  // magnitude of a_split.
  double residual = 0;
};

// q*(y|x) = prod_i p(y_i | x_i): per-channel regressions with independent
// noise.
GaussianSplitResult phi_fs_gauss(const GaussianSystem& sys);

// Projection onto systems whose joint precision has zero x_i-y_j entries for
// i != j (a covariance-selection problem solved by quasi-Newton). The result
// keeps sigma_x, sigma_y and each cov(x_i, y_i).
GaussianSplitResult phi_ds_gauss(const GaussianSystem& sys);

// Minimizes 1/2 log det cov(y - D x) over diagonal D; the projected noise is
// that residual covariance and phi = 1/2 log(det sigma_e' / det sigma_e).
GaussianSplitResult phi_g_gauss(const GaussianSystem& sys);

// The objective phi_g_gauss minimizes, over the diagonal entries of D.
numopt::VectorObjective gaussian_geometric_objective(const GaussianSystem& sys);

struct GaussianMeasureOutcome {
  SplitModelKind kind;
  std::optional<GaussianSplitResult> result;
  std::string error;
};

struct GaussianSuite {
  double mutual_information = 0;
  std::vector<GaussianMeasureOutcome> measures;  // FS, DS, G in that order
  HierarchyReport hierarchy;

  const GaussianMeasureOutcome* find(SplitModelKind kind) const;
  MeasureValues values() const;
};

// Runs FS, DS and G (the mismatched-decoding measure is not defined for
// Gaussian systems) and checks the hierarchy.
GaussianSuite gaussian_phi_all(const GaussianSystem& sys, double tol = 1e-6);

// Covariances F F^T / n + 1e-3 I with standard normal F; A uniform on [-1, 1]
// rescaled to spectral radius 0.9 when larger.
GaussianSystem random_gaussian_system(int n, std::uint64_t seed);

}  // namespace phigeo
