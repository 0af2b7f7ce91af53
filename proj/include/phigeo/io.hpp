#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "phigeo/discrete.hpp"
#include "phigeo/gaussian.hpp"

namespace phigeo {

enum class SystemType { kDiscrete, kGaussian };

std::string_view system_type_name(SystemType type);

// One system definition as stored on disk. A discrete system carries either
// the full joint table or a prior with a transition kernel (rows indexed by
// x, columns by y).
struct SystemConfig {
  SystemType type = SystemType::kDiscrete;
  int n = 0;
  std::optional<std::vector<double>> probs;
  std::optional<std::vector<double>> prior;
  std::optional<std::vector<std::vector<double>>> kernel;
  std::optional<GaussianSystem> gaussian;
  std::optional<std::string> label;
  std::optional<std::uint64_t> seed;
  // Notes produced while loading (e.g. renormalization); never serialized.
  std::vector<std::string> warnings;

  DiscreteJoint discrete_joint() const;
  const GaussianSystem& gaussian_system() const;
};

// Parses and validates a config. Tables whose mass is off by at most 1e-9 are
// renormalized with a warning; larger deviations are E_NOT_NORMALIZED.
SystemConfig parse_system(std::string_view json_text);
SystemConfig load_system(const std::filesystem::path& path);

// Pretty-printed JSON with keys in a fixed order. Doubles are written in
// shortest round-trip form, so parse_system(emit_system(c)) reproduces c.
std::string emit_system(const SystemConfig& config);
void save_system(const std::filesystem::path& path, const SystemConfig& config);

SystemConfig config_from(const DiscreteJoint& p);
SystemConfig config_from(const GaussianSystem& sys);

// T x n observations, one row per time step.
struct TimeSeries {
  Eigen::MatrixXd data;
  std::vector<std::string> names;
  double step = 1.0;  // informational only

  Eigen::Index length() const { return data.rows(); }
  int channels() const { return int(data.cols()); }
};

// CSV with a header row of channel names and one row of reals per step.
TimeSeries parse_timeseries_csv(std::string_view text);
TimeSeries load_timeseries_csv(const std::filesystem::path& path);
std::string emit_timeseries_csv(const TimeSeries& ts);

// Least-squares fit of x_{t+1} = A x_t + e on mean-subtracted pairs. With
// T - 1 pairs, sigma_x and sigma_e use denominator T - 1. Requires
// T >= 10 n; a singular regressor or residual covariance is E_RANK_DEFICIENT.
GaussianSystem fit_ar(const TimeSeries& ts);

// Solution of S = A S A^T + sigma_e (requires spectral radius below 1).
Eigen::MatrixXd stationary_covariance(const Eigen::MatrixXd& a,
                                      const Eigen::MatrixXd& sigma_e);

// Simulates x_{t+1} = A x_t + e_t for T steps, starting from the stationary
// distribution.
TimeSeries simulate_ar(const Eigen::MatrixXd& a, const Eigen::MatrixXd& sigma_e,
                       Eigen::Index length, std::uint64_t seed);

// Paired binary states packed as bit masks (bit i is element i + 1).
struct PairedState {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
};

struct EmpiricalJoint {
  DiscreteJoint joint;
  std::size_t samples = 0;
  double alpha = 0;  // Laplace pseudo-count added to every cell
};

EmpiricalJoint empirical_joint(int n, const std::vector<PairedState>& samples,
                               double alpha = 0.0);
// Rows of 0/1 values, one row per sample.
EmpiricalJoint empirical_joint(int n, const std::vector<std::vector<int>>& xs,
                               const std::vector<std::vector<int>>& ys,
                               double alpha = 0.0);

}  // namespace phigeo
