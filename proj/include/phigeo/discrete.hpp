#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace phigeo {

inline constexpr int kMaxElements = 5;

// Bit mask over the 2n binary variables of a paired state (x, y). Bit v < n
// is x_{v+1}; bit n + j is y_{j+1}. A joint table cell index uses the same
// layout, so cell = x_bits | (y_bits << n).
using VarMask = std::uint32_t;

inline VarMask x_var(int i) { return VarMask{1} << i; }
inline VarMask y_var(int n, int j) { return VarMask{1} << (n + j); }
inline VarMask x_mask(int n) { return (VarMask{1} << n) - 1; }
inline VarMask y_mask(int n) { return x_mask(n) << n; }
inline VarMask all_mask(int n) { return (VarMask{1} << (2 * n)) - 1; }

// Gathers the bits of `cell` selected by `mask` into a dense index
// (lowest selected bit becomes bit 0).
std::size_t compress_bits(std::size_t cell, VarMask mask);
// Inverse of compress_bits on the selected positions.
std::size_t expand_bits(std::size_t packed, VarMask mask);

// Probability table over {0,1}^n x {0,1}^n.
class DiscreteJoint {
 public:
  // Validates nonnegativity and normalization (within the input tolerance)
  // and renormalizes exactly.
  DiscreteJoint(int n, std::vector<double> probs);

  // Normalizes arbitrary nonnegative weights with positive total mass.
  static DiscreteJoint from_weights(int n, std::vector<double> weights);
  static DiscreteJoint uniform(int n);

  int n() const { return n_; }
  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t cell) const { return probs_[cell]; }
  double at(std::uint32_t x, std::uint32_t y) const {
    return probs_[x | (y << n_)];
  }
  std::span<const double> probs() const { return probs_; }
  bool full_support() const;

  // Mixes with the uniform table: (1 - eps) p + eps u.
  DiscreteJoint smoothed(double eps) const;

 private:
  int n_;
  std::vector<double> probs_;
};

// Conditional probabilities p(y | x) for one discrete system, one row per x.
class TransitionKernel {
 public:
  TransitionKernel(int n, std::vector<std::vector<double>> rows);

  int n() const { return n_; }
  double operator()(std::uint32_t y, std::uint32_t x) const {
    return rows_[x][y];
  }
  const std::vector<std::vector<double>>& rows() const { return rows_; }

 private:
  int n_;
  std::vector<std::vector<double>> rows_;
};

struct MarginalSpec {
  VarMask vars = 0;
};

// Validated distribution over {0,1}^n (the input prior p(x)).
std::vector<double> validated_prior(int n, std::span<const double> prior);

DiscreteJoint joint_from_transition(std::span<const double> prior,
                                    const TransitionKernel& kernel);

// Marginal over the variables of `spec`, indexed by compress_bits.
std::vector<double> marginal(const DiscreteJoint& p, MarginalSpec spec);
std::vector<double> marginal(std::span<const double> table, VarMask vars);

// p(target | given). Rows whose given-configuration has zero probability are
// left undefined and carry zero weight in any expectation over p.
struct ConditionalTable {
  VarMask target = 0;
  VarMask given = 0;
  std::vector<std::optional<std::vector<double>>> rows;

  bool defined(std::size_t given_index) const {
    return rows[given_index].has_value();
  }
  double operator()(std::size_t target_index, std::size_t given_index) const {
    return (*rows[given_index])[target_index];
  }
};

ConditionalTable conditional(const DiscreteJoint& p, VarMask target,
                             VarMask given);

// Shannon entropy in nats with 0 log 0 = 0.
double entropy(std::span<const double> dist);
double conditional_entropy(const DiscreteJoint& p, VarMask target,
                           VarMask given);

// D(p : q) in nats; +infinity when q(i) = 0 < p(i).
double kl_divergence(std::span<const double> p, std::span<const double> q);
double kl_divergence(const DiscreteJoint& p, const DiscreteJoint& q);

// I(X;Y) as D(p(x,y) : p(x) p(y)).
double mutual_information(const DiscreteJoint& p);
// I(X;Y) as H[Y] - H[Y|X].
double mutual_information_from_entropies(const DiscreteJoint& p);

// Product of marginals p(x) p(y) as a joint table.
DiscreteJoint independent_product(const DiscreteJoint& p);

double total_variation(std::span<const double> p, std::span<const double> q);
double max_abs_difference(std::span<const double> p,
                          std::span<const double> q);

}  // namespace phigeo
