#include "phigeo/discrete.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "phigeo/error.hpp"
#include "phigeo/tolerances.hpp"

namespace phigeo {

namespace {

void check_element_count(int n) {
  if (n < 1 || n > kMaxElements) {
    throw Error(ErrorCode::kInvalidArgument,
                "element count must be in [1, " +
                    std::to_string(kMaxElements) + "], got " +
                    std::to_string(n));
  }
}

void check_nonnegative(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string(what) + " contains a negative or non-finite entry");
    }
  }
}

double checked_sum(std::span<const double> values, const char* what) {
  const double total = std::accumulate(values.begin(), values.end(), 0.0);
  if (std::abs(total - 1.0) > default_tolerances().input_normalization) {
    throw Error(ErrorCode::kNotNormalized,
                std::string(what) + " sums to " + std::to_string(total));
  }
  return total;
}

}  // namespace

std::size_t compress_bits(std::size_t cell, VarMask mask) {
  std::size_t out = 0;
  int k = 0;
  for (int bit = 0; mask >> bit; ++bit) {
    if ((mask >> bit) & 1U) {
      out |= ((cell >> bit) & 1U) << k;
      ++k;
    }
  }
  return out;
}

std::size_t expand_bits(std::size_t packed, VarMask mask) {
  std::size_t out = 0;
  int k = 0;
  for (int bit = 0; mask >> bit; ++bit) {
    if ((mask >> bit) & 1U) {
      out |= ((packed >> k) & 1U) << bit;
      ++k;
    }
  }
  return out;
}

DiscreteJoint::DiscreteJoint(int n, std::vector<double> probs) : n_(n) {
  check_element_count(n);
  if (probs.size() != (std::size_t{1} << (2 * n))) {
    throw Error(ErrorCode::kDimensionMismatch,
                "joint table for n=" + std::to_string(n) + " needs " +
                    std::to_string(std::size_t{1} << (2 * n)) +
                    " entries, got " + std::to_string(probs.size()));
  }
  check_nonnegative(probs, "joint table");
  const double total = checked_sum(probs, "joint table");
  for (double& v : probs) v /= total;
  probs_ = std::move(probs);
}

DiscreteJoint DiscreteJoint::from_weights(int n, std::vector<double> weights) {
  check_element_count(n);
  check_nonnegative(weights, "weights");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "weights have zero total mass");
  }
  for (double& v : weights) v /= total;
  return DiscreteJoint(n, std::move(weights));
}

DiscreteJoint DiscreteJoint::uniform(int n) {
  check_element_count(n);
  const std::size_t cells = std::size_t{1} << (2 * n);
  return DiscreteJoint(n, std::vector<double>(cells, 1.0 / double(cells)));
}

bool DiscreteJoint::full_support() const {
  for (double v : probs_) {
    if (v <= 0.0) return false;
  }
  return true;
}

DiscreteJoint DiscreteJoint::smoothed(double eps) const {
  std::vector<double> out(probs_.size());
  const double u = 1.0 / double(probs_.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (1.0 - eps) * probs_[i] + eps * u;
  }
  return from_weights(n_, std::move(out));
}

TransitionKernel::TransitionKernel(int n, std::vector<std::vector<double>> rows)
    : n_(n) {
  check_element_count(n);
  const std::size_t states = std::size_t{1} << n;
  if (rows.size() != states) {
    throw Error(ErrorCode::kDimensionMismatch,
                "kernel needs " + std::to_string(states) + " rows");
  }
  for (auto& row : rows) {
    if (row.size() != states) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "kernel row needs " + std::to_string(states) + " entries");
    }
    check_nonnegative(row, "kernel row");
    const double total = checked_sum(row, "kernel row");
    for (double& v : row) v /= total;
  }
  rows_ = std::move(rows);
}

std::vector<double> validated_prior(int n, std::span<const double> prior) {
  check_element_count(n);
  if (prior.size() != (std::size_t{1} << n)) {
    throw Error(ErrorCode::kDimensionMismatch,
                "prior needs " + std::to_string(std::size_t{1} << n) +
                    " entries");
  }
  check_nonnegative(prior, "prior");
  const double total = checked_sum(prior, "prior");
  std::vector<double> out(prior.begin(), prior.end());
  for (double& v : out) v /= total;
  return out;
}

DiscreteJoint joint_from_transition(std::span<const double> prior,
                                    const TransitionKernel& kernel) {
  const int n = kernel.n();
  const std::vector<double> px = validated_prior(n, prior);
  const std::size_t states = px.size();
  std::vector<double> table(states * states);
  for (std::uint32_t x = 0; x < states; ++x) {
    for (std::uint32_t y = 0; y < states; ++y) {
      table[x | (y << n)] = kernel(y, x) * px[x];
    }
  }
  return DiscreteJoint::from_weights(n, std::move(table));
}

std::vector<double> marginal(std::span<const double> table, VarMask vars) {
  if (vars == 0) {
    throw Error(ErrorCode::kInvalidArgument, "marginal over an empty subset");
  }
  std::vector<double> out(std::size_t{1} << std::popcount(vars), 0.0);
  for (std::size_t cell = 0; cell < table.size(); ++cell) {
    out[compress_bits(cell, vars)] += table[cell];
  }
  return out;
}

std::vector<double> marginal(const DiscreteJoint& p, MarginalSpec spec) {
  if (spec.vars & ~all_mask(p.n())) {
    throw Error(ErrorCode::kInvalidArgument,
                "marginal subset refers to variables outside the table");
  }
  return marginal(p.probs(), spec.vars);
}

ConditionalTable conditional(const DiscreteJoint& p, VarMask target,
                             VarMask given) {
  if (target == 0 || (target & given) != 0 ||
      ((target | given) & ~all_mask(p.n()))) {
    throw Error(ErrorCode::kInvalidArgument,
                "conditional needs a nonempty target disjoint from the given "
                "subset");
  }
  const VarMask both = target | given;
  const std::vector<double> joint = marginal(p.probs(), both);
  const std::size_t n_given = std::size_t{1} << std::popcount(given);
  const std::size_t n_target = std::size_t{1} << std::popcount(target);

  // Index maps from the combined marginal back to (target, given) indices.
  std::vector<double> given_mass(n_given, 0.0);
  std::vector<std::vector<double>> rows(n_given,
                                        std::vector<double>(n_target, 0.0));
  for (std::size_t packed = 0; packed < joint.size(); ++packed) {
    const std::size_t cell = expand_bits(packed, both);
    const std::size_t t = compress_bits(cell, target);
    const std::size_t g = given ? compress_bits(cell, given) : 0;
    rows[g][t] += joint[packed];
    given_mass[g] += joint[packed];
  }

  ConditionalTable out{target, given, {}};
  out.rows.resize(n_given);
  for (std::size_t g = 0; g < n_given; ++g) {
    if (given_mass[g] > 0.0) {
      for (double& v : rows[g]) v /= given_mass[g];
      out.rows[g] = std::move(rows[g]);
    }
  }
  return out;
}

double entropy(std::span<const double> dist) {
  double h = 0.0;
  for (double v : dist) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

double conditional_entropy(const DiscreteJoint& p, VarMask target,
                           VarMask given) {
  if (target == 0 || (target & given) != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "conditional entropy needs disjoint nonempty target");
  }
  const double h_joint = entropy(marginal(p.probs(), target | given));
  const double h_given = given ? entropy(marginal(p.probs(), given)) : 0.0;
  return h_joint - h_given;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "kl_divergence size mismatch");
  }
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    d += p[i] * std::log(p[i] / q[i]);
  }
  return d;
}

double kl_divergence(const DiscreteJoint& p, const DiscreteJoint& q) {
  if (p.n() != q.n()) {
    throw Error(ErrorCode::kDimensionMismatch, "kl_divergence n mismatch");
  }
  return kl_divergence(p.probs(), q.probs());
}

DiscreteJoint independent_product(const DiscreteJoint& p) {
  const int n = p.n();
  const std::vector<double> px = marginal(p.probs(), x_mask(n));
  const std::vector<double> py = marginal(p.probs(), y_mask(n));
  std::vector<double> table(p.size());
  for (std::size_t x = 0; x < px.size(); ++x) {
    for (std::size_t y = 0; y < py.size(); ++y) {
      table[x | (y << n)] = px[x] * py[y];
    }
  }
  return DiscreteJoint::from_weights(n, std::move(table));
}

double mutual_information(const DiscreteJoint& p) {
  return kl_divergence(p, independent_product(p));
}

double mutual_information_from_entropies(const DiscreteJoint& p) {
  const int n = p.n();
  return entropy(marginal(p.probs(), y_mask(n))) -
         conditional_entropy(p, y_mask(n), x_mask(n));
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

double max_abs_difference(std::span<const double> p,
                          std::span<const double> q) {
  double m = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    m = std::max(m, std::abs(p[i] - q[i]));
  }
  return m;
}

}  // namespace phigeo
