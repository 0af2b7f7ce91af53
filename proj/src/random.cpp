#include "phigeo/random.hpp"

#include <vector>

namespace phigeo {

DiscreteJoint random_discrete_joint(int n, std::uint64_t seed) {
  return random_discrete_joint(n, seed, 1.0);
}

DiscreteJoint random_discrete_joint(int n, std::uint64_t seed, double alpha) {
  Rng rng(seed);
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> w(std::size_t{1} << (2 * n));
  for (double& v : w) v = gamma(rng);
  return DiscreteJoint::from_weights(n, std::move(w));
}

DiscreteJoint random_noiseless_channel(int n, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t states = std::size_t{1} << n;
  std::gamma_distribution<double> gamma(1.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, states - 1);
  std::vector<double> w(states * states, 0.0);
  for (std::size_t x = 0; x < states; ++x) {
    const double mass = gamma(rng);
    w[x | (pick(rng) << n)] = mass;
  }
  return DiscreteJoint::from_weights(n, std::move(w));
}

DiscreteJoint random_verify_system(int n, std::uint64_t seed) {
  return seed % 4 == 0 ? random_noiseless_channel(n, seed)
                       : random_discrete_joint(n, seed);
}

}  // namespace phigeo
