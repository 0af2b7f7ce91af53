#pragma once

#include <cstdint>
#include <random>

#include "phigeo/discrete.hpp"

namespace phigeo {

// All random generation goes through a 64-bit Mersenne twister seeded with the
// caller's value, so a (kind, n, seed) triple always yields the same system.
using Rng = std::mt19937_64;

// Dirichlet(1, ..., 1) table over the 2^(2n) cells (uniform on the simplex).
DiscreteJoint random_discrete_joint(int n, std::uint64_t seed);
// Dirichlet(alpha, ..., alpha); small alpha gives near-deterministic tables.
DiscreteJoint random_discrete_joint(int n, std::uint64_t seed, double alpha);

// y = f(x) for a uniformly drawn map f, with a Dirichlet(1) input law. At
// most 2^n of the 4^n cells are occupied.
DiscreteJoint random_noiseless_channel(int n, std::uint64_t seed);

// Systems drawn by the hierarchy verifier: seeds divisible by 4 give a
// noiseless channel, the rest a Dirichlet(1) table.
DiscreteJoint random_verify_system(int n, std::uint64_t seed);

}  // namespace phigeo
