#pragma once

#include <cstddef>

#include "qmhlab/acceptance.hpp"
#include "qmhlab/classical_mh.hpp"
#include "qmhlab/core_model.hpp"
#include "qmhlab/random.hpp"

namespace qmh {

/// Row-stochastic matrix with entries in (floor, 1] before normalization.
/// zero_fraction of off-diagonal entries are set to 0 symmetrically, so
/// P(b|a) > 0 exactly when P(a|b) > 0.
StochasticKernel random_kernel(std::size_t n, RandomStream& rng, double zero_fraction = 0.0, double floor = 0.05);

/// Energies uniform in [-range, range].
EnergyTable random_energies(std::size_t n, RandomStream& rng, double range = 2.0);

/// Random model with |S| in [2, max_states], beta in [0, 2].
MhModel random_mh_model(RandomStream& rng, std::size_t max_states = 8);

/// n + 1 entries with labels below k and energies uniform in [-range, range].
Trajectory random_trajectory(std::size_t n, std::size_t k, RandomStream& rng, double range = 2.0);

}  // namespace qmh
