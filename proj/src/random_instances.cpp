#include "qmhlab/random_instances.hpp"

#include <vector>

namespace qmh {

StochasticKernel random_kernel(std::size_t n, RandomStream& rng, double zero_fraction, double floor) {
  RowMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = floor + rng.uniform();
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (rng.uniform() < zero_fraction) {
        m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = 0.0;
        m(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = 0.0;
      }
  for (Eigen::Index a = 0; a < m.rows(); ++a) m.row(a) /= m.row(a).sum();
  return StochasticKernel(std::move(m));
}

EnergyTable random_energies(std::size_t n, RandomStream& rng, double range) {
  std::vector<double> e(n);
  for (double& v : e) v = range * (2.0 * rng.uniform() - 1.0);
  return EnergyTable(std::move(e));
}

MhModel random_mh_model(RandomStream& rng, std::size_t max_states) {
  const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(max_states - 1));
  const double zero = rng.uniform() < 0.5 ? 0.0 : 0.3;
  return MhModel{StateSpace(n), random_energies(n, rng), InverseTemperature(2.0 * rng.uniform()),
                 random_kernel(n, rng, zero)};
}

Trajectory random_trajectory(std::size_t n, std::size_t k, RandomStream& rng, double range) {
  std::vector<TrajectoryEntry> e(n + 1);
  for (auto& x : e) {
    x.o = static_cast<std::size_t>(rng.uniform() * static_cast<double>(k));
    x.omega = range * (2.0 * rng.uniform() - 1.0);
  }
  return Trajectory(std::move(e));
}

}  // namespace qmh
