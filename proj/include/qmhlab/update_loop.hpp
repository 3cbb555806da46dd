#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "qmhlab/acceptance.hpp"
#include "qmhlab/core_model.hpp"
#include "qmhlab/random.hpp"

namespace qmh {

/// Sizes and thresholds shared by the classical and quantum updates.
struct ImpreciseConfig {
  double sigma = 0.0;
  std::size_t n_max = 1;
  StochasticKernel driver;
  InverseTemperature beta;

  ImpreciseConfig(double sigma_, std::size_t n_max_, StochasticKernel driver_, InverseTemperature beta_);
};

/// Outputs of one delayed-rejection update. final_state is the hidden
/// state for classical runs; the quantum backend leaves it unset.
struct UpdateRecord {
  Trajectory trajectory;
  std::size_t final_state = static_cast<std::size_t>(-1);
  std::size_t halted_at = 0;
  bool truncated = false;
};

/// The decision side of the delayed-rejection loop. It reads only labels and
/// energies from the backend, never the hidden state. A backend provides
///   double measure_energy(RandomStream&);
///   std::size_t observe(RandomStream&);
///   void control(std::size_t o, RandomStream&);
/// x and x_min are kept in units of exp(-beta omega_0 + beta^2 sigma^2).
template <class Backend>
UpdateRecord delayed_rejection_update(Backend& backend, const ImpreciseConfig& cfg, RandomStream& rng) {
  const StochasticKernel& p = cfg.driver;
  const double beta = cfg.beta.value();
  const double omega0 = backend.measure_energy(rng);
  const double ref = omega0 - beta * cfg.sigma * cfg.sigma;
  auto weight = [&](double w) { return std::exp(-beta * (w - ref)); };

  std::size_t i = backend.observe(rng);
  std::size_t o = sample(p.row(i), rng);
  backend.control(o, rng);
  double x_min = p(i, o);
  double omega = backend.measure_energy(rng);
  double x = x_min - weight(omega) * p(o, i);
  double u = rng.uniform();

  UpdateRecord rec;
  rec.trajectory.push_back({o, omega0});
  rec.trajectory.push_back({i, omega});
  o = i;
  std::size_t n = 1;
  while (x > x_min * u && n < cfg.n_max) {
    i = backend.observe(rng);
    backend.control(o, rng);
    x_min = std::min(x_min, x);
    x += weight(omega) * p(i, o);
    omega = backend.measure_energy(rng);
    x -= weight(omega) * p(o, i);
    u = rng.uniform();
    rec.trajectory.push_back({i, omega});
    o = i;
    ++n;
  }
  rec.halted_at = n;
  rec.truncated = x > x_min * u;
  return rec;
}

}  // namespace qmh
