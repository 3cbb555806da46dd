#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "qmhlab/core_model.hpp"
#include "qmhlab/random.hpp"

namespace qmh::test {

/// |observed frequency - p| in units of the binomial standard error.
inline double binomial_z(std::uint64_t count, std::uint64_t n, double p) {
  const double freq = static_cast<double>(count) / static_cast<double>(n);
  const double se = std::sqrt(std::max(p * (1.0 - p), 1e-300) / static_cast<double>(n));
  return std::abs(freq - p) / se;
}

/// Random symmetric stochastic kernel: symmetric off-diagonal weights scaled
/// below 1 per row, remainder on the diagonal.
inline StochasticKernel random_symmetric_kernel(std::size_t n, RandomStream& rng) {
  const auto m = static_cast<Eigen::Index>(n);
  RowMatrix w = RowMatrix::Zero(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = a + 1; b < m; ++b) w(a, b) = w(b, a) = 0.05 + rng.uniform();
  const double scale = 1.0 / (w.rowwise().sum().maxCoeff() + 0.1);
  w *= scale;
  for (Eigen::Index a = 0; a < m; ++a) w(a, a) = 1.0 - w.row(a).sum();
  return StochasticKernel(std::move(w));
}

inline std::vector<std::uint64_t> histogram(const std::vector<std::size_t>& xs, std::size_t n) {
  std::vector<std::uint64_t> h(n, 0);
  for (std::size_t x : xs) ++h[x];
  return h;
}

}  // namespace qmh::test
