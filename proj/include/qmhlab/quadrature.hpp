#pragma once

#include <cstddef>
#include <vector>

namespace qmh {

/// Gauss-Hermite rule for a standard normal: E[g(Z)] ~ sum_k weights[k] g(nodes[k]).
/// Weights sum to 1.
struct NormalQuadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Golub-Welsch construction; exact for polynomials of degree < 2n.
NormalQuadrature gauss_hermite_normal(std::size_t n);

}  // namespace qmh
