#include "qmhlab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "qmhlab/errors.hpp"

namespace qmh {

NormalQuadrature gauss_hermite_normal(std::size_t n) {
  if (n == 0) throw ValidationError("quadrature needs at least one node");
  // Jacobi matrix of the probabilists' Hermite polynomials.
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t k = 1; k < n; ++k) {
    const double off = std::sqrt(static_cast<double>(k));
    j(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k - 1)) = off;
    j(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(k)) = off;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  NormalQuadrature q;
  q.nodes.resize(n);
  q.weights.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    q.nodes[k] = es.eigenvalues()(static_cast<Eigen::Index>(k));
    const double v = es.eigenvectors()(0, static_cast<Eigen::Index>(k));
    q.weights[k] = v * v;
  }
  const double total = std::accumulate(q.weights.begin(), q.weights.end(), 0.0);
  for (double& w : q.weights) w /= total;
  return q;
}

}  // namespace qmh
