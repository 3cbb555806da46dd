#include "qmhlab/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qmhlab/errors.hpp"

namespace qmh {
namespace {

void check_probability_vector(std::span<const double> p, const char* what) {
  if (p.empty()) throw ValidationError(std::string(what) + ": empty");
  double total = 0.0;
  for (double x : p) {
    if (!std::isfinite(x) || x < 0.0)
      throw ValidationError(std::string(what) + ": entries must be finite and non-negative");
    total += x;
  }
  if (std::abs(total - 1.0) > kProbabilitySumTolerance)
    throw ValidationError(std::string(what) + ": entries sum to " + std::to_string(total));
}

}  // namespace

StateSpace::StateSpace(std::size_t n, std::vector<std::string> names)
    : size(n), labels(std::move(names)) {
  if (n == 0) throw ValidationError("state space must contain at least one state");
  if (!labels.empty() && labels.size() != n)
    throw ValidationError("state labels must match the state-space size");
}

EnergyTable::EnergyTable(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw ValidationError("energy table is empty");
  for (double e : values_)
    if (!std::isfinite(e)) throw ValidationError("energies must be finite");
}

double EnergyTable::min() const { return *std::min_element(values_.begin(), values_.end()); }
double EnergyTable::max() const { return *std::max_element(values_.begin(), values_.end()); }

InverseTemperature::InverseTemperature(double beta) : beta_(beta) {
  if (!std::isfinite(beta) || beta < 0.0)
    throw ValidationError("inverse temperature must be finite and non-negative");
}

Distribution::Distribution(std::vector<double> probs) : probs_(std::move(probs)) {
  check_probability_vector(probs_, "distribution");
}

Distribution Distribution::normalized(std::vector<double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw ValidationError("weights must be finite and non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw ValidationError("weights have zero total mass");
  for (double& w : weights) w /= total;
  return Distribution(std::move(weights));
}

Distribution Distribution::uniform(std::size_t n) {
  if (n == 0) throw ValidationError("uniform distribution over zero states");
  return Distribution(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

Distribution Distribution::point_mass(std::size_t n, std::size_t at) {
  if (at >= n) throw ValidationError("point mass index out of range");
  std::vector<double> p(n, 0.0);
  p[at] = 1.0;
  return Distribution(std::move(p));
}

StochasticKernel::StochasticKernel(RowMatrix rows) : rows_(std::move(rows)) {
  if (rows_.rows() == 0 || rows_.rows() != rows_.cols())
    throw ValidationError("kernel must be a non-empty square table");
  for (std::size_t a = 0; a < size(); ++a) check_probability_vector(row(a), "kernel row");
}

StochasticKernel StochasticKernel::identity(std::size_t n) {
  return StochasticKernel(RowMatrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
}

StochasticKernel StochasticKernel::uniform(std::size_t n) {
  const auto m = static_cast<Eigen::Index>(n);
  return StochasticKernel(RowMatrix::Constant(m, m, 1.0 / static_cast<double>(n)));
}

StochasticKernel StochasticKernel::rank_one(const Distribution& d) {
  const auto m = static_cast<Eigen::Index>(d.size());
  RowMatrix rows(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b) rows(a, b) = d[static_cast<std::size_t>(b)];
  return StochasticKernel(std::move(rows));
}

Distribution thermal_distribution(const EnergyTable& energy, InverseTemperature beta) {
  // Shift so the largest Boltzmann weight is exactly one.
  const double e_min = energy.min();
  std::vector<double> w(energy.size());
  for (std::size_t a = 0; a < w.size(); ++a) w[a] = std::exp(-beta.value() * (energy[a] - e_min));
  return Distribution::normalized(std::move(w));
}

double tv_distance(std::span<const double> d1, std::span<const double> d2) {
  if (d1.size() != d2.size()) throw ValidationError("tv_distance: length mismatch");
  double acc = 0.0;
  for (std::size_t a = 0; a < d1.size(); ++a) acc += std::abs(d1[a] - d2[a]);
  return 0.5 * acc;
}

double tv_distance(const Distribution& d1, const Distribution& d2) {
  return tv_distance(std::span<const double>(d1.probs()), std::span<const double>(d2.probs()));
}

double retention_rate(const StochasticKernel& kernel) {
  double best = 0.0;
  const std::size_t n = kernel.size();
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) best = std::max(best, tv_distance(kernel.row(a), kernel.row(b)));
  return best;
}

Distribution stationary_distribution(const StochasticKernel& kernel) {
  const auto n = static_cast<Eigen::Index>(kernel.size());
  // Replace one balance equation by the normalization constraint.
  Eigen::MatrixXd m = kernel.matrix().transpose() - Eigen::MatrixXd::Identity(n, n);
  m.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  Eigen::VectorXd x = m.fullPivLu().solve(rhs);
  std::vector<double> out(x.data(), x.data() + n);
  for (double& v : out) v = std::max(0.0, v);
  return Distribution::normalized(std::move(out));
}

std::size_t sample(std::span<const double> probs, RandomStream& rng) {
  const double u = rng.uniform();
  double cdf = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t a = 0; a < probs.size(); ++a) {
    if (probs[a] <= 0.0) continue;
    cdf += probs[a];
    last_positive = a;
    if (u < cdf) return a;
  }
  // Rounding left u above the accumulated total.
  return last_positive;
}

}  // namespace qmh
