#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qmhlab/random.hpp"

namespace qmh {

/// Tolerance on the total mass of a probability vector.
inline constexpr double kProbabilitySumTolerance = 1e-12;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct StateSpace {
  std::size_t size = 1;
  std::vector<std::string> labels;

  explicit StateSpace(std::size_t n, std::vector<std::string> names = {});
};

class EnergyTable {
 public:
  explicit EnergyTable(std::vector<double> values);

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t a) const { return values_[a]; }
  const std::vector<double>& values() const noexcept { return values_; }
  double min() const;
  double max() const;

 private:
  std::vector<double> values_;
};

class InverseTemperature {
 public:
  explicit InverseTemperature(double beta);
  double value() const noexcept { return beta_; }

 private:
  double beta_;
};

/// Probability vector over state indices; entries >= 0, sum 1 within 1e-12.
class Distribution {
 public:
  explicit Distribution(std::vector<double> probs);

  /// Rescales non-negative weights to unit mass.
  static Distribution normalized(std::vector<double> weights);
  static Distribution uniform(std::size_t n);
  static Distribution point_mass(std::size_t n, std::size_t at);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t a) const { return probs_[a]; }
  const std::vector<double>& probs() const noexcept { return probs_; }

 private:
  std::vector<double> probs_;
};

/// Conditional probability table, row a holds P(.|a).
class StochasticKernel {
 public:
  explicit StochasticKernel(RowMatrix rows);

  static StochasticKernel identity(std::size_t n);
  static StochasticKernel uniform(std::size_t n);
  /// Every row equal to d.
  static StochasticKernel rank_one(const Distribution& d);

  std::size_t size() const noexcept { return static_cast<std::size_t>(rows_.rows()); }
  /// P(to | from).
  double operator()(std::size_t from, std::size_t to) const { return rows_(from, to); }
  std::span<const double> row(std::size_t from) const {
    return {rows_.data() + from * size(), size()};
  }
  const RowMatrix& matrix() const noexcept { return rows_; }

 private:
  RowMatrix rows_;
};

Distribution thermal_distribution(const EnergyTable& energy, InverseTemperature beta);

double tv_distance(std::span<const double> d1, std::span<const double> d2);
double tv_distance(const Distribution& d1, const Distribution& d2);

/// Maximum retention rate: the L1-induced contraction of the kernel on
/// zero-sum vectors, attained at differences of two point masses.
double retention_rate(const StochasticKernel& kernel);

/// Stationary distribution of an ergodic kernel by a direct linear solve.
Distribution stationary_distribution(const StochasticKernel& kernel);

/// Inverse-CDF draw of a state index.
std::size_t sample(std::span<const double> probs, RandomStream& rng);
inline std::size_t sample(const Distribution& d, RandomStream& rng) { return sample(std::span<const double>(d.probs()), rng); }

}  // namespace qmh
