#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qmhlab/core_model.hpp"

namespace qmh {

struct TrajectoryEntry {
  std::size_t o = 0;
  double omega = 0.0;
};

/// Outcome record of one delayed-rejection update. Index 0 is the oldest
/// entry (o_0, omega_0); the newest entry is at index n().
class Trajectory {
 public:
  Trajectory() = default;
  /// Requires at least two entries with finite energies.
  explicit Trajectory(std::vector<TrajectoryEntry> entries);

  std::size_t n() const noexcept { return entries_.empty() ? 0 : entries_.size() - 1; }
  std::size_t length() const noexcept { return entries_.size(); }
  const TrajectoryEntry& operator[](std::size_t k) const { return entries_[k]; }
  const std::vector<TrajectoryEntry>& entries() const noexcept { return entries_; }

  void push_back(TrajectoryEntry e) { entries_.push_back(e); }

  /// Time reversal gamma -> gamma-bar.
  Trajectory reversed() const;
  /// Adds delta to omega_0 only.
  Trajectory shifted(double delta) const;
  /// Entries 0..m.
  Trajectory prefix(std::size_t m) const;
  bool is_palindrome() const;

 private:
  std::vector<TrajectoryEntry> entries_;
};

/// Acceptance of the newest branch of traj, as used by the update loop:
/// omega_0 enters as omega_0 - beta sigma^2. Partial sums x_r are formed in
/// units of the shifted x_0 scale. Throws ImpossibleEvent on a zero
/// denominator.
double accept_explicit(const Trajectory& traj, const StochasticKernel& driver, double beta, double sigma);

/// Same quantity from the division-free B recursion over all sub-trajectories.
double accept_recursive(const Trajectory& traj, const StochasticKernel& driver, double beta, double sigma);

/// x_0..x_n of the explicit formula, scaled so the shifted omega_0 weight is 1.
std::vector<double> partial_sums(const Trajectory& traj, const StochasticKernel& driver, double beta, double sigma);

/// B_{j,i} table from the recursion, same scaling as partial_sums. Entry
/// [j][i] is meaningful for j != i.
std::vector<std::vector<double>> b_recursion_table(const Trajectory& traj, const StochasticKernel& driver,
                                                   double beta, double sigma);

/// b_k^{+} (sign > 0) or b_k^{-} (sign < 0), same scaling as partial_sums.
double b_step(const Trajectory& traj, const StochasticKernel& driver, double beta, double sigma, std::size_t k,
              int sign);

/// Closed-form B_{j,i} for |j - i| >= 2 from the partial-sum minimum.
double b_closed_form(const Trajectory& traj, const StochasticKernel& driver, double beta, double sigma,
                     std::size_t j, std::size_t i);

/// max{0, max{0, min X} + min{0, y - min X}} - max{0, min(X u {y})}.
double minmax_identity_residual(std::span<const double> xs, double y);
/// Left minus right side of the two-orderings partial-sum identity.
double partial_sum_identity_residual(std::span<const double> b);

/// Probability of rejecting every branch before the newest one,
/// max{0, min_{r<n} x_r} / x_0.
double rejection_product(const Trajectory& traj, const StochasticKernel& driver, double beta, double sigma);

/// P(o_0|o_1) A R for n < n_max, P(o_0|o_1) R at n = n_max, 0 beyond.
/// n_max = 0 selects the uncapped process.
double decision_probability(const Trajectory& traj, const StochasticKernel& driver, double beta, double sigma,
                            std::size_t n_max = 0);

struct BranchBalance {
  double lhs = 0.0;
  double rhs = 0.0;
  double violation = 0.0;  ///< |lhs - rhs|
  double relative = 0.0;   ///< violation / max(|lhs|, |rhs|), 0 when both vanish
  bool impossible = false; ///< a zero denominator on gamma or its reversal
};

/// Per-trajectory balance between gamma and its reversal. With
/// bias_correction = false the acceptances ignore the beta sigma^2 term.
BranchBalance branch_balance_check(const Trajectory& traj, const StochasticKernel& driver, double beta,
                                   double sigma, bool bias_correction = true);

}  // namespace qmh
