#include "qmhlab/acceptance.hpp"

#include <algorithm>
#include <cmath>

#include "qmhlab/errors.hpp"

namespace qmh {

Trajectory::Trajectory(std::vector<TrajectoryEntry> entries) : entries_(std::move(entries)) {
  if (entries_.size() < 2) throw ValidationError("trajectory needs at least two entries");
  for (const auto& e : entries_)
    if (!std::isfinite(e.omega)) throw ValidationError("trajectory energies must be finite");
}

Trajectory Trajectory::reversed() const {
  Trajectory t;
  t.entries_.assign(entries_.rbegin(), entries_.rend());
  return t;
}

Trajectory Trajectory::shifted(double delta) const {
  Trajectory t = *this;
  t.entries_.front().omega += delta;
  return t;
}

Trajectory Trajectory::prefix(std::size_t m) const {
  if (m + 1 > entries_.size()) throw ValidationError("prefix longer than trajectory");
  Trajectory t;
  t.entries_.assign(entries_.begin(), entries_.begin() + static_cast<std::ptrdiff_t>(m + 1));
  return t;
}

bool Trajectory::is_palindrome() const {
  const std::size_t len = entries_.size();
  for (std::size_t k = 0; k < len / 2; ++k) {
    const auto& a = entries_[k];
    const auto& b = entries_[len - 1 - k];
    if (a.o != b.o || a.omega != b.omega) return false;
  }
  return true;
}

namespace {

void check_inputs(const Trajectory& traj, const StochasticKernel& driver) {
  if (traj.length() < 2) throw ValidationError("trajectory needs at least two entries");
  for (const auto& e : traj.entries())
    if (e.o >= driver.size()) throw ValidationError("observation label outside the driver range");
}

// Boltzmann weights relative to the shifted omega_0, so weight 0 is exactly 1.
std::vector<double> scaled_weights(const Trajectory& traj, double beta, double sigma) {
  const double ref = traj[0].omega - beta * sigma * sigma;
  std::vector<double> e(traj.length());
  e[0] = 1.0;
  for (std::size_t r = 1; r < e.size(); ++r) e[r] = std::exp(-beta * (traj[r].omega - ref));
  return e;
}

double weight_term(const Trajectory& traj, const StochasticKernel& driver, const std::vector<double>& e,
                   std::size_t k, std::size_t toward) {
  return e[k] * driver(traj[toward].o, traj[k].o);
}

}  // namespace

std::vector<double> partial_sums(const Trajectory& traj, const StochasticKernel& driver, double beta, double sigma) {
  check_inputs(traj, driver);
  const auto e = scaled_weights(traj, beta, sigma);
  const std::size_t n = traj.n();
  std::vector<double> x(n + 1);
  x[0] = weight_term(traj, driver, e, 0, 1);
  x[1] = x[0] - weight_term(traj, driver, e, 1, 0);
  for (std::size_t k = 2; k <= n; ++k)
    x[k] = x[k - 1] + weight_term(traj, driver, e, k - 1, k) - weight_term(traj, driver, e, k, k - 1);
  return x;
}

double accept_explicit(const Trajectory& traj, const StochasticKernel& driver, double beta, double sigma) {
  const auto x = partial_sums(traj, driver, beta, sigma);
  const std::size_t n = traj.n();
  const double m = *std::min_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n));
  const double den = std::max(0.0, m);
  if (!(den > 0.0)) throw ImpossibleEvent("acceptance undefined: zero denominator");
  return std::clamp(std::max(0.0, m - x[n]) / den, 0.0, 1.0);
}

std::vector<std::vector<double>> b_recursion_table(const Trajectory& traj, const StochasticKernel& driver,
                                                   double beta, double sigma) {
  check_inputs(traj, driver);
  const auto e = scaled_weights(traj, beta, sigma);
  const std::size_t len = traj.length();
  std::vector<std::vector<double>> b(len, std::vector<double>(len, 0.0));
  for (std::size_t i = 0; i < len; ++i) {
    if (i + 1 < len) b[i + 1][i] = weight_term(traj, driver, e, i, i + 1);
    if (i > 0) b[i - 1][i] = weight_term(traj, driver, e, i, i - 1);
  }
  for (std::size_t m = 2; m < len; ++m)
    for (std::size_t i = 0; i + m < len; ++i) {
      const std::size_t j = i + m;
      // j' is one step closer to the other end.
      b[j][i] = std::max(0.0, b[j - 1][i] - b[i][j - 1]);
      b[i][j] = std::max(0.0, b[i + 1][j] - b[j][i + 1]);
    }
  return b;
}

double accept_recursive(const Trajectory& traj, const StochasticKernel& driver, double beta, double sigma) {
  const auto b = b_recursion_table(traj, driver, beta, sigma);
  const std::size_t k = traj.n();
  const double den = b[k][0];
  if (!(den > 0.0)) throw ImpossibleEvent("acceptance undefined: zero denominator");
  return std::min(1.0, b[0][k] / den);
}

double b_step(const Trajectory& traj, const StochasticKernel& driver, double beta, double sigma, std::size_t k,
              int sign) {
  check_inputs(traj, driver);
  if (sign == 0) throw ValidationError("b_step sign must be nonzero");
  const std::size_t len = traj.length();
  if (k >= len || (sign > 0 && k + 1 >= len) || (sign < 0 && k == 0))
    throw ValidationError("b_step index out of range");
  const std::size_t nb = sign > 0 ? k + 1 : k - 1;
  const auto e = scaled_weights(traj, beta, sigma);
  return weight_term(traj, driver, e, k, nb) - weight_term(traj, driver, e, nb, k);
}

double b_closed_form(const Trajectory& traj, const StochasticKernel& driver, double beta, double sigma,
                     std::size_t j, std::size_t i) {
  const std::size_t m = j > i ? j - i : i - j;
  if (m < 2 || j >= traj.length() || i >= traj.length()) throw ValidationError("closed form needs |j - i| >= 2");
  const int sign = j > i ? 1 : -1;
  double acc = 0.0;
  double best = 0.0;
  for (std::size_t r = 0; r + 2 <= m; ++r) {
    const std::size_t k = sign > 0 ? i + r : i - r;
    acc += b_step(traj, driver, beta, sigma, k, sign);
    best = r == 0 ? acc : std::min(best, acc);
  }
  return std::max(0.0, best);
}

double minmax_identity_residual(std::span<const double> xs, double y) {
  if (xs.empty()) throw ValidationError("identity needs a non-empty set");
  const double mx = *std::min_element(xs.begin(), xs.end());
  const double lhs = std::max(0.0, std::max(0.0, mx) + std::min(0.0, y - mx));
  const double rhs = std::max(0.0, std::min(mx, y));
  return lhs - rhs;
}

double partial_sum_identity_residual(std::span<const double> b) {
  const std::size_t n = b.size();
  if (n < 2) throw ValidationError("identity needs at least two terms");
  double total = 0.0;
  for (double v : b) total += v;
  double fwd = 0.0;
  double max_fwd = -INFINITY;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    fwd += b[k];
    max_fwd = std::max(max_fwd, fwd);
  }
  double bwd = 0.0;
  double min_bwd = INFINITY;
  for (std::size_t k = n - 1; k >= 1; --k) {
    bwd += b[k];
    min_bwd = std::min(min_bwd, bwd);
  }
  return max_fwd - (total - min_bwd);
}

double rejection_product(const Trajectory& traj, const StochasticKernel& driver, double beta, double sigma) {
  const auto x = partial_sums(traj, driver, beta, sigma);
  if (!(x[0] > 0.0)) throw ImpossibleEvent("rejection product undefined: P(o_0|o_1) = 0");
  const double m = *std::min_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(traj.n()));
  return std::max(0.0, m) / x[0];
}

double decision_probability(const Trajectory& traj, const StochasticKernel& driver, double beta, double sigma,
                            std::size_t n_max) {
  const std::size_t n = traj.n();
  if (n_max != 0 && n > n_max) return 0.0;
  const double p = driver(traj[1].o, traj[0].o);
  if (p <= 0.0) return 0.0;
  const double r = rejection_product(traj, driver, beta, sigma);
  if (r <= 0.0) return 0.0;
  if (n_max != 0 && n == n_max) return p * r;
  return p * accept_explicit(traj, driver, beta, sigma) * r;
}

BranchBalance branch_balance_check(const Trajectory& traj, const StochasticKernel& driver, double beta,
                                   double sigma, bool bias_correction) {
  BranchBalance out;
  const double shift = beta * sigma * sigma;
  const double s_eval = bias_correction ? sigma : 0.0;
  const Trajectory rev = traj.reversed();
  try {
    out.lhs = decision_probability(traj.shifted(shift), driver, beta, s_eval) * std::exp(-beta * traj[0].omega);
    out.rhs = decision_probability(rev.shifted(shift), driver, beta, s_eval) * std::exp(-beta * rev[0].omega);
  } catch (const ImpossibleEvent&) {
    out.impossible = true;
    return out;
  }
  out.violation = std::abs(out.lhs - out.rhs);
  const double scale = std::max(std::abs(out.lhs), std::abs(out.rhs));
  out.relative = scale > 0.0 ? out.violation / scale : 0.0;
  return out;
}

}  // namespace qmh
