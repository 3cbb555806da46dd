#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace qmh {

/// Null-transition halting process with Delta = beta^2 sigma^2.
struct HaltingParams {
  double delta = 0.0;
  std::size_t n_max = 1000;

  HaltingParams(double delta_, std::size_t n_max_ = 1000);
};

/// Index n runs from 0; entries at n = 0 are placeholders except s[0] = 0.
struct HaltingTable {
  std::vector<double> p_halt;  ///< p_halt(n) = t_n - t_{n+1}
  std::vector<double> t;       ///< tails, t_1 = 1
  std::vector<double> s;       ///< s_n, also the expected capped halting time
  double max_error = 0.0;      ///< largest quadrature error estimate
};

/// Empirical halt counts. counts[n] for 1 <= n <= n_max; runs that never
/// halt are in unhalted and also in counts[n_max] under the cap convention.
struct HaltingSample {
  std::size_t runs = 0;
  std::vector<std::uint64_t> counts;
  std::uint64_t unhalted = 0;

  double p(std::size_t n) const;
  double se(std::size_t n) const;
  /// Fraction of runs still running after n_max steps.
  double truncation() const;
};

/// Monte Carlo of the halting process, sharded with one stream per shard.
HaltingSample simulate_halting(const HaltingParams& params, std::size_t runs, std::uint64_t seed);

/// s_n by adaptive Gauss-Kronrod quadrature; s_0 = 0 and s_1 = 1 exactly.
/// Throws QuadratureError when the error estimate exceeds the target.
double analytic_s(const HaltingParams& params, std::size_t n, double* error = nullptr);

/// t_n, p_halt(n) and s_n for n <= n_limit (p_halt needs s_{n_limit+1}).
HaltingTable halting_table(const HaltingParams& params, std::size_t n_limit);

/// r_{m,n}, so t_n = r_{1,n-1} and p_halt(n) = r_{2,n-1}.
double r_mn(const HaltingParams& params, std::size_t m, std::size_t n, double* error = nullptr);

struct BoundCheck {
  std::string name;
  double worst_slack = 0.0;  ///< min over the grid of (upper - lower)
  std::size_t points = 0;
  bool holds() const { return worst_slack >= 0.0; }
};

/// Pointwise erfc bounds on dense x grids and the s_n bracket on an
/// (n, Delta) grid.
std::vector<BoundCheck> bound_suite(const std::vector<double>& deltas, const std::vector<std::size_t>& ns);

/// Lower and upper bracket on s_n; relaxed selects the simplified pair,
/// which requires x_n >= sqrt(Delta/2).
struct SBracket {
  double lower = 0.0;
  double upper = 0.0;
};
SBracket s_bracket(double delta, std::size_t n, bool relaxed);

/// Asymptotic cost-accuracy model outputs. These are approximations.
struct CostAccuracy {
  double n_halt = 0.0;          ///< exp(beta sigma sqrt(2 log(1/eps)))
  bool in_regime = false;       ///< eps < beta sigma < 1
};
CostAccuracy cost_accuracy_model(double beta, double sigma, double eps);

/// exp(beta sigma sqrt(2 log n) - beta^2 sigma^2 / 2).
double n_halt_model(double beta_sigma, double n_max);
/// beta sigma exp(beta sigma sqrt(2 log n)) / (sqrt(2 pi) n log n).
double eps_tilde_model(double beta_sigma, double n_max);

}  // namespace qmh
