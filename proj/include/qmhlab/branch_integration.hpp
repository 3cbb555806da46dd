#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <vector>

#include "qmhlab/core_model.hpp"
#include "qmhlab/imprecise_mh.hpp"

namespace qmh {

/// Branch sums of the capped imprecise process with every energy integrated
/// by Gauss-Hermite quadrature centred on the hidden state's energy.
struct ExactImprecise {
  StochasticKernel kernel;                   ///< capped kernel over S
  RowMatrix accepted;                        ///< mass accepted at n <= n_max, by (a, b)
  std::vector<double> truncation;            ///< terminal mass per start state
  std::vector<std::vector<double>> halt_at;  ///< [a][n-1] mass halting at n, terminal included at n_max
};

/// Size guard: |S| <= 4, |O| <= 3, n_max <= 3.
ExactImprecise exact_imprecise_kernel(const ImpreciseModel& model, const ImpreciseConfig& cfg,
                                      std::size_t nodes = 64);

/// Joint law of the observation sequence (o_0..o_n) from start state a;
/// n is the sequence length minus one.
std::map<std::vector<std::size_t>, double> outcome_law(const ImpreciseModel& model, const ImpreciseConfig& cfg,
                                                       std::size_t a, std::size_t nodes = 64);

struct ExactErrorReport {
  std::vector<double> p;
  std::vector<double> p_tilde;
  double tv = 0.0;                 ///< TV(p_tilde, p)
  double eps_tilde = 0.0;
  double eps = 0.0;
  double eps_max = 0.0;
  double omega_tilde = 0.0;        ///< retention of the capped kernel
  double omega_ideal_lower = 0.0;  ///< certified lower bound on the uncapped retention
  double bound_eps_tilde = 0.0;    ///< eps_tilde / (1 - omega_ideal_lower)
  double bound_eps = 0.0;          ///< eps / (1 - omega_tilde)
  double bound_measurable = 0.0;   ///< eps_tilde / max{0, 1 - omega_tilde - eps_max}
  double mu_omega = 0.0;
  double mu_omega_tilde = 0.0;
  double ev_bound_omega = 0.0;
  double mu_f = 0.0;
  double mu_f_tilde = 0.0;
  double ev_bound_f = 0.0;
  double row_sum_error = 0.0;      ///< max |row sum - 1| before renormalization
};

/// Exact-mode error analysis on a small instance.
ExactErrorReport exact_error_bounds(const ImpreciseModel& model, const ImpreciseConfig& cfg,
                                    const std::function<double(std::size_t)>& f, std::size_t nodes = 64);

}  // namespace qmh
