#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qmhlab/core_model.hpp"
#include "qmhlab/update_loop.hpp"

namespace qmh {

/// (1 + Omega) / (1 - Omega); Omega in [0, 1).
double n_mix_bound(double omega);

struct CostModelInputs {
  double omega_tilde = 0.0;  ///< in [0, 1)
  double eps_tilde = 0.0;    ///< in (0, 1)
  double beta = 1.0;
  double sigma = 1.0;        ///< > 0
  double sigma0 = 0.0;       ///< >= 0

  CostModelInputs(double omega_tilde_, double eps_tilde_, double beta_, double sigma_, double sigma0_ = 0.0);
};

/// Hamiltonian evolution time per independent sample (model output).
double t_mix(const CostModelInputs& in);

struct SigmaChoice {
  double sigma = 0.0;
  double t_max = 0.0;
};
/// sigma = 1 / (beta sqrt(2 log(1/eps))), t_max = beta log(1/eps).
SigmaChoice sigma_opt(double beta, double eps_tilde);

/// beta log(1/eps) (1+Omega)/(1-Omega) exp(sqrt(1 + 2 beta^2 sigma0^2 log(1/eps))).
double t_mix_minimized(double beta, double eps_tilde, double omega_tilde, double sigma0);

/// Integrated autocorrelation time 1 + 2 sum rho_k, summed until the first
/// negative estimate, with Sokal's standard error.
struct AutocorrelationTime {
  double tau = 1.0;
  double se = 0.0;
  std::size_t window = 0;
};
AutocorrelationTime integrated_autocorrelation(const std::vector<double>& values);

/// Retention of the observation-level transition matrix estimated from
/// consecutive pairs. An underestimate for classical chains, biased for
/// quantum chains.
struct CoarseRetention {
  double omega_bar = 0.0;
  double se = 0.0;                    ///< delta-method SE at the maximizing pair
  RowMatrix transitions;              ///< over the observed classes only
  std::vector<std::size_t> classes;   ///< labels kept, in row order
  std::vector<std::size_t> excluded;  ///< labels with no outgoing pairs
};
CoarseRetention coarse_retention_from_trace(const std::vector<std::size_t>& trace, std::size_t obs_size);

struct TruncationGroup {
  std::uint64_t count = 0;
  std::uint64_t truncated = 0;
};

/// Number of energy bins in the epsilon_max grouping key.
inline constexpr std::size_t kEpsMaxBins = 8;

/// Groups each update by the newest (o, omega-bin) of the previous record.
/// Bins split [omega_lo, omega_hi] evenly; values outside go to the end bins.
std::map<std::pair<std::size_t, std::size_t>, TruncationGroup> group_truncations(
    const std::vector<UpdateRecord>& records, double omega_lo, double omega_hi, std::size_t bins = kEpsMaxBins);

/// Largest group truncation frequency and its Wilson upper bound (z = 1.96).
/// A proxy for the hidden-state maximum.
struct EpsMaxEstimate {
  double estimate = 0.0;
  double upper = 0.0;
  std::size_t groups = 0;
};
EpsMaxEstimate epsilon_max_estimate(const std::vector<TruncationGroup>& groups);

/// Wilson score interval upper end.
double wilson_upper(std::uint64_t successes, std::uint64_t trials, double z = 1.96);

/// max{0, 1 - Omega - eps_max}; the bound is vacuous when this is 0.
double bound_denominator(double omega_tilde, double eps_max);

/// Pearson chi-squared goodness of fit; cells with expected count < 5 are pooled.
struct ChiSquared {
  double statistic = 0.0;
  std::size_t dof = 0;
  double p_value = 1.0;
};
ChiSquared chi_squared_test(const std::vector<std::uint64_t>& observed, const std::vector<double>& probs);

/// Observation sequence of a record, o_0 .. o_n (n is implied by the length).
std::vector<std::size_t> outcome_key(const UpdateRecord& rec);
using OutcomeHistogram = std::map<std::vector<std::size_t>, std::uint64_t>;

/// Two-sample comparison of categorical frequencies. Categories whose
/// combined count is below pool_below are merged into one cell.
struct HistogramComparison {
  double max_z = 0.0;
  std::size_t cells = 0;
  std::vector<std::size_t> worst;
};
HistogramComparison compare_histograms(const OutcomeHistogram& h1, std::uint64_t n1, const OutcomeHistogram& h2,
                                       std::uint64_t n2, std::uint64_t pool_below = 40);

/// Cost-model quantities next to the measured statistics they are built from.
struct DiagnosticsReport {
  double omega_bar = 0.0;
  double eps_tilde = 0.0;
  double eps_max = 0.0;
  double n_mix_bound = 0.0;
  double t_mix = 0.0;
  double sigma_opt = 0.0;
  std::vector<std::string> flags;
};

}  // namespace qmh
