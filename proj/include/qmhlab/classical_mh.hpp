#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "qmhlab/core_model.hpp"

namespace qmh {

/// Dense enumeration guard for |S|^2 tables.
inline constexpr std::size_t kMaxDenseStates = 4096;

struct MhModel {
  StateSpace space;
  EnergyTable energy;
  InverseTemperature beta;
  StochasticKernel driver;

  MhModel(StateSpace s, EnergyTable e, InverseTemperature b, StochasticKernel p);
  std::size_t size() const noexcept { return space.size; }
};

/// Joint probabilities over S x S; row index is the first argument.
struct PairDistribution {
  RowMatrix probs;
};

/// Metropolis-Hastings acceptance min{1, e^{beta E(a) - beta E(b)} P(a|b)/P(b|a)}.
/// Throws ContractError when P(b|a) = 0.
double mh_acceptance(const MhModel& model, std::size_t a, std::size_t b);

struct MhStepResult {
  std::size_t state;
  std::size_t proposal;
  bool accepted;
};

/// One exact Metropolis-Hastings update: proposal draw, one uniform, compare.
MhStepResult mh_step(const MhModel& model, std::size_t a, RandomStream& rng);

/// Exact P_M with the Kronecker-delta rejection mass.
StochasticKernel build_pm_kernel(const MhModel& model);

/// P_M for unnormalized stationary weights, some possibly zero. A move out
/// of a zero-weight state is always accepted; a move into one never is.
StochasticKernel pm_kernel_from_weights(std::span<const double> weights, const StochasticKernel& driver);

struct BalanceReport {
  double max_violation = 0.0;   ///< max |K(b|a)p(a) - K(a|b)p(b)|
  double stationarity_l1 = 0.0; ///< ||K^T p - p||_1
};

BalanceReport check_detailed_balance(const StochasticKernel& kernel, const Distribution& p);

struct RejectionReport {
  double lambda = 0.0;      ///< 1 - sum A P p
  double lambda_tv = 0.0;   ///< time-reversal TV form
  double trial_tv = 0.0;    ///< TV(p_try, p), bounded by lambda
};

RejectionReport rejection_rate(const MhModel& model);

/// Per-state rejection probability lambda(a).
std::vector<double> rejection_probabilities(const MhModel& model);

/// P_A = A P / (1 - lambda); requires lambda(a) < 1 everywhere.
StochasticKernel accepted_kernel(const MhModel& model);

/// The exact update repeated until acceptance, at most n times.
StochasticKernel repeat_until_accept_kernel(const MhModel& model, int n);

struct ExampleFamily {
  StochasticKernel driver;     ///< P' on S plus the trailing absorbing label
  StochasticKernel pm_kernel;  ///< P'_M
  double predicted_retention;  ///< 1 - (1 - omega')(1 - lambda')
  double rejection_rate;       ///< stationary rejection rate of P'
};

ExampleFamily example_family_kernel(const Distribution& p, double lambda_prime, double omega_prime);

struct EmbeddedModel {
  MhModel model;                    ///< embedded energies, uniform driver
  std::vector<std::size_t> parent;  ///< embedded index -> original state
  std::vector<std::size_t> copies;  ///< |I_n(a)| per original state
};

EmbeddedModel embed_state_space(const MhModel& model, int n);

struct CoarseGrained {
  StochasticKernel kernel;
  Distribution p_bar;
};

/// f maps each state to an observation index in [0, n_obs).
CoarseGrained coarse_grain_kernel(const StochasticKernel& kernel, const Distribution& p,
                                  const std::vector<std::size_t>& f, std::size_t n_obs);

Distribution propagate(const StochasticKernel& kernel, const Distribution& d0, int n);
PairDistribution pair_propagate(const StochasticKernel& kernel, const Distribution& p, int n);
double pair_tv_from_product(const PairDistribution& pair, const Distribution& p);

/// K_1 then K_2 then ... (one cycle of a round-robin schedule).
StochasticKernel compose_kernels(const std::vector<StochasticKernel>& kernels);

/// Omega_M against Omega_A^(1 - Lambda); a diagnostic only.
struct ApproxRelationReport {
  double omega_m = 0.0;
  double omega_a = 0.0;
  double lambda = 0.0;
  double predicted = 0.0;
};

ApproxRelationReport approx_relation(const MhModel& model);

}  // namespace qmh
