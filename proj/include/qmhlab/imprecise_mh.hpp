#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "qmhlab/acceptance.hpp"
#include "qmhlab/core_model.hpp"
#include "qmhlab/update_loop.hpp"

namespace qmh {

/// Classical SPAM tables. p_o(a, i, b) = P_O(i, b | a); p_c(o, a, b) = P_C(b | o, a).
class ClassicalSpamModel {
 public:
  ClassicalSpamModel(std::size_t n_states, std::size_t obs_size, std::vector<double> p_o, std::vector<double> p_c);

  /// O = S, P_O(i,b|a) = d_{i,a} d_{b,a}, P_C(b|i,a) = d_{b,i}.
  static ClassicalSpamModel direct_access(std::size_t n_states);
  /// |O| = 1, no state change.
  static ClassicalSpamModel idle(std::size_t n_states);

  std::size_t n_states() const noexcept { return n_; }
  std::size_t obs_size() const noexcept { return k_; }
  double p_o(std::size_t a, std::size_t i, std::size_t b) const { return p_o_[(a * k_ + i) * n_ + b]; }
  double p_c(std::size_t o, std::size_t a, std::size_t b) const { return p_c_[(o * n_ + a) * n_ + b]; }
  /// Row P_O(., . | a) flattened as i * |S| + b.
  std::span<const double> p_o_row(std::size_t a) const { return {p_o_.data() + a * k_ * n_, k_ * n_}; }
  std::span<const double> p_c_row(std::size_t o, std::size_t a) const { return {p_c_.data() + (o * n_ + a) * n_, n_}; }
  /// P_S(i, b | o, a) = sum_c P_C(b|o,c) P_O(i,c|a).
  double p_s(std::size_t i, std::size_t b, std::size_t o, std::size_t a) const;

  /// Unvalidated copy with one P_C entry changed; for mutation tests.
  ClassicalSpamModel with_perturbed_control(std::size_t o, std::size_t a, std::size_t b, double delta) const;

 private:
  ClassicalSpamModel() = default;
  std::size_t n_ = 0;
  std::size_t k_ = 0;
  std::vector<double> p_o_;
  std::vector<double> p_c_;
};

/// max |P_S(i,b|o,a) - P_S(o,a|i,b)|.
double spam_symmetry_check(const ClassicalSpamModel& spam);

struct ImpreciseModel {
  EnergyTable energy;
  ClassicalSpamModel spam;

  ImpreciseModel(EnergyTable e, ClassicalSpamModel s);
  std::size_t size() const noexcept { return energy.size(); }
};

/// Classical SPAM backend for the shared update loop.
class ClassicalBackend {
 public:
  ClassicalBackend(const ImpreciseModel& model, double sigma, std::size_t state)
      : model_(&model), sigma_(sigma), state_(state) {}

  double measure_energy(RandomStream& rng);
  std::size_t observe(RandomStream& rng);
  void control(std::size_t o, RandomStream& rng);
  std::size_t state() const noexcept { return state_; }

 private:
  const ImpreciseModel* model_;
  double sigma_;
  std::size_t state_;
};

/// One imprecise update from hidden state a.
UpdateRecord imh_step(const ImpreciseModel& model, const ImpreciseConfig& cfg, std::size_t a, RandomStream& rng);

/// Gaussian densities times P_S factors for the hidden path s_0..s_n.
double symmetric_density(const Trajectory& traj, const std::vector<std::size_t>& path, const ImpreciseModel& model,
                         double sigma);

/// Symmetric density times the capped decision factor.
double branch_probability(const Trajectory& traj, const std::vector<std::size_t>& path, const ImpreciseModel& model,
                          const ImpreciseConfig& cfg);

/// Both sides of the Gaussian reweighting identity, each divided by
/// sqrt(2 pi sigma^2), integrated adaptively over +-12 sigma.
struct GaussianIdentity {
  double lhs = 0.0;
  double rhs = 0.0;
  double violation = 0.0;
};

GaussianIdentity gaussian_identity_check(double energy, double beta, double sigma,
                                         const std::function<double(double)>& f);

/// Sample moments with independent and batch-means standard errors.
struct MeanEstimate {
  double mean = 0.0;
  double variance = 0.0;
  double se_iid = 0.0;
  double se_batch = 0.0;
};

MeanEstimate estimate_mean(const std::vector<double>& values, std::size_t batches = 50);

struct EstimatorReport {
  MeanEstimate f;      ///< f(o_1)
  MeanEstimate omega;  ///< omega_0
};

EstimatorReport estimators(const std::vector<UpdateRecord>& records, const std::function<double(std::size_t)>& f);

/// Exact thermal reference values of the estimators and their variances.
struct EstimatorOracle {
  double mu_f = 0.0;
  double mu_omega = 0.0;
  double var_f0 = 0.0;
  double var_f = 0.0;
  double var_omega0 = 0.0;
  double var_omega = 0.0;
};

EstimatorOracle estimator_oracle(const ImpreciseModel& model, const Distribution& p, double sigma,
                                 const std::function<double(std::size_t)>& f);

}  // namespace qmh
