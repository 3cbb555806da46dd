#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qmhlab/acceptance.hpp"
#include "qmhlab/core_model.hpp"
#include "qmhlab/imprecise_mh.hpp"
#include "qmhlab/random.hpp"
#include "qmhlab/update_loop.hpp"

namespace qmh {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Dense simulations are limited to d <= 64.
inline constexpr std::size_t kMaxQuantumDim = 64;

/// Unit vector in the Hamiltonian eigenbasis.
class QuantumState {
 public:
  explicit QuantumState(CVector amplitudes);
  static QuantumState basis(std::size_t d, std::size_t a);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(amp_.size()); }
  const CVector& amplitudes() const noexcept { return amp_; }
  cplx operator[](std::size_t a) const { return amp_(static_cast<Eigen::Index>(a)); }

 private:
  friend class QuantumBackend;
  QuantumState() = default;
  CVector amp_;
};

/// Hermitian, PSD (min eigenvalue >= -1e-10), unit trace.
class DensityMatrix {
 public:
  explicit DensityMatrix(CMatrix rho);
  static DensityMatrix pure(const QuantumState& psi);
  static DensityMatrix diagonal(const Distribution& p);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(rho_.rows()); }
  const CMatrix& matrix() const noexcept { return rho_; }

 private:
  CMatrix rho_;
};

/// (1/2) sum of singular values of r1 - r2.
double trace_distance(const CMatrix& r1, const CMatrix& r2);
inline double trace_distance(const DensityMatrix& r1, const DensityMatrix& r2) {
  return trace_distance(r1.matrix(), r2.matrix());
}

/// Deviations of a SPAM model from its defining identities.
struct QuantumSpamReport {
  double completeness = 0.0;  ///< max |sum K_O^dag K_O - I|
  double unitarity = 0.0;     ///< max over o of max |U_C^dag U_C - I|
  double symmetry = 0.0;      ///< max |U_C(o) K_O(i) - K_O^dag(o) U_C^dag(i)|
  double worst() const { return std::max(completeness, std::max(unitarity, symmetry)); }
};

class QuantumSpamModel {
 public:
  /// Validates every identity within 1e-10.
  QuantumSpamModel(std::vector<CMatrix> k_o, std::vector<CMatrix> u_c);

  /// K_O = {I}, U_C = {I}.
  static QuantumSpamModel idle(std::size_t d);
  /// Unvalidated copy with U_C(o)(row, col) += delta; for mutation tests.
  QuantumSpamModel with_perturbed_control(std::size_t o, std::size_t row, std::size_t col, cplx delta) const;
  /// Same operators in another basis: X -> V^dag X V.
  QuantumSpamModel conjugated(const CMatrix& v) const;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(k_o_.front().rows()); }
  std::size_t obs_size() const noexcept { return k_o_.size(); }
  const CMatrix& k_o(std::size_t i) const { return k_o_[i]; }
  const CMatrix& u_c(std::size_t o) const { return u_c_[o]; }

 private:
  QuantumSpamModel() = default;
  std::vector<CMatrix> k_o_;
  std::vector<CMatrix> u_c_;
};

QuantumSpamReport spam_invariants(const QuantumSpamModel& spam);

/// U_C(o) swaps the kappa(o) and kappa(j) subspaces; K_O(i) maps kappa_n(i)
/// to kappa_n(j). kappa_n(o) is column o * (d / obs_size) + n of basis.
QuantumSpamModel typical_spam_builder(const CMatrix& basis, std::size_t j, std::size_t obs_size);

/// Haar-random unitary from QR of a complex Gaussian matrix.
CMatrix random_unitary(std::size_t d, RandomStream& rng);

/// Classical tables |<c|K_O(i)|a>|^2 and |<b|U_C(o)|c>|^2. Valid as a
/// classical model when the SPAM matrices are monomial in the eigenbasis.
ClassicalSpamModel classical_limit_spam(const QuantumSpamModel& spam);

struct DiagonalHamiltonian {
  EnergyTable energy;
  double sigma = 0.0;

  DiagonalHamiltonian(EnergyTable e, double sigma_);
  std::size_t dim() const noexcept { return energy.size(); }
};

/// A Hermitian H given in some other basis, rotated to its eigenbasis.
/// The SPAM operators are conjugated into the same basis.
struct Diagonalized {
  std::vector<double> energies;
  CMatrix eigenbasis;  ///< columns are eigenvectors in the input basis
  QuantumSpamModel spam;
};
Diagonalized diagonalize_hamiltonian(const CMatrix& h, const QuantumSpamModel& spam);

/// Gaussian-filtered energy measurement: samples the eigen-index by
/// population, adds N(0, sigma^2), applies K_E(omega) and renormalizes.
std::pair<double, QuantumState> qpe_measure(const QuantumState& psi, const DiagonalHamiltonian& ham,
                                            RandomStream& rng);

/// Samples i with probability |K_O(i) psi|^2 and collapses.
std::pair<std::size_t, QuantumState> povm_measure(const QuantumState& psi, const QuantumSpamModel& spam,
                                                  RandomStream& rng);

/// Quantum backend for the shared delayed-rejection loop.
class QuantumBackend {
 public:
  QuantumBackend(const DiagonalHamiltonian& ham, const QuantumSpamModel& spam, QuantumState psi);

  double measure_energy(RandomStream& rng);
  std::size_t observe(RandomStream& rng);
  void control(std::size_t o, RandomStream& rng);
  const QuantumState& state() const noexcept { return psi_; }

 private:
  const DiagonalHamiltonian* ham_;
  const QuantumSpamModel* spam_;
  QuantumState psi_;
};

/// One quantum update. Requires sigma > 0 and a driver on the observation set.
std::pair<UpdateRecord, QuantumState> qmh_step(const QuantumState& psi, const DiagonalHamiltonian& ham,
                                               const QuantumSpamModel& spam, const ImpreciseConfig& cfg,
                                               RandomStream& rng);

/// Symmetric Kraus factor kappa(gamma) as a matrix, without the decision factor.
CMatrix kraus_product(const Trajectory& traj, const DiagonalHamiltonian& ham, const QuantumSpamModel& spam);

struct TrajectoryKraus {
  Trajectory trajectory;
  CMatrix matrix;
  double decision = 0.0;
  bool zero_decision = false;  ///< decision factor vanished or was undefined
};

/// kappa(gamma) * sqrt(decision). n_max = 0 selects the uncapped process.
TrajectoryKraus trajectory_kraus(const Trajectory& traj, const DiagonalHamiltonian& ham,
                                 const QuantumSpamModel& spam, const StochasticKernel& driver, double beta,
                                 std::size_t n_max = 0);

struct QuantumBalance {
  double violation = 0.0;  ///< max entry magnitude of lhs - rhs
  double relative = 0.0;   ///< violation / max entry magnitude of either side
  bool impossible = false;
};

/// Strict balance between gamma and its reversal, both built explicitly from
/// the SPAM matrices. The beta sigma^2 shift enters the decision factor.
QuantumBalance quantum_balance_check(const Trajectory& traj, const DiagonalHamiltonian& ham,
                                     const QuantumSpamModel& spam, const StochasticKernel& driver, double beta);

/// Monte Carlo channel estimate with entrywise standard errors.
struct ChannelEstimate {
  CMatrix rho;
  Eigen::MatrixXd se;      ///< sqrt(var(re) + var(im)) / sqrt(shots) per entry
  double truncation = 0.0; ///< fraction of shots that hit n_max
  double truncation_se = 0.0;
  std::size_t shots = 0;
};

/// Purifies rho_in by sampling its eigenvectors, runs one update per shot and
/// averages the output projectors. Sharded; deterministic in the seed.
ChannelEstimate channel_apply_mc(const DensityMatrix& rho_in, const DiagonalHamiltonian& ham,
                                 const QuantumSpamModel& spam, const ImpreciseConfig& cfg, std::size_t shots,
                                 std::uint64_t seed);

/// Thermal density matrix in the eigenbasis.
DensityMatrix thermal_density(const EnergyTable& energy, InverseTemperature beta);

struct StationarityReport {
  double distance = 0.0;   ///< trace distance of the estimate to rho
  double noise = 0.0;      ///< (1/2) sqrt(d) sqrt(sum se^2)
  double eps_tilde = 0.0;  ///< truncation rate from the same shots
  bool consistent() const { return distance <= eps_tilde + 4.0 * noise; }
};
StationarityReport stationarity_check(const DiagonalHamiltonian& ham, const QuantumSpamModel& spam,
                                      const ImpreciseConfig& cfg, std::size_t shots, std::uint64_t seed);

/// Superoperator estimate from d^2 probe states and derived retention proxies.
struct RetentionEstimate {
  double spectral = 0.0;   ///< largest |eigenvalue| on the traceless subspace (heuristic)
  double pairwise = 0.0;   ///< max_{a,b} TD(Q(|a><a|), Q(|b><b|)), a lower-bound proxy
  CMatrix superoperator;   ///< column-stacked vec(Q(X)) = S vec(X)
};
RetentionEstimate estimate_retention(const DiagonalHamiltonian& ham, const QuantumSpamModel& spam,
                                     const ImpreciseConfig& cfg, std::size_t shots, std::uint64_t seed);

struct PairMixingReport {
  std::vector<double> distance;  ///< sum_a p(a) TD(rho_n^mix(a), rho), n = 0..steps
  std::vector<double> se;        ///< batch standard errors
  bool nonincreasing = true;     ///< within 4 combined SE
};
PairMixingReport pair_mixing_check(const DiagonalHamiltonian& ham, const QuantumSpamModel& spam,
                                   const ImpreciseConfig& cfg, std::size_t steps, std::size_t shots,
                                   std::uint64_t seed);

/// max_a |<a|psi>|^2.
double state_fidelity(const QuantumState& psi);

}  // namespace qmh
