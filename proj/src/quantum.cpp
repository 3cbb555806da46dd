#include "qmhlab/quantum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "qmhlab/errors.hpp"
#include "qmhlab/parallel.hpp"

namespace qmh {
namespace {

constexpr double kStateTolerance = 1e-12;
constexpr double kSpamTolerance = 1e-10;
constexpr double kRenormGuard = 1e-14;
constexpr std::size_t kShards = 64;

void require_dim(std::size_t d) {
  if (d == 0 || d > kMaxQuantumDim) throw ValidationError("quantum dimension must lie in [1, 64]");
}

double max_abs(const CMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

CVector normalized(const CVector& v) {
  const double nrm = v.norm();
  if (!(nrm > kRenormGuard)) throw ContractError("state collapsed to zero norm");
  return v / nrm;
}

// Diagonal of K_E(omega).
Eigen::VectorXd energy_filter(const DiagonalHamiltonian& ham, double omega) {
  const double s2 = ham.sigma * ham.sigma;
  const double norm = std::pow(2.0 * std::numbers::pi * s2, -0.25);
  Eigen::VectorXd g(static_cast<Eigen::Index>(ham.dim()));
  for (std::size_t a = 0; a < ham.dim(); ++a) {
    const double dlt = omega - ham.energy[a];
    g(static_cast<Eigen::Index>(a)) = norm * std::exp(-dlt * dlt / (4.0 * s2));
  }
  return g;
}

void check_labels(const Trajectory& traj, std::size_t k) {
  for (const auto& e : traj.entries())
    if (e.o >= k) throw ValidationError("trajectory label outside the observation set");
}

}  // namespace

QuantumState::QuantumState(CVector amplitudes) : amp_(std::move(amplitudes)) {
  require_dim(static_cast<std::size_t>(amp_.size()));
  if (!amp_.allFinite() || std::abs(amp_.norm() - 1.0) > kStateTolerance)
    throw ValidationError("quantum state must be finite with unit norm");
}

QuantumState QuantumState::basis(std::size_t d, std::size_t a) {
  require_dim(d);
  if (a >= d) throw ValidationError("basis index out of range");
  CVector v = CVector::Zero(static_cast<Eigen::Index>(d));
  v(static_cast<Eigen::Index>(a)) = 1.0;
  return QuantumState(std::move(v));
}

DensityMatrix::DensityMatrix(CMatrix rho) : rho_(std::move(rho)) {
  if (rho_.rows() != rho_.cols()) throw ValidationError("density matrix must be square");
  require_dim(static_cast<std::size_t>(rho_.rows()));
  if (!rho_.allFinite()) throw ValidationError("density matrix has non-finite entries");
  if (max_abs(rho_ - rho_.adjoint()) > kStateTolerance) throw ValidationError("density matrix is not Hermitian");
  if (std::abs(rho_.trace() - cplx(1.0)) > kStateTolerance) throw ValidationError("density matrix trace is not 1");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho_, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-10) throw ValidationError("density matrix is not positive semidefinite");
}

DensityMatrix DensityMatrix::pure(const QuantumState& psi) {
  return DensityMatrix(psi.amplitudes() * psi.amplitudes().adjoint());
}

DensityMatrix DensityMatrix::diagonal(const Distribution& p) {
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(p.probs().data(), static_cast<Eigen::Index>(p.size()));
  return DensityMatrix(v.cast<cplx>().asDiagonal());
}

double trace_distance(const CMatrix& r1, const CMatrix& r2) {
  if (r1.rows() != r2.rows() || r1.cols() != r2.cols()) throw ValidationError("trace distance dimension mismatch");
  Eigen::JacobiSVD<CMatrix> svd(r1 - r2);
  return 0.5 * svd.singularValues().sum();
}

QuantumSpamReport spam_invariants(const QuantumSpamModel& spam) {
  const auto d = static_cast<Eigen::Index>(spam.dim());
  const CMatrix id = CMatrix::Identity(d, d);
  QuantumSpamReport r;
  CMatrix sum = CMatrix::Zero(d, d);
  for (std::size_t i = 0; i < spam.obs_size(); ++i) sum += spam.k_o(i).adjoint() * spam.k_o(i);
  r.completeness = max_abs(sum - id);
  for (std::size_t o = 0; o < spam.obs_size(); ++o) {
    r.unitarity = std::max(r.unitarity, max_abs(spam.u_c(o).adjoint() * spam.u_c(o) - id));
    for (std::size_t i = 0; i < spam.obs_size(); ++i)
      r.symmetry = std::max(r.symmetry, max_abs(spam.u_c(o) * spam.k_o(i) - spam.k_o(o).adjoint() * spam.u_c(i).adjoint()));
  }
  return r;
}

QuantumSpamModel::QuantumSpamModel(std::vector<CMatrix> k_o, std::vector<CMatrix> u_c)
    : k_o_(std::move(k_o)), u_c_(std::move(u_c)) {
  if (k_o_.empty() || k_o_.size() != u_c_.size())
    throw ValidationError("SPAM needs one K_O and one U_C per observation");
  const auto d = k_o_.front().rows();
  require_dim(static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < k_o_.size(); ++i)
    if (k_o_[i].rows() != d || k_o_[i].cols() != d || u_c_[i].rows() != d || u_c_[i].cols() != d ||
        !k_o_[i].allFinite() || !u_c_[i].allFinite())
      throw ValidationError("SPAM matrices must be finite and d x d");
  const QuantumSpamReport r = spam_invariants(*this);
  if (r.completeness > kSpamTolerance) throw ValidationError("K_O operators are not complete");
  if (r.unitarity > kSpamTolerance) throw ValidationError("U_C operators are not unitary");
  if (r.symmetry > kSpamTolerance) throw ValidationError("SPAM operators violate the symmetry condition");
}

QuantumSpamModel QuantumSpamModel::idle(std::size_t d) {
  require_dim(d);
  const CMatrix id = CMatrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  return QuantumSpamModel({id}, {id});
}

QuantumSpamModel QuantumSpamModel::with_perturbed_control(std::size_t o, std::size_t row, std::size_t col,
                                                          cplx delta) const {
  QuantumSpamModel m;
  m.k_o_ = k_o_;
  m.u_c_ = u_c_;
  m.u_c_.at(o)(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) += delta;
  return m;
}

QuantumSpamModel QuantumSpamModel::conjugated(const CMatrix& v) const {
  QuantumSpamModel m;
  for (const auto& k : k_o_) m.k_o_.push_back(v.adjoint() * k * v);
  for (const auto& u : u_c_) m.u_c_.push_back(v.adjoint() * u * v);
  return m;
}

QuantumSpamModel typical_spam_builder(const CMatrix& basis, std::size_t j, std::size_t obs_size) {
  const auto d = static_cast<std::size_t>(basis.rows());
  require_dim(d);
  if (basis.cols() != basis.rows()) throw ValidationError("basis must be square");
  if (obs_size == 0 || d % obs_size != 0) throw ValidationError("|S| must be divisible by |O|");
  if (j >= obs_size) throw ValidationError("post-measurement label out of range");
  const CMatrix id = CMatrix::Identity(basis.rows(), basis.cols());
  if (max_abs(basis.adjoint() * basis - id) > kSpamTolerance) throw ValidationError("basis is not orthonormal");
  const std::size_t k = d / obs_size;
  auto kappa = [&](std::size_t o, std::size_t n) { return basis.col(static_cast<Eigen::Index>(o * k + n)); };
  std::vector<CMatrix> k_o;
  std::vector<CMatrix> u_c;
  for (std::size_t o = 0; o < obs_size; ++o) {
    CMatrix u = id;
    CMatrix ko = CMatrix::Zero(basis.rows(), basis.cols());
    for (std::size_t n = 0; n < k; ++n) {
      u += kappa(o, n) * kappa(j, n).adjoint() + kappa(j, n) * kappa(o, n).adjoint() -
           kappa(o, n) * kappa(o, n).adjoint() - kappa(j, n) * kappa(j, n).adjoint();
      ko += kappa(j, n) * kappa(o, n).adjoint();
    }
    if (o == j) u = id;
    k_o.push_back(std::move(ko));
    u_c.push_back(std::move(u));
  }
  return QuantumSpamModel(std::move(k_o), std::move(u_c));
}

CMatrix random_unitary(std::size_t d, RandomStream& rng) {
  require_dim(d);
  const auto n = static_cast<Eigen::Index>(d);
  CMatrix g(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) {
      const double re = rng.normal();
      g(r, c) = cplx(re, rng.normal());
    }
  Eigen::HouseholderQR<CMatrix> qr(g);
  CMatrix q = qr.householderQ() * CMatrix::Identity(n, n);
  const CMatrix rmat = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < n; ++c) {
    const cplx diag = rmat(c, c);
    if (std::abs(diag) > 0.0) q.col(c) *= diag / std::abs(diag);
  }
  return q;
}

ClassicalSpamModel classical_limit_spam(const QuantumSpamModel& spam) {
  const std::size_t n = spam.dim();
  const std::size_t k = spam.obs_size();
  std::vector<double> p_o(n * k * n);
  std::vector<double> p_c(k * n * n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t c = 0; c < n; ++c)
        p_o[(a * k + i) * n + c] = std::norm(spam.k_o(i)(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(a)));
  for (std::size_t o = 0; o < k; ++o)
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t b = 0; b < n; ++b)
        p_c[(o * n + c) * n + b] = std::norm(spam.u_c(o)(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(c)));
  return ClassicalSpamModel(n, k, std::move(p_o), std::move(p_c));
}

DiagonalHamiltonian::DiagonalHamiltonian(EnergyTable e, double sigma_) : energy(std::move(e)), sigma(sigma_) {
  require_dim(energy.size());
  if (!std::isfinite(sigma) || sigma < 0.0) throw ValidationError("sigma must be finite and non-negative");
}

Diagonalized diagonalize_hamiltonian(const CMatrix& h, const QuantumSpamModel& spam) {
  if (h.rows() != h.cols() || static_cast<std::size_t>(h.rows()) != spam.dim())
    throw ValidationError("Hamiltonian and SPAM dimensions differ");
  if (!h.allFinite() || max_abs(h - h.adjoint()) > kSpamTolerance) throw ValidationError("Hamiltonian is not Hermitian");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  const CMatrix v = es.eigenvectors();
  std::vector<double> e(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  QuantumSpamModel rotated = spam.conjugated(v);
  // Re-validate in the new basis.
  std::vector<CMatrix> k_o;
  std::vector<CMatrix> u_c;
  for (std::size_t i = 0; i < rotated.obs_size(); ++i) {
    k_o.push_back(rotated.k_o(i));
    u_c.push_back(rotated.u_c(i));
  }
  return {std::move(e), v, QuantumSpamModel(std::move(k_o), std::move(u_c))};
}

std::pair<double, QuantumState> qpe_measure(const QuantumState& psi, const DiagonalHamiltonian& ham,
                                            RandomStream& rng) {
  if (!(ham.sigma > 0.0)) throw ValidationError("Gaussian energy measurement needs sigma > 0");
  if (psi.dim() != ham.dim()) throw ValidationError("state and Hamiltonian dimensions differ");
  const CVector& amp = psi.amplitudes();
  std::vector<double> pop(psi.dim());
  for (std::size_t a = 0; a < psi.dim(); ++a) pop[a] = std::norm(amp(static_cast<Eigen::Index>(a)));
  const std::size_t a = sample(pop, rng);
  const double omega = ham.energy[a] + ham.sigma * rng.normal();
  // Exponents relative to the largest occupied one, so nothing underflows to 0.
  const double s4 = 4.0 * ham.sigma * ham.sigma;
  double top = -INFINITY;
  for (std::size_t b = 0; b < psi.dim(); ++b)
    if (pop[b] > 0.0) top = std::max(top, -std::pow(omega - ham.energy[b], 2) / s4);
  CVector out(amp.size());
  for (std::size_t b = 0; b < psi.dim(); ++b) {
    const auto ib = static_cast<Eigen::Index>(b);
    out(ib) = pop[b] > 0.0 ? amp(ib) * std::exp(-std::pow(omega - ham.energy[b], 2) / s4 - top) : cplx(0.0);
  }
  return {omega, QuantumState(normalized(out))};
}

std::pair<std::size_t, QuantumState> povm_measure(const QuantumState& psi, const QuantumSpamModel& spam,
                                                  RandomStream& rng) {
  if (psi.dim() != spam.dim()) throw ValidationError("state and SPAM dimensions differ");
  std::vector<CVector> branches;
  std::vector<double> probs;
  branches.reserve(spam.obs_size());
  for (std::size_t i = 0; i < spam.obs_size(); ++i) {
    branches.push_back(spam.k_o(i) * psi.amplitudes());
    probs.push_back(branches.back().squaredNorm());
  }
  const std::size_t i = sample(probs, rng);
  return {i, QuantumState(normalized(branches[i]))};
}

QuantumBackend::QuantumBackend(const DiagonalHamiltonian& ham, const QuantumSpamModel& spam, QuantumState psi)
    : ham_(&ham), spam_(&spam), psi_(std::move(psi)) {}

double QuantumBackend::measure_energy(RandomStream& rng) {
  auto [omega, next] = qpe_measure(psi_, *ham_, rng);
  psi_ = std::move(next);
  return omega;
}

std::size_t QuantumBackend::observe(RandomStream& rng) {
  auto [i, next] = povm_measure(psi_, *spam_, rng);
  psi_ = std::move(next);
  return i;
}

void QuantumBackend::control(std::size_t o, RandomStream&) {
  psi_ = QuantumState(normalized(spam_->u_c(o) * psi_.amplitudes()));
}

std::pair<UpdateRecord, QuantumState> qmh_step(const QuantumState& psi, const DiagonalHamiltonian& ham,
                                               const QuantumSpamModel& spam, const ImpreciseConfig& cfg,
                                               RandomStream& rng) {
  if (!(ham.sigma > 0.0)) throw ValidationError("quantum updates need sigma > 0");
  if (ham.sigma != cfg.sigma) throw ValidationError("Hamiltonian sigma and update sigma differ");
  if (cfg.driver.size() != spam.obs_size()) throw ValidationError("driver must act on the observation set");
  if (psi.dim() != ham.dim() || spam.dim() != ham.dim()) throw ValidationError("dimension mismatch");
  QuantumBackend backend(ham, spam, psi);
  UpdateRecord rec = delayed_rejection_update(backend, cfg, rng);
  return {std::move(rec), backend.state()};
}

CMatrix kraus_product(const Trajectory& traj, const DiagonalHamiltonian& ham, const QuantumSpamModel& spam) {
  if (!(ham.sigma > 0.0)) throw ValidationError("Kraus products need sigma > 0");
  check_labels(traj, spam.obs_size());
  CMatrix m = energy_filter(ham, traj[0].omega).cast<cplx>().asDiagonal();
  for (std::size_t k = 0; k < traj.n(); ++k) {
    m = spam.u_c(traj[k].o) * (spam.k_o(traj[k + 1].o) * m);
    m = energy_filter(ham, traj[k + 1].omega).cast<cplx>().asDiagonal() * m;
  }
  return m;
}

TrajectoryKraus trajectory_kraus(const Trajectory& traj, const DiagonalHamiltonian& ham,
                                 const QuantumSpamModel& spam, const StochasticKernel& driver, double beta,
                                 std::size_t n_max) {
  TrajectoryKraus out{traj, kraus_product(traj, ham, spam), 0.0, false};
  try {
    out.decision = decision_probability(traj, driver, beta, ham.sigma, n_max);
  } catch (const ImpossibleEvent&) {
    out.decision = 0.0;
  }
  out.zero_decision = !(out.decision > 0.0);
  out.matrix *= std::sqrt(out.decision);
  return out;
}

QuantumBalance quantum_balance_check(const Trajectory& traj, const DiagonalHamiltonian& ham,
                                     const QuantumSpamModel& spam, const StochasticKernel& driver, double beta) {
  if (driver.size() != spam.obs_size()) throw ValidationError("driver must act on the observation set");
  QuantumBalance out;
  const double shift = beta * ham.sigma * ham.sigma;
  const Trajectory rev = traj.reversed();
  double dl = 0.0;
  double dr = 0.0;
  try {
    dl = decision_probability(traj.shifted(shift), driver, beta, ham.sigma);
    dr = decision_probability(rev.shifted(shift), driver, beta, ham.sigma);
  } catch (const ImpossibleEvent&) {
    out.impossible = true;
    return out;
  }
  const CMatrix lhs = kraus_product(traj, ham, spam) * (std::sqrt(dl) * std::exp(-0.5 * beta * traj[0].omega));
  const CMatrix rhs =
      kraus_product(rev, ham, spam).adjoint() * (std::sqrt(dr) * std::exp(-0.5 * beta * rev[0].omega));
  out.violation = max_abs(lhs - rhs);
  const double scale = std::max(max_abs(lhs), max_abs(rhs));
  out.relative = scale > 0.0 ? out.violation / scale : 0.0;
  return out;
}

ChannelEstimate channel_apply_mc(const DensityMatrix& rho_in, const DiagonalHamiltonian& ham,
                                 const QuantumSpamModel& spam, const ImpreciseConfig& cfg, std::size_t shots,
                                 std::uint64_t seed) {
  if (shots < 1) throw ValidationError("need at least one shot");
  if (rho_in.dim() != ham.dim()) throw ValidationError("dimension mismatch");
  const auto d = static_cast<Eigen::Index>(ham.dim());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho_in.matrix());
  std::vector<double> w(static_cast<std::size_t>(d));
  for (Eigen::Index k = 0; k < d; ++k) w[static_cast<std::size_t>(k)] = std::max(0.0, es.eigenvalues()(k));
  const Distribution mix = Distribution::normalized(w);

  struct Acc {
    Eigen::MatrixXd re, im, re2, im2;
    std::size_t truncated = 0;
  };
  std::vector<Acc> acc(kShards);
  parallel_for(kShards, [&](std::size_t shard) {
    RandomStream rng(seed, shard, "channel");
    Acc& a = acc[shard];
    a.re = a.im = a.re2 = a.im2 = Eigen::MatrixXd::Zero(d, d);
    const std::size_t mine = shots / kShards + (shard < shots % kShards ? 1 : 0);
    for (std::size_t s = 0; s < mine; ++s) {
      const std::size_t k = sample(mix, rng);
      const QuantumState psi(normalized(es.eigenvectors().col(static_cast<Eigen::Index>(k))));
      auto [rec, out] = qmh_step(psi, ham, spam, cfg, rng);
      if (rec.truncated) ++a.truncated;
      const CMatrix proj = out.amplitudes() * out.amplitudes().adjoint();
      a.re += proj.real();
      a.im += proj.imag();
      a.re2 += proj.real().cwiseAbs2();
      a.im2 += proj.imag().cwiseAbs2();
    }
  });
  Eigen::MatrixXd re = Eigen::MatrixXd::Zero(d, d), im = re, re2 = re, im2 = re;
  std::size_t truncated = 0;
  for (const auto& a : acc) {
    re += a.re;
    im += a.im;
    re2 += a.re2;
    im2 += a.im2;
    truncated += a.truncated;
  }
  const double n = static_cast<double>(shots);
  ChannelEstimate out;
  out.shots = shots;
  re /= n;
  im /= n;
  out.rho = re.cast<cplx>() + cplx(0.0, 1.0) * im.cast<cplx>();
  const Eigen::MatrixXd var = (re2 / n - re.cwiseAbs2()) + (im2 / n - im.cwiseAbs2());
  out.se = (var.cwiseMax(0.0) / n).cwiseSqrt();
  out.truncation = static_cast<double>(truncated) / n;
  out.truncation_se = std::sqrt(out.truncation * (1.0 - out.truncation) / n);
  return out;
}

DensityMatrix thermal_density(const EnergyTable& energy, InverseTemperature beta) {
  return DensityMatrix::diagonal(thermal_distribution(energy, beta));
}

StationarityReport stationarity_check(const DiagonalHamiltonian& ham, const QuantumSpamModel& spam,
                                      const ImpreciseConfig& cfg, std::size_t shots, std::uint64_t seed) {
  const DensityMatrix rho = thermal_density(ham.energy, cfg.beta);
  const ChannelEstimate est = channel_apply_mc(rho, ham, spam, cfg, shots, seed);
  StationarityReport r;
  r.distance = trace_distance(est.rho, rho.matrix());
  r.noise = 0.5 * std::sqrt(static_cast<double>(ham.dim())) * std::sqrt(est.se.squaredNorm());
  r.eps_tilde = est.truncation;
  return r;
}

RetentionEstimate estimate_retention(const DiagonalHamiltonian& ham, const QuantumSpamModel& spam,
                                     const ImpreciseConfig& cfg, std::size_t shots, std::uint64_t seed) {
  const std::size_t d = ham.dim();
  const auto di = static_cast<Eigen::Index>(d);
  std::vector<CVector> probes;
  for (std::size_t a = 0; a < d; ++a) probes.push_back(QuantumState::basis(d, a).amplitudes());
  const double h = std::sqrt(0.5);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a + 1; b < d; ++b) {
      CVector plus = CVector::Zero(di);
      plus(static_cast<Eigen::Index>(a)) = h;
      plus(static_cast<Eigen::Index>(b)) = h;
      CVector iplus = plus;
      iplus(static_cast<Eigen::Index>(b)) = cplx(0.0, h);
      probes.push_back(plus);
      probes.push_back(iplus);
    }
  const Eigen::Index dd = di * di;
  CMatrix x(dd, dd);
  CMatrix y(dd, dd);
  std::vector<CMatrix> outputs;
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const CMatrix in = probes[p] * probes[p].adjoint();
    const ChannelEstimate est =
        channel_apply_mc(DensityMatrix(in), ham, spam, cfg, shots, seed + 0x9e3779b97f4a7c15ULL * (p + 1));
    x.col(static_cast<Eigen::Index>(p)) = Eigen::Map<const CVector>(in.data(), dd);
    y.col(static_cast<Eigen::Index>(p)) = Eigen::Map<const CVector>(est.rho.data(), dd);
    outputs.push_back(est.rho);
  }
  RetentionEstimate r;
  r.superoperator = y * x.fullPivLu().inverse();
  CVector vid = CVector::Zero(dd);
  for (Eigen::Index a = 0; a < di; ++a) vid(a * di + a) = 1.0;
  const CMatrix proj = CMatrix::Identity(dd, dd) - vid * vid.adjoint() / static_cast<double>(d);
  Eigen::ComplexEigenSolver<CMatrix> ces(proj * r.superoperator * proj, false);
  r.spectral = ces.eigenvalues().cwiseAbs().maxCoeff();
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a + 1; b < d; ++b) r.pairwise = std::max(r.pairwise, trace_distance(outputs[a], outputs[b]));
  return r;
}

PairMixingReport pair_mixing_check(const DiagonalHamiltonian& ham, const QuantumSpamModel& spam,
                                   const ImpreciseConfig& cfg, std::size_t steps, std::size_t shots,
                                   std::uint64_t seed) {
  constexpr std::size_t kBatches = 10;
  const std::size_t d = ham.dim();
  const auto di = static_cast<Eigen::Index>(d);
  if (shots < kBatches) throw ValidationError("pair mixing needs at least 10 shots");
  const Distribution p = thermal_distribution(ham.energy, cfg.beta);
  const CMatrix rho = thermal_density(ham.energy, cfg.beta).matrix();
  // acc[a * kBatches + b][n] sums output projectors of batch b from |a>.
  std::vector<std::vector<CMatrix>> acc(d * kBatches, std::vector<CMatrix>(steps + 1, CMatrix::Zero(di, di)));
  parallel_for(d * kBatches, [&](std::size_t shard) {
    const std::size_t a = shard / kBatches;
    const std::size_t b = shard % kBatches;
    RandomStream rng(seed, shard, "pair");
    const std::size_t mine = shots / kBatches + (b < shots % kBatches ? 1 : 0);
    for (std::size_t s = 0; s < mine; ++s) {
      QuantumState psi = QuantumState::basis(d, a);
      acc[shard][0] += psi.amplitudes() * psi.amplitudes().adjoint();
      for (std::size_t n = 1; n <= steps; ++n) {
        psi = qmh_step(psi, ham, spam, cfg, rng).second;
        acc[shard][n] += psi.amplitudes() * psi.amplitudes().adjoint();
      }
    }
  });
  PairMixingReport r;
  for (std::size_t n = 0; n <= steps; ++n) {
    double total = 0.0;
    std::vector<double> batch(kBatches, 0.0);
    for (std::size_t a = 0; a < d; ++a) {
      CMatrix sum = CMatrix::Zero(di, di);
      for (std::size_t b = 0; b < kBatches; ++b) {
        const CMatrix& m = acc[a * kBatches + b][n];
        sum += m;
        batch[b] += p[a] * trace_distance(m / m.trace().real(), rho);
      }
      total += p[a] * trace_distance(sum / sum.trace().real(), rho);
    }
    double mean = 0.0;
    for (double v : batch) mean += v / kBatches;
    double var = 0.0;
    for (double v : batch) var += (v - mean) * (v - mean) / (kBatches - 1);
    r.distance.push_back(total);
    r.se.push_back(std::sqrt(var / kBatches));
  }
  for (std::size_t n = 0; n + 1 <= steps; ++n)
    if (r.distance[n + 1] > r.distance[n] + 4.0 * std::hypot(r.se[n], r.se[n + 1])) r.nonincreasing = false;
  return r;
}

double state_fidelity(const QuantumState& psi) { return psi.amplitudes().cwiseAbs2().maxCoeff(); }

}  // namespace qmh
