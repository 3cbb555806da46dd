#include "qmhlab/classical_mh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qmhlab/errors.hpp"

namespace qmh {
namespace {

void require_dense(std::size_t n) {
  if (n > kMaxDenseStates) throw ValidationError("dense enumeration limited to 4096 states");
}

// Fills the off-diagonal acceptance mass and puts the remainder on the diagonal.
template <class Accept>
StochasticKernel assemble_pm(const StochasticKernel& driver, Accept&& accept) {
  const std::size_t n = driver.size();
  require_dense(n);
  RowMatrix m = RowMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t a = 0; a < n; ++a) {
    double moved = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      if (b == a || driver(a, b) <= 0.0) continue;
      const double v = accept(a, b) * driver(a, b);
      m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
      moved += v;
    }
    m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)) = std::max(0.0, 1.0 - moved);
  }
  return StochasticKernel(std::move(m));
}

double ratio_to_acceptance(double r) { return std::isnan(r) ? 1.0 : std::min(1.0, r); }

}  // namespace

MhModel::MhModel(StateSpace s, EnergyTable e, InverseTemperature b, StochasticKernel p)
    : space(std::move(s)), energy(std::move(e)), beta(b), driver(std::move(p)) {
  if (energy.size() != space.size) throw ValidationError("energy table length must equal |S|");
  if (driver.size() != space.size) throw ValidationError("driver dimension must equal |S|");
}

double mh_acceptance(const MhModel& model, std::size_t a, std::size_t b) {
  const double forward = model.driver(a, b);
  if (forward <= 0.0) throw ContractError("acceptance undefined: P(b|a) = 0");
  const double beta = model.beta.value();
  const double r = std::exp(beta * (model.energy[a] - model.energy[b])) * model.driver(b, a) / forward;
  return ratio_to_acceptance(r);
}

MhStepResult mh_step(const MhModel& model, std::size_t a, RandomStream& rng) {
  const std::size_t b = sample(model.driver.row(a), rng);
  const double u = rng.uniform();
  const double beta = model.beta.value();
  const double r = std::exp(beta * (model.energy[a] - model.energy[b])) * model.driver(b, a) / model.driver(a, b);
  if (u <= r) return {b, b, true};
  return {a, b, false};
}

StochasticKernel build_pm_kernel(const MhModel& model) {
  return assemble_pm(model.driver, [&](std::size_t a, std::size_t b) { return mh_acceptance(model, a, b); });
}

StochasticKernel pm_kernel_from_weights(std::span<const double> weights, const StochasticKernel& driver) {
  if (weights.size() != driver.size()) throw ValidationError("weights length must equal driver dimension");
  for (double w : weights)
    if (!std::isfinite(w) || w < 0.0) throw ValidationError("weights must be finite and non-negative");
  return assemble_pm(driver, [&](std::size_t a, std::size_t b) {
    if (weights[a] == 0.0) return 1.0;
    return ratio_to_acceptance(weights[b] * driver(b, a) / (weights[a] * driver(a, b)));
  });
}

BalanceReport check_detailed_balance(const StochasticKernel& kernel, const Distribution& p) {
  const std::size_t n = kernel.size();
  if (p.size() != n) throw ValidationError("distribution length must equal kernel dimension");
  BalanceReport r;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      r.max_violation = std::max(r.max_violation, std::abs(kernel(a, b) * p[a] - kernel(b, a) * p[b]));
  for (std::size_t b = 0; b < n; ++b) {
    double flow = 0.0;
    for (std::size_t a = 0; a < n; ++a) flow += kernel(a, b) * p[a];
    r.stationarity_l1 += std::abs(flow - p[b]);
  }
  return r;
}

std::vector<double> rejection_probabilities(const MhModel& model) {
  const std::size_t n = model.size();
  require_dense(n);
  std::vector<double> lam(n, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (model.driver(a, b) > 0.0) lam[a] += (1.0 - mh_acceptance(model, a, b)) * model.driver(a, b);
  return lam;
}

RejectionReport rejection_rate(const MhModel& model) {
  const std::size_t n = model.size();
  require_dense(n);
  const Distribution p = thermal_distribution(model.energy, model.beta);
  RejectionReport r;
  double accepted = 0.0;
  double asym = 0.0;
  std::vector<double> p_try(n, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      const double fwd = model.driver(a, b) * p[a];
      if (model.driver(a, b) > 0.0) accepted += mh_acceptance(model, a, b) * fwd;
      asym += std::abs(fwd - model.driver(b, a) * p[b]);
      p_try[b] += fwd;
    }
  r.lambda = 1.0 - accepted;
  r.lambda_tv = 0.5 * asym;
  r.trial_tv = tv_distance(std::span<const double>(p_try), std::span<const double>(p.probs()));
  return r;
}

StochasticKernel accepted_kernel(const MhModel& model) {
  const std::size_t n = model.size();
  const auto lam = rejection_probabilities(model);
  RowMatrix m = RowMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t a = 0; a < n; ++a) {
    if (lam[a] >= 1.0) throw ContractError("accepted kernel undefined: a state rejects every proposal");
    for (std::size_t b = 0; b < n; ++b)
      if (model.driver(a, b) > 0.0)
        m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
            mh_acceptance(model, a, b) * model.driver(a, b) / (1.0 - lam[a]);
  }
  return StochasticKernel(std::move(m));
}

StochasticKernel repeat_until_accept_kernel(const MhModel& model, int n) {
  if (n < 1) throw ValidationError("repetition count must be positive");
  const std::size_t s = model.size();
  const auto lam = rejection_probabilities(model);
  RowMatrix m = RowMatrix::Zero(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s));
  for (std::size_t a = 0; a < s; ++a) {
    // sum_{m<n} lambda^m
    const double geom = lam[a] >= 1.0 ? static_cast<double>(n) : (1.0 - std::pow(lam[a], n)) / (1.0 - lam[a]);
    double off = 0.0;
    for (std::size_t b = 0; b < s; ++b) {
      if (b == a || model.driver(a, b) <= 0.0) continue;
      const double v = mh_acceptance(model, a, b) * model.driver(a, b) * geom;
      m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
      off += v;
    }
    m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)) = std::max(0.0, 1.0 - off);
  }
  return StochasticKernel(std::move(m));
}

ExampleFamily example_family_kernel(const Distribution& p, double lambda_prime, double omega_prime) {
  if (!(lambda_prime >= 0.0 && lambda_prime <= 1.0) || !(omega_prime >= 0.0 && omega_prime <= 1.0))
    throw ValidationError("example family parameters must lie in [0, 1]");
  const std::size_t n = p.size();
  const std::size_t ext = n + 1;  // index n is the extra zero-weight state
  const auto m_ext = static_cast<Eigen::Index>(ext);
  RowMatrix drv(m_ext, m_ext);
  for (std::size_t a = 0; a < ext; ++a)
    for (std::size_t b = 0; b < ext; ++b) {
      const double pb = b < n ? (1.0 - lambda_prime) * p[b] : lambda_prime;
      drv(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          (1.0 - omega_prime) * pb + (a == b ? omega_prime : 0.0);
    }
  StochasticKernel driver(std::move(drv));
  std::vector<double> w(p.probs());
  w.push_back(0.0);
  StochasticKernel pm = pm_kernel_from_weights(w, driver);
  const double predicted = 1.0 - (1.0 - omega_prime) * (1.0 - lambda_prime);
  return {std::move(driver), std::move(pm), predicted, (1.0 - omega_prime) * lambda_prime};
}

EmbeddedModel embed_state_space(const MhModel& model, int n) {
  if (n < 1) throw ValidationError("embedding factor must be positive");
  const double beta = model.beta.value();
  if (beta == 0.0) throw ValidationError("embedding requires beta > 0");
  const std::size_t s = model.size();
  const double be_max = beta * model.energy.max();
  std::vector<std::size_t> copies(s);
  std::size_t total = 0;
  for (std::size_t a = 0; a < s; ++a) {
    // Relative guard keeps exact integers such as 2 * e^{ln 2} from rounding down.
    const double raw = static_cast<double>(n) * std::exp(be_max - beta * model.energy[a]);
    const double c = std::floor(raw * (1.0 + 1e-12));
    if (c < 1.0) throw ValidationError("embedding produced an empty internal set");
    copies[a] = static_cast<std::size_t>(c);
    total += copies[a];
  }
  require_dense(total);
  std::vector<double> energies;
  std::vector<std::size_t> parent;
  energies.reserve(total);
  parent.reserve(total);
  for (std::size_t a = 0; a < s; ++a)
    for (std::size_t i = 0; i < copies[a]; ++i) {
      energies.push_back(model.energy[a] + std::log(static_cast<double>(copies[a])) / beta);
      parent.push_back(a);
    }
  MhModel embedded(StateSpace(total), EnergyTable(std::move(energies)), model.beta, StochasticKernel::uniform(total));
  return {std::move(embedded), std::move(parent), std::move(copies)};
}

CoarseGrained coarse_grain_kernel(const StochasticKernel& kernel, const Distribution& p,
                                  const std::vector<std::size_t>& f, std::size_t n_obs) {
  const std::size_t n = kernel.size();
  if (p.size() != n || f.size() != n) throw ValidationError("coarse graining: size mismatch");
  std::vector<double> p_bar(n_obs, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    if (f[a] >= n_obs) throw ValidationError("coarse graining map out of range");
    p_bar[f[a]] += p[a];
  }
  for (double m : p_bar)
    if (!(m > 0.0)) throw ValidationError("observation class with zero stationary mass");
  const auto k = static_cast<Eigen::Index>(n_obs);
  RowMatrix m = RowMatrix::Zero(k, k);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      m(static_cast<Eigen::Index>(f[a]), static_cast<Eigen::Index>(f[b])) += kernel(a, b) * p[a] / p_bar[f[a]];
  return {StochasticKernel(std::move(m)), Distribution(std::move(p_bar))};
}

Distribution propagate(const StochasticKernel& kernel, const Distribution& d0, int n) {
  if (d0.size() != kernel.size()) throw ValidationError("propagate: size mismatch");
  if (n < 0) throw ValidationError("propagate: negative step count");
  Eigen::RowVectorXd d = Eigen::Map<const Eigen::RowVectorXd>(d0.probs().data(), static_cast<Eigen::Index>(d0.size()));
  for (int i = 0; i < n; ++i) d = d * kernel.matrix();
  std::vector<double> out(d.data(), d.data() + d.size());
  for (double& x : out) x = std::max(0.0, x);
  return Distribution::normalized(std::move(out));
}

PairDistribution pair_propagate(const StochasticKernel& kernel, const Distribution& p, int n) {
  if (p.size() != kernel.size()) throw ValidationError("pair_propagate: size mismatch");
  if (n < 0) throw ValidationError("pair_propagate: negative step count");
  const auto s = static_cast<Eigen::Index>(p.size());
  RowMatrix pair = RowMatrix::Zero(s, s);
  for (Eigen::Index a = 0; a < s; ++a) pair(a, a) = p[static_cast<std::size_t>(a)];
  const RowMatrix kt = kernel.matrix().transpose();
  for (int i = 0; i < n; ++i) pair = kt * pair;
  return {std::move(pair)};
}

double pair_tv_from_product(const PairDistribution& pair, const Distribution& p) {
  const auto s = static_cast<Eigen::Index>(p.size());
  double acc = 0.0;
  for (Eigen::Index a = 0; a < s; ++a)
    for (Eigen::Index b = 0; b < s; ++b)
      acc += std::abs(pair.probs(a, b) - p[static_cast<std::size_t>(a)] * p[static_cast<std::size_t>(b)]);
  return 0.5 * acc;
}

StochasticKernel compose_kernels(const std::vector<StochasticKernel>& kernels) {
  if (kernels.empty()) throw ValidationError("compose_kernels: empty schedule");
  RowMatrix m = kernels.front().matrix();
  for (std::size_t i = 1; i < kernels.size(); ++i) {
    if (kernels[i].size() != kernels.front().size()) throw ValidationError("compose_kernels: size mismatch");
    m = m * kernels[i].matrix();
  }
  // Renormalize rows against accumulated rounding.
  for (Eigen::Index a = 0; a < m.rows(); ++a) m.row(a) /= m.row(a).sum();
  return StochasticKernel(std::move(m));
}

ApproxRelationReport approx_relation(const MhModel& model) {
  ApproxRelationReport r;
  r.omega_m = retention_rate(build_pm_kernel(model));
  r.omega_a = retention_rate(accepted_kernel(model));
  r.lambda = rejection_rate(model).lambda;
  r.predicted = std::pow(r.omega_a, 1.0 - r.lambda);
  return r;
}

}  // namespace qmh
