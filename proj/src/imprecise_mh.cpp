#include "qmhlab/imprecise_mh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "qmhlab/errors.hpp"

namespace qmh {

namespace {
constexpr double kSpamTolerance = 1e-12;
}

ClassicalSpamModel::ClassicalSpamModel(std::size_t n_states, std::size_t obs_size, std::vector<double> p_o,
                                       std::vector<double> p_c)
    : n_(n_states), k_(obs_size), p_o_(std::move(p_o)), p_c_(std::move(p_c)) {
  if (n_ == 0 || k_ == 0) throw ValidationError("SPAM model needs non-empty state and observation sets");
  if (p_o_.size() != n_ * k_ * n_ || p_c_.size() != k_ * n_ * n_)
    throw ValidationError("SPAM table sizes do not match |S| and |O|");
  auto check_row = [](std::span<const double> row, const char* what) {
    double s = 0.0;
    for (double v : row) {
      if (!std::isfinite(v) || v < 0.0) throw ValidationError(std::string(what) + ": negative or non-finite entry");
      s += v;
    }
    if (std::abs(s - 1.0) > kSpamTolerance) throw ValidationError(std::string(what) + ": row does not sum to 1");
  };
  for (std::size_t a = 0; a < n_; ++a) check_row(p_o_row(a), "P_O");
  for (std::size_t o = 0; o < k_; ++o)
    for (std::size_t a = 0; a < n_; ++a) check_row(p_c_row(o, a), "P_C");
  if (spam_symmetry_check(*this) > kSpamTolerance) throw ValidationError("SPAM tables violate the symmetry condition");
}

ClassicalSpamModel ClassicalSpamModel::direct_access(std::size_t n) {
  std::vector<double> po(n * n * n, 0.0);
  std::vector<double> pc(n * n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) po[(a * n + a) * n + a] = 1.0;
  for (std::size_t o = 0; o < n; ++o)
    for (std::size_t a = 0; a < n; ++a) pc[(o * n + a) * n + o] = 1.0;
  return ClassicalSpamModel(n, n, std::move(po), std::move(pc));
}

ClassicalSpamModel ClassicalSpamModel::idle(std::size_t n) {
  std::vector<double> po(n * n, 0.0);
  std::vector<double> pc(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    po[a * n + a] = 1.0;
    pc[a * n + a] = 1.0;
  }
  return ClassicalSpamModel(n, 1, std::move(po), std::move(pc));
}

double ClassicalSpamModel::p_s(std::size_t i, std::size_t b, std::size_t o, std::size_t a) const {
  double s = 0.0;
  for (std::size_t c = 0; c < n_; ++c) s += p_c(o, c, b) * p_o(a, i, c);
  return s;
}

ClassicalSpamModel ClassicalSpamModel::with_perturbed_control(std::size_t o, std::size_t a, std::size_t b,
                                                              double delta) const {
  ClassicalSpamModel m;
  m.n_ = n_;
  m.k_ = k_;
  m.p_o_ = p_o_;
  m.p_c_ = p_c_;
  m.p_c_[(o * n_ + a) * n_ + b] += delta;
  return m;
}

double spam_symmetry_check(const ClassicalSpamModel& spam) {
  const std::size_t n = spam.n_states();
  const std::size_t k = spam.obs_size();
  double worst = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t o = 0; o < k; ++o)
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
          worst = std::max(worst, std::abs(spam.p_s(i, b, o, a) - spam.p_s(o, a, i, b)));
  return worst;
}

ImpreciseModel::ImpreciseModel(EnergyTable e, ClassicalSpamModel s) : energy(std::move(e)), spam(std::move(s)) {
  if (energy.size() != spam.n_states()) throw ValidationError("energy table and SPAM model disagree on |S|");
}

ImpreciseConfig::ImpreciseConfig(double sigma_, std::size_t n_max_, StochasticKernel driver_,
                                 InverseTemperature beta_)
    : sigma(sigma_), n_max(n_max_), driver(std::move(driver_)), beta(beta_) {
  if (!std::isfinite(sigma) || sigma < 0.0) throw ValidationError("sigma must be finite and non-negative");
  if (n_max < 1) throw ValidationError("n_max must be at least 1");
}

double ClassicalBackend::measure_energy(RandomStream& rng) {
  const double e = model_->energy[state_];
  return sigma_ > 0.0 ? e + sigma_ * rng.normal() : e;
}

std::size_t ClassicalBackend::observe(RandomStream& rng) {
  const std::size_t n = model_->spam.n_states();
  const std::size_t flat = sample(model_->spam.p_o_row(state_), rng);
  state_ = flat % n;
  return flat / n;
}

void ClassicalBackend::control(std::size_t o, RandomStream& rng) {
  state_ = sample(model_->spam.p_c_row(o, state_), rng);
}

UpdateRecord imh_step(const ImpreciseModel& model, const ImpreciseConfig& cfg, std::size_t a, RandomStream& rng) {
  if (a >= model.size()) throw ValidationError("hidden state out of range");
  if (cfg.driver.size() != model.spam.obs_size()) throw ValidationError("driver must act on the observation set");
  ClassicalBackend backend(model, cfg.sigma, a);
  UpdateRecord rec = delayed_rejection_update(backend, cfg, rng);
  rec.final_state = backend.state();
  return rec;
}

double symmetric_density(const Trajectory& traj, const std::vector<std::size_t>& path, const ImpreciseModel& model,
                         double sigma) {
  if (path.size() != traj.length()) throw ValidationError("hidden path length must match the trajectory");
  if (!(sigma > 0.0)) throw ValidationError("symmetric density needs sigma > 0");
  const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * sigma);
  double d = 1.0;
  for (std::size_t m = 0; m < path.size(); ++m) {
    const double z = (traj[m].omega - model.energy[path[m]]) / sigma;
    d *= norm * std::exp(-0.5 * z * z);
  }
  for (std::size_t m = 0; m + 1 < path.size(); ++m) d *= model.spam.p_s(traj[m + 1].o, path[m + 1], traj[m].o, path[m]);
  return d;
}

double branch_probability(const Trajectory& traj, const std::vector<std::size_t>& path, const ImpreciseModel& model,
                          const ImpreciseConfig& cfg) {
  return symmetric_density(traj, path, model, cfg.sigma) *
         decision_probability(traj, cfg.driver, cfg.beta.value(), cfg.sigma, cfg.n_max);
}

GaussianIdentity gaussian_identity_check(double energy, double beta, double sigma,
                                         const std::function<double(double)>& f) {
  GaussianIdentity g;
  if (sigma == 0.0) {
    g.lhs = std::exp(-beta * energy) * f(energy);
    g.rhs = g.lhs;
    return g;
  }
  if (!(sigma > 0.0)) throw ValidationError("sigma must be non-negative");
  using boost::math::quadrature::gauss_kronrod;
  const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * sigma);
  const double shift = beta * sigma * sigma;
  auto lhs_integrand = [&](double w) {
    const double z = (w - energy) / sigma;
    return norm * std::exp(-0.5 * z * z - beta * energy) * f(w);
  };
  auto rhs_integrand = [&](double w) {
    const double z = (w - energy) / sigma;
    return norm * std::exp(-0.5 * z * z - beta * w - 0.5 * shift * beta) * f(w + shift);
  };
  // The reweighted Gaussian is centred at E - beta sigma^2.
  g.lhs = gauss_kronrod<double, 61>::integrate(lhs_integrand, energy - 12.0 * sigma, energy + 12.0 * sigma, 12, 1e-14);
  g.rhs = gauss_kronrod<double, 61>::integrate(rhs_integrand, energy - shift - 12.0 * sigma,
                                               energy - shift + 12.0 * sigma, 12, 1e-14);
  g.violation = std::abs(g.lhs - g.rhs);
  return g;
}

MeanEstimate estimate_mean(const std::vector<double>& values, std::size_t batches) {
  if (values.empty()) throw ValidationError("estimate_mean: empty input");
  MeanEstimate e;
  const double n = static_cast<double>(values.size());
  double s = 0.0;
  for (double v : values) s += v;
  e.mean = s / n;
  double ss = 0.0;
  for (double v : values) ss += (v - e.mean) * (v - e.mean);
  e.variance = values.size() > 1 ? ss / (n - 1.0) : 0.0;
  e.se_iid = std::sqrt(e.variance / n);
  const std::size_t nb = std::min(batches, values.size());
  if (nb < 2) {
    e.se_batch = e.se_iid;
    return e;
  }
  const std::size_t len = values.size() / nb;
  std::vector<double> means(nb, 0.0);
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t k = 0; k < len; ++k) means[b] += values[b * len + k];
    means[b] /= static_cast<double>(len);
  }
  double mm = 0.0;
  for (double m : means) mm += m;
  mm /= static_cast<double>(nb);
  double vb = 0.0;
  for (double m : means) vb += (m - mm) * (m - mm);
  vb /= static_cast<double>(nb - 1);
  e.se_batch = std::max(e.se_iid, std::sqrt(vb / static_cast<double>(nb)));
  return e;
}

EstimatorReport estimators(const std::vector<UpdateRecord>& records, const std::function<double(std::size_t)>& f) {
  if (records.empty()) throw ValidationError("estimators: no records");
  std::vector<double> fs;
  std::vector<double> ws;
  fs.reserve(records.size());
  ws.reserve(records.size());
  for (const auto& r : records) {
    fs.push_back(f(r.trajectory[1].o));
    ws.push_back(r.trajectory[0].omega);
  }
  return {estimate_mean(fs), estimate_mean(ws)};
}

EstimatorOracle estimator_oracle(const ImpreciseModel& model, const Distribution& p, double sigma,
                                 const std::function<double(std::size_t)>& f) {
  const std::size_t n = model.size();
  const std::size_t k = model.spam.obs_size();
  EstimatorOracle o;
  std::vector<double> f_o(n, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t b = 0; b < n; ++b) f_o[a] += f(i) * model.spam.p_o(a, i, b);
  for (std::size_t a = 0; a < n; ++a) {
    o.mu_f += f_o[a] * p[a];
    o.mu_omega += model.energy[a] * p[a];
  }
  for (std::size_t a = 0; a < n; ++a) {
    o.var_f0 += (f_o[a] - o.mu_f) * (f_o[a] - o.mu_f) * p[a];
    o.var_omega0 += (model.energy[a] - o.mu_omega) * (model.energy[a] - o.mu_omega) * p[a];
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t b = 0; b < n; ++b) o.var_f += (f(i) - o.mu_f) * (f(i) - o.mu_f) * model.spam.p_o(a, i, b) * p[a];
  }
  o.var_omega = o.var_omega0 + sigma * sigma;
  return o;
}

}  // namespace qmh
