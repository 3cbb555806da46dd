#include "qmhlab/branch_integration.hpp"

#include <algorithm>
#include <cmath>

#include "qmhlab/classical_mh.hpp"
#include "qmhlab/errors.hpp"
#include "qmhlab/quadrature.hpp"

namespace qmh {
namespace {

struct Walker {
  const ImpreciseModel& model;
  const ImpreciseConfig& cfg;
  std::vector<std::vector<double>> omega_nodes;  // per hidden state
  std::vector<double> weights;
  std::vector<double> p_s;  // [((i * n + b) * k + o) * n + a]
  double beta;
  std::size_t n;
  std::size_t k;

  // Outputs for the current start state.
  std::vector<double>* accepted_row = nullptr;
  std::vector<double>* terminal_row = nullptr;
  std::vector<double>* halt_row = nullptr;
  std::map<std::vector<std::size_t>, double>* law = nullptr;
  std::vector<std::size_t> labels;
  double ref = 0.0;  // shifted omega_0 of the current start node

  Walker(const ImpreciseModel& m, const ImpreciseConfig& c, std::size_t nodes)
      : model(m), cfg(c), beta(c.beta.value()), n(m.size()), k(m.spam.obs_size()) {
    const NormalQuadrature q = gauss_hermite_normal(c.sigma > 0.0 ? nodes : 1);
    weights = q.weights;
    omega_nodes.resize(n);
    for (std::size_t a = 0; a < n; ++a)
      for (double z : q.nodes) omega_nodes[a].push_back(m.energy[a] + c.sigma * z);
    p_s.resize(k * n * k * n);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t o = 0; o < k; ++o)
          for (std::size_t a = 0; a < n; ++a) p_s[((i * n + b) * k + o) * n + a] = m.spam.p_s(i, b, o, a);
  }

  double ps(std::size_t i, std::size_t b, std::size_t o, std::size_t a) const {
    return p_s[((i * n + b) * k + o) * n + a];
  }

  // Entry at step `step` just measured; x is x_step, x_min = min_{r<step} x_r.
  void settle(std::size_t step, std::size_t a, double weight, double x, double x_min, double e_cur) {
    const double acc = x < x_min ? std::min(1.0, (x_min - x) / x_min) : 0.0;
    const double w_acc = weight * acc;
    const double w_rej = weight - w_acc;
    (*accepted_row)[a] += w_acc;
    (*halt_row)[step - 1] += w_acc;
    if (law) (*law)[labels] += w_acc;
    if (step == cfg.n_max) {
      (*terminal_row)[a] += w_rej;
      (*halt_row)[step - 1] += w_rej;
      if (law) (*law)[labels] += w_rej;
      return;
    }
    if (!(w_rej > 0.0)) return;
    const std::size_t o = labels.back();
    const double x_min_next = std::min(x_min, x);
    for (std::size_t i = 0; i < k; ++i) {
      const double back = e_cur * cfg.driver(i, o);
      const double fwd_p = cfg.driver(o, i);
      for (std::size_t b = 0; b < n; ++b) {
        const double t = ps(i, b, o, a);
        if (t <= 0.0) continue;
        labels.push_back(i);
        for (std::size_t q = 0; q < weights.size(); ++q) {
          const double e_next = std::exp(-beta * (omega_nodes[b][q] - ref));
          settle(step + 1, b, w_rej * t * weights[q], x + back - e_next * fwd_p, x_min_next, e_next);
        }
        labels.pop_back();
      }
    }
  }

  void run(std::size_t a0) {
    for (std::size_t q0 = 0; q0 < weights.size(); ++q0) {
      ref = omega_nodes[a0][q0] - beta * cfg.sigma * cfg.sigma;
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t o = 0; o < k; ++o) {
          const double prop = cfg.driver(i, o);
          if (prop <= 0.0) continue;
          for (std::size_t b = 0; b < n; ++b) {
            const double t = ps(i, b, o, a0);
            if (t <= 0.0) continue;
            labels = {o, i};
            for (std::size_t q = 0; q < weights.size(); ++q) {
              const double e1 = std::exp(-beta * (omega_nodes[b][q] - ref));
              const double x0 = prop;
              settle(1, b, weights[q0] * prop * t * weights[q], x0 - e1 * cfg.driver(o, i), x0, e1);
            }
          }
        }
    }
  }
};

void check_sizes(const ImpreciseModel& model, const ImpreciseConfig& cfg) {
  if (model.size() > 4 || model.spam.obs_size() > 3 || cfg.n_max > 3)
    throw ValidationError("exact branch integration limited to |S| <= 4, |O| <= 3, n_max <= 3");
  if (cfg.driver.size() != model.spam.obs_size()) throw ValidationError("driver must act on the observation set");
}

}  // namespace

ExactImprecise exact_imprecise_kernel(const ImpreciseModel& model, const ImpreciseConfig& cfg, std::size_t nodes) {
  check_sizes(model, cfg);
  Walker w(model, cfg, nodes);
  const std::size_t n = model.size();
  const auto m = static_cast<Eigen::Index>(n);
  RowMatrix total(m, m);
  RowMatrix accepted(m, m);
  std::vector<double> trunc(n, 0.0);
  std::vector<std::vector<double>> halt(n, std::vector<double>(cfg.n_max, 0.0));
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<double> acc(n, 0.0);
    std::vector<double> term(n, 0.0);
    w.accepted_row = &acc;
    w.terminal_row = &term;
    w.halt_row = &halt[a];
    w.run(a);
    double row = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      accepted(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = acc[b];
      total(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = acc[b] + term[b];
      trunc[a] += term[b];
      row += acc[b] + term[b];
    }
    // Node weights sum to 1 only up to rounding.
    total.row(static_cast<Eigen::Index>(a)) /= row;
  }
  return {StochasticKernel(std::move(total)), std::move(accepted), std::move(trunc), std::move(halt)};
}

std::map<std::vector<std::size_t>, double> outcome_law(const ImpreciseModel& model, const ImpreciseConfig& cfg,
                                                       std::size_t a, std::size_t nodes) {
  check_sizes(model, cfg);
  if (a >= model.size()) throw ValidationError("start state out of range");
  Walker w(model, cfg, nodes);
  std::vector<double> acc(model.size(), 0.0);
  std::vector<double> term(model.size(), 0.0);
  std::vector<double> halt(cfg.n_max, 0.0);
  std::map<std::vector<std::size_t>, double> law;
  w.accepted_row = &acc;
  w.terminal_row = &term;
  w.halt_row = &halt;
  w.law = &law;
  w.run(a);
  return law;
}

ExactErrorReport exact_error_bounds(const ImpreciseModel& model, const ImpreciseConfig& cfg,
                                    const std::function<double(std::size_t)>& f, std::size_t nodes) {
  const ExactImprecise ex = exact_imprecise_kernel(model, cfg, nodes);
  const std::size_t n = model.size();
  ExactErrorReport r;
  const Distribution p = thermal_distribution(model.energy, cfg.beta);
  const Distribution pt = stationary_distribution(ex.kernel);
  r.p = p.probs();
  r.p_tilde = pt.probs();
  r.tv = tv_distance(p, pt);
  for (std::size_t a = 0; a < n; ++a) {
    r.eps_tilde += pt[a] * ex.truncation[a];
    r.eps += p[a] * ex.truncation[a];
    r.eps_max = std::max(r.eps_max, ex.truncation[a]);
    double row = ex.truncation[a];
    for (std::size_t b = 0; b < n; ++b) row += ex.accepted(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    r.row_sum_error = std::max(r.row_sum_error, std::abs(row - 1.0));
  }
  r.omega_tilde = retention_rate(ex.kernel);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      double l1 = 0.0;
      for (std::size_t c = 0; c < n; ++c)
        l1 += std::abs(ex.accepted(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c)) -
                       ex.accepted(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(c)));
      r.omega_ideal_lower =
          std::max(r.omega_ideal_lower, 0.5 * l1 - 0.5 * (ex.truncation[a] + ex.truncation[b]));
    }
  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : INFINITY; };
  r.bound_eps_tilde = ratio(r.eps_tilde, 1.0 - r.omega_ideal_lower);
  r.bound_eps = ratio(r.eps, 1.0 - r.omega_tilde);
  const double den = std::max(0.0, 1.0 - r.omega_tilde - r.eps_max);
  r.bound_measurable = ratio(r.eps_tilde, den);

  double max_e = 0.0;
  double max_f = 0.0;
  for (std::size_t a = 0; a < n; ++a) max_e = std::max(max_e, std::abs(model.energy[a]));
  for (std::size_t i = 0; i < model.spam.obs_size(); ++i) max_f = std::max(max_f, std::abs(f(i)));
  for (std::size_t a = 0; a < n; ++a) {
    double f_o = 0.0;
    for (std::size_t i = 0; i < model.spam.obs_size(); ++i)
      for (std::size_t b = 0; b < n; ++b) f_o += f(i) * model.spam.p_o(a, i, b);
    r.mu_omega += model.energy[a] * p[a];
    r.mu_omega_tilde += model.energy[a] * pt[a];
    r.mu_f += f_o * p[a];
    r.mu_f_tilde += f_o * pt[a];
  }
  r.ev_bound_omega = ratio(2.0 * r.eps_tilde * max_e, den);
  r.ev_bound_f = ratio(2.0 * r.eps_tilde * max_f, den);
  return r;
}

}  // namespace qmh
