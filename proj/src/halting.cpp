#include "qmhlab/halting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "qmhlab/errors.hpp"
#include "qmhlab/parallel.hpp"
#include "qmhlab/random.hpp"

namespace qmh {
namespace {

using boost::math::erfc;
using boost::math::quadrature::gauss_kronrod;

constexpr double kLeftCut = -6.0;     // below: erfc(-x)/2 < 1e-17, integrand analytic
constexpr double kUpperMargin = 12.0;
constexpr std::size_t kShards = 64;

double x_n_of(std::size_t n) { return n > 2 ? std::sqrt(std::log(0.5 * static_cast<double>(n))) : 0.0; }

double target_tolerance(std::size_t n) { return n <= 1000 ? 1e-8 : 1e-6; }

// Integral of f over [kLeftCut, upper], split where the integrand bends.
template <class F>
double integrate_pieces(F f, double centre, double* error) {
  const double upper = centre + kUpperMargin;
  const double cuts[] = {kLeftCut, std::min(0.0, centre), centre, centre + 3.0, upper};
  double total = 0.0;
  double err_total = 0.0;
  for (int k = 0; k + 1 < 5; ++k) {
    if (cuts[k + 1] <= cuts[k]) continue;
    double err = 0.0;
    total += gauss_kronrod<double, 61>::integrate(f, cuts[k], cuts[k + 1], 20, 1e-14, &err);
    err_total += err;
  }
  if (error) *error = err_total;
  return total;
}

void require_positive_delta(double delta) {
  if (!(delta > 0.0)) throw ValidationError("analytic halting quantities need Delta > 0");
}

}  // namespace

HaltingParams::HaltingParams(double delta_, std::size_t n_max_) : delta(delta_), n_max(n_max_) {
  if (!std::isfinite(delta) || delta < 0.0) throw ValidationError("Delta must be finite and non-negative");
  if (n_max < 1) throw ValidationError("halting cap must be at least 1");
}

double HaltingSample::p(std::size_t n) const {
  if (n == 0 || n >= counts.size()) return 0.0;
  return static_cast<double>(counts[n]) / static_cast<double>(runs);
}

double HaltingSample::se(std::size_t n) const {
  const double q = p(n);
  return std::sqrt(q * (1.0 - q) / static_cast<double>(runs));
}

double HaltingSample::truncation() const { return static_cast<double>(unhalted) / static_cast<double>(runs); }

HaltingSample simulate_halting(const HaltingParams& params, std::size_t runs, std::uint64_t seed) {
  if (runs < 1) throw ValidationError("need at least one halting run");
  const std::size_t cap = params.n_max;
  const double sd = std::sqrt(params.delta);
  std::vector<std::vector<std::uint64_t>> shard_counts(kShards, std::vector<std::uint64_t>(cap + 1, 0));
  std::vector<std::uint64_t> shard_unhalted(kShards, 0);
  parallel_for(kShards, [&](std::size_t shard) {
    RandomStream rng(seed, shard, "halting");
    const std::size_t mine = runs / kShards + (shard < runs % kShards ? 1 : 0);
    auto& counts = shard_counts[shard];
    for (std::size_t r = 0; r < mine; ++r) {
      const double c = sd * rng.normal() + params.delta;
      double y_max = -std::numeric_limits<double>::infinity();
      std::size_t n = 1;
      for (; n <= cap; ++n) {
        const double y = sd * rng.normal();
        const double u = rng.uniform();
        if (std::exp(y - c) >= u + (1.0 - u) * std::exp(y_max - c)) break;
        y_max = std::max(y_max, y);
      }
      if (n > cap) {
        ++shard_unhalted[shard];
        n = cap;
      }
      ++counts[n];
    }
  });
  HaltingSample out;
  out.runs = runs;
  out.counts.assign(cap + 1, 0);
  for (std::size_t s = 0; s < kShards; ++s) {
    for (std::size_t n = 0; n <= cap; ++n) out.counts[n] += shard_counts[s][n];
    out.unhalted += shard_unhalted[s];
  }
  return out;
}

double analytic_s(const HaltingParams& params, std::size_t n, double* error) {
  if (error) *error = 0.0;
  if (n == 0) return 0.0;
  if (n == 1) return 1.0;
  require_positive_delta(params.delta);
  const double d = params.delta;
  const double k = std::sqrt(2.0 * d);
  const double nn = static_cast<double>(n);
  auto f = [&](double x) {
    const double miss = -std::expm1(nn * std::log1p(-0.5 * erfc(x)));
    return k * std::exp(k * x - 0.5 * d) * miss;
  };
  double err = 0.0;
  const double body = integrate_pieces(f, std::max(x_n_of(n), std::sqrt(0.5 * d)), &err);
  const double tail = std::exp(k * kLeftCut - 0.5 * d);
  if (error) *error = err;
  if (err > target_tolerance(n)) throw QuadratureError("s_n quadrature did not converge", err);
  return body + tail;
}

double r_mn(const HaltingParams& params, std::size_t m, std::size_t n, double* error) {
  if (m < 1) throw ValidationError("r_{m,n} needs m >= 1");
  require_positive_delta(params.delta);
  const double d = params.delta;
  const double k = std::sqrt(2.0 * d);
  const double mm = static_cast<double>(m);
  const double nn = static_cast<double>(n);
  auto f = [&](double x) {
    const double lo = 0.5 * erfc(x);
    double logv = k * x - 0.5 * d + mm * std::log(lo);
    if (n > 0) logv += nn * std::log1p(-lo);
    return k * std::exp(logv);
  };
  double err = 0.0;
  const double body = integrate_pieces(f, std::max(x_n_of(n), std::sqrt(0.5 * d)), &err);
  const double tail = n == 0 ? std::exp(k * kLeftCut - 0.5 * d) : 0.0;
  if (error) *error = err;
  if (err > target_tolerance(n)) throw QuadratureError("r_{m,n} quadrature did not converge", err);
  return body + tail;
}

HaltingTable halting_table(const HaltingParams& params, std::size_t n_limit) {
  require_positive_delta(params.delta);
  HaltingTable tab;
  tab.s.resize(n_limit + 2);
  for (std::size_t n = 0; n <= n_limit + 1; ++n) {
    double err = 0.0;
    tab.s[n] = analytic_s(params, n, &err);
    tab.max_error = std::max(tab.max_error, err);
  }
  tab.t.assign(n_limit + 2, 0.0);
  for (std::size_t n = 1; n <= n_limit + 1; ++n) tab.t[n] = tab.s[n] - tab.s[n - 1];
  if (tab.t[1] != 1.0) throw ContractError("t_1 must equal 1");
  tab.p_halt.assign(n_limit + 1, 0.0);
  for (std::size_t n = 1; n <= n_limit; ++n) tab.p_halt[n] = tab.t[n] - tab.t[n + 1];
  tab.s.resize(n_limit + 1);
  tab.t.resize(n_limit + 1);
  return tab;
}

SBracket s_bracket(double delta, std::size_t n, bool relaxed) {
  require_positive_delta(delta);
  if (n < 3) throw ValidationError("s_n bracket needs n >= 3");
  const double xn = x_n_of(n);
  const double sqrt_pi = std::sqrt(std::numbers::pi);
  const double alpha = 0.5 * std::pow(std::numbers::pi, 0.25) * std::sqrt(delta / xn);
  const double scale = std::exp(std::sqrt(2.0 * delta) * xn - 0.5 * delta);
  const double h = std::sqrt(0.5 * delta);
  if (relaxed) {
    if (xn < h) throw ValidationError("relaxed s_n bracket needs x_n >= sqrt(Delta/2)");
    return {(1.0 - sqrt_pi * alpha) * scale, (1.0 + h / xn) * scale};
  }
  const double lower = (1.0 - sqrt_pi * alpha * std::exp(alpha * alpha) * erfc(alpha)) * scale;
  const double upper = scale + static_cast<double>(n) / (2.0 * xn) * h * erfc(xn - h);
  return {lower, upper};
}

namespace {

double rel_slack(double lower, double upper) {
  const double scale = std::max(std::abs(lower), std::abs(upper));
  return scale > 0.0 ? (upper - lower) / scale : 0.0;
}

struct SlackTracker {
  BoundCheck check;
  explicit SlackTracker(std::string name) { check.name = std::move(name); check.worst_slack = INFINITY; }
  void add(double lower, double upper) {
    check.worst_slack = std::min(check.worst_slack, rel_slack(lower, upper));
    ++check.points;
  }
};

std::vector<double> grid(double a, double b, std::size_t count) {
  std::vector<double> g(count);
  for (std::size_t k = 0; k < count; ++k) g[k] = a + (b - a) * static_cast<double>(k) / static_cast<double>(count - 1);
  return g;
}

}  // namespace

std::vector<BoundCheck> bound_suite(const std::vector<double>& deltas, const std::vector<std::size_t>& ns) {
  const double sqrt_pi = std::sqrt(std::numbers::pi);
  std::vector<BoundCheck> out;

  SlackTracker gauss("erfc(x) <= exp(-x^2), x >= 0");
  for (double x : grid(0.0, 10.0, 2001)) gauss.add(erfc(x), std::exp(-x * x));
  out.push_back(gauss.check);

  SlackTracker range("0 <= erfc(x) <= 2, all x");
  for (double x : grid(-10.0, 10.0, 2001)) {
    range.add(0.0, erfc(x));
    range.add(erfc(x), 2.0);
  }
  out.push_back(range.check);

  SlackTracker chain("erfc sandwich chain, x >= y > 0");
  for (double y : grid(0.05, 6.0, 120))
    for (double x : grid(y, y + 8.0, 161)) {
      const double g = std::exp(-x * x);
      const double c0 = std::exp(1.0 - x / y - x * x) / (sqrt_pi * y + 1.0);
      const double c1 = g / (sqrt_pi * x + 1.0);
      const double c2 = erfc(x);
      const double c3 = g / (sqrt_pi * x);
      const double c4 = g / (sqrt_pi * y);
      chain.add(0.0, c0);
      chain.add(c0, c1);
      chain.add(c1, c2);
      chain.add(c2, c3);
      chain.add(c3, c4);
    }
  out.push_back(chain.check);

  for (std::size_t n : ns) {
    if (n < 3) continue;
    const double xn = x_n_of(n);
    const double nn = static_cast<double>(n);
    SlackTracker lo("erfc(-x)^n lower bound, n = " + std::to_string(n));
    SlackTracker hi("erfc(-x)^n upper bound, n = " + std::to_string(n));
    for (double x : grid(-8.0, xn + 8.0, 4001)) {
      const double q = std::exp(nn * std::log1p(-0.5 * erfc(x)));
      if (x >= xn) {
        lo.add(1.0 - nn / (2.0 * sqrt_pi * xn) * std::exp(-x * x), q);
        hi.add(q, 1.0);
      } else {
        lo.add(0.0, q);
        hi.add(q, std::exp(-(2.0 * xn / sqrt_pi) * (x - xn) * (x - xn)));
      }
    }
    out.push_back(lo.check);
    out.push_back(hi.check);
  }

  SlackTracker tight("s_n bracket");
  SlackTracker loose("s_n relaxed bracket, x_n >= sqrt(Delta/2)");
  for (double d : deltas)
    for (std::size_t n : ns) {
      if (n < 3) continue;
      const HaltingParams hp(d);
      const double s = analytic_s(hp, n);
      const SBracket b = s_bracket(d, n, false);
      tight.add(b.lower, s);
      tight.add(s, b.upper);
      if (x_n_of(n) >= std::sqrt(0.5 * d)) {
        const SBracket r = s_bracket(d, n, true);
        loose.add(r.lower, s);
        loose.add(s, r.upper);
      }
    }
  out.push_back(tight.check);
  if (loose.check.points > 0) out.push_back(loose.check);
  return out;
}

CostAccuracy cost_accuracy_model(double beta, double sigma, double eps) {
  if (!(eps > 0.0) || !(eps < 1.0)) throw ValidationError("eps must lie in (0, 1)");
  const double bs = beta * sigma;
  return {std::exp(bs * std::sqrt(2.0 * std::log(1.0 / eps))), eps < bs && bs < 1.0};
}

double n_halt_model(double beta_sigma, double n_max) {
  return std::exp(beta_sigma * std::sqrt(2.0 * std::log(n_max)) - 0.5 * beta_sigma * beta_sigma);
}

double eps_tilde_model(double beta_sigma, double n_max) {
  const double l = std::log(n_max);
  return beta_sigma * std::exp(beta_sigma * std::sqrt(2.0 * l)) / (std::sqrt(2.0 * std::numbers::pi) * n_max * l);
}

}  // namespace qmh
