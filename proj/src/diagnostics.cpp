#include "qmhlab/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>

#include "qmhlab/errors.hpp"

namespace qmh {

double n_mix_bound(double omega) {
  if (!(omega >= 0.0 && omega < 1.0)) throw ValidationError("retention must lie in [0, 1)");
  return (1.0 + omega) / (1.0 - omega);
}

CostModelInputs::CostModelInputs(double omega_tilde_, double eps_tilde_, double beta_, double sigma_, double sigma0_)
    : omega_tilde(omega_tilde_), eps_tilde(eps_tilde_), beta(beta_), sigma(sigma_), sigma0(sigma0_) {
  if (!(omega_tilde >= 0.0 && omega_tilde < 1.0)) throw ValidationError("retention must lie in [0, 1)");
  if (!(eps_tilde > 0.0 && eps_tilde < 1.0)) throw ValidationError("truncation error must lie in (0, 1)");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ValidationError("beta must be finite and non-negative");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma must be positive");
  if (!(sigma0 >= 0.0) || !std::isfinite(sigma0)) throw ValidationError("sigma0 must be non-negative");
}

double t_mix(const CostModelInputs& in) {
  const double l = std::log(1.0 / in.eps_tilde);
  return n_mix_bound(in.omega_tilde) * std::sqrt(0.5 * l) *
         std::exp(in.beta * std::sqrt(2.0 * (in.sigma * in.sigma + in.sigma0 * in.sigma0) * l)) / in.sigma;
}

SigmaChoice sigma_opt(double beta, double eps_tilde) {
  if (!(eps_tilde > 0.0 && eps_tilde < 1.0)) throw ValidationError("truncation error must lie in (0, 1)");
  if (!(beta > 0.0)) throw ValidationError("sigma_opt needs beta > 0");
  const double l = std::log(1.0 / eps_tilde);
  return {1.0 / (beta * std::sqrt(2.0 * l)), beta * l};
}

double t_mix_minimized(double beta, double eps_tilde, double omega_tilde, double sigma0) {
  if (!(eps_tilde > 0.0 && eps_tilde < 1.0)) throw ValidationError("truncation error must lie in (0, 1)");
  const double l = std::log(1.0 / eps_tilde);
  return beta * l * n_mix_bound(omega_tilde) * std::exp(std::sqrt(1.0 + 2.0 * beta * beta * sigma0 * sigma0 * l));
}

AutocorrelationTime integrated_autocorrelation(const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n < 10) throw ValidationError("autocorrelation needs at least 10 values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  auto cov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) s += (values[t] - mean) * (values[t + lag] - mean);
    return s / static_cast<double>(n);
  };
  const double c0 = cov(0);
  AutocorrelationTime out;
  if (!(c0 > 0.0)) return out;
  double tau = 1.0;
  std::size_t m = 1;
  for (; m < n / 2; ++m) {
    const double rho = cov(m) / c0;
    if (rho < 0.0) break;
    tau += 2.0 * rho;
  }
  out.tau = tau;
  out.window = m;
  out.se = tau * std::sqrt(2.0 * (2.0 * static_cast<double>(m) + 1.0) / static_cast<double>(n));
  return out;
}

CoarseRetention coarse_retention_from_trace(const std::vector<std::size_t>& trace, std::size_t obs_size) {
  if (trace.size() < 1000) throw ValidationError("coarse retention needs a trace of at least 1000 entries");
  std::vector<std::vector<double>> counts(obs_size, std::vector<double>(obs_size, 0.0));
  for (std::size_t t = 0; t + 1 < trace.size(); ++t) {
    if (trace[t] >= obs_size || trace[t + 1] >= obs_size) throw ValidationError("trace label out of range");
    counts[trace[t]][trace[t + 1]] += 1.0;
  }
  CoarseRetention out;
  std::vector<double> totals;
  for (std::size_t a = 0; a < obs_size; ++a) {
    double tot = 0.0;
    for (double c : counts[a]) tot += c;
    if (tot > 0.0) {
      out.classes.push_back(a);
      totals.push_back(tot);
    } else {
      out.excluded.push_back(a);
    }
  }
  const std::size_t k = out.classes.size();
  out.transitions = RowMatrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t c = 0; c < k; ++c)
      out.transitions(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          counts[out.classes[r]][out.classes[c]] / totals[r];
  // Pairs into an excluded class are dropped; renormalize what is left.
  for (std::size_t r = 0; r < k; ++r) {
    const double s = out.transitions.row(static_cast<Eigen::Index>(r)).sum();
    if (s > 0.0) out.transitions.row(static_cast<Eigen::Index>(r)) /= s;
  }
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) {
      const auto ra = out.transitions.row(static_cast<Eigen::Index>(a));
      const auto rb = out.transitions.row(static_cast<Eigen::Index>(b));
      const double tv = 0.5 * (ra - rb).cwiseAbs().sum();
      if (tv < out.omega_bar) continue;
      out.omega_bar = tv;
      auto row_var = [&](const auto& row, const Eigen::RowVectorXd& g, double n) {
        const double m1 = row.dot(g);
        const double m2 = row.dot(g.cwiseAbs2());
        return std::max(0.0, m2 - m1 * m1) / n;
      };
      Eigen::RowVectorXd g = (ra - rb).unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
      out.se = 0.5 * std::sqrt(row_var(ra, g, totals[a]) + row_var(rb, g, totals[b]));
    }
  return out;
}

std::map<std::pair<std::size_t, std::size_t>, TruncationGroup> group_truncations(
    const std::vector<UpdateRecord>& records, double omega_lo, double omega_hi, std::size_t bins) {
  if (bins < 1 || !(omega_hi > omega_lo)) throw ValidationError("invalid energy binning");
  std::map<std::pair<std::size_t, std::size_t>, TruncationGroup> groups;
  const double width = (omega_hi - omega_lo) / static_cast<double>(bins);
  for (std::size_t t = 1; t < records.size(); ++t) {
    const auto& prev = records[t - 1].trajectory;
    const TrajectoryEntry& last = prev[prev.n()];
    const double pos = std::floor((last.omega - omega_lo) / width);
    const auto bin = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
    TruncationGroup& g = groups[{last.o, bin}];
    ++g.count;
    if (records[t].truncated) ++g.truncated;
  }
  return groups;
}

double wilson_upper(std::uint64_t successes, std::uint64_t trials, double z) {
  if (trials == 0) return 1.0;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double centre = p + z2 / (2.0 * n);
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  return std::min(1.0, (centre + half) / (1.0 + z2 / n));
}

EpsMaxEstimate epsilon_max_estimate(const std::vector<TruncationGroup>& groups) {
  EpsMaxEstimate out;
  for (const auto& g : groups) {
    if (g.count == 0) continue;
    ++out.groups;
    out.estimate = std::max(out.estimate, static_cast<double>(g.truncated) / static_cast<double>(g.count));
    out.upper = std::max(out.upper, wilson_upper(g.truncated, g.count));
  }
  return out;
}

double bound_denominator(double omega_tilde, double eps_max) { return std::max(0.0, 1.0 - omega_tilde - eps_max); }

ChiSquared chi_squared_test(const std::vector<std::uint64_t>& observed, const std::vector<double>& probs) {
  if (observed.size() != probs.size()) throw ValidationError("observed and expected sizes differ");
  double n = 0.0;
  for (auto o : observed) n += static_cast<double>(o);
  if (!(n > 0.0)) throw ValidationError("chi-squared test needs observations");
  std::vector<double> obs;
  std::vector<double> exp;
  double pool_o = 0.0;
  double pool_e = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    const double e = n * probs[k];
    if (e < 5.0) {
      pool_o += static_cast<double>(observed[k]);
      pool_e += e;
    } else {
      obs.push_back(static_cast<double>(observed[k]));
      exp.push_back(e);
    }
  }
  if (pool_e > 0.0) {
    obs.push_back(pool_o);
    exp.push_back(pool_e);
  } else if (pool_o > 0.0) {
    return {INFINITY, obs.size(), 0.0};  // mass on impossible cells
  }
  ChiSquared out;
  for (std::size_t k = 0; k < obs.size(); ++k) out.statistic += (obs[k] - exp[k]) * (obs[k] - exp[k]) / exp[k];
  if (obs.size() < 2) return out;
  out.dof = obs.size() - 1;
  boost::math::chi_squared dist(static_cast<double>(out.dof));
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.statistic));
  return out;
}

std::vector<std::size_t> outcome_key(const UpdateRecord& rec) {
  std::vector<std::size_t> key;
  key.reserve(rec.trajectory.length());
  for (const auto& e : rec.trajectory.entries()) key.push_back(e.o);
  return key;
}

HistogramComparison compare_histograms(const OutcomeHistogram& h1, std::uint64_t n1, const OutcomeHistogram& h2,
                                       std::uint64_t n2, std::uint64_t pool_below) {
  if (n1 == 0 || n2 == 0) throw ValidationError("histograms need observations");
  std::map<std::vector<std::size_t>, std::pair<double, double>> cells;
  for (const auto& [k, c] : h1) cells[k].first += static_cast<double>(c);
  for (const auto& [k, c] : h2) cells[k].second += static_cast<double>(c);
  std::pair<double, double> pooled{0.0, 0.0};
  HistogramComparison out;
  const double m1 = static_cast<double>(n1);
  const double m2 = static_cast<double>(n2);
  auto score = [&](const std::pair<double, double>& c, const std::vector<std::size_t>& key) {
    const double p1 = c.first / m1;
    const double p2 = c.second / m2;
    const double se = std::sqrt(p1 * (1.0 - p1) / m1 + p2 * (1.0 - p2) / m2);
    ++out.cells;
    if (!(se > 0.0)) return;
    const double z = std::abs(p1 - p2) / se;
    if (z > out.max_z) {
      out.max_z = z;
      out.worst = key;
    }
  };
  for (const auto& [k, c] : cells) {
    if (c.first + c.second < static_cast<double>(pool_below)) {
      pooled.first += c.first;
      pooled.second += c.second;
    } else {
      score(c, k);
    }
  }
  if (pooled.first + pooled.second > 0.0) score(pooled, {});
  return out;
}

}  // namespace qmh
