#include "qmhlab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include <boost/math/special_functions/erf.hpp>
#include <openssl/evp.h>

#include "qmhlab/acceptance.hpp"
#include "qmhlab/classical_mh.hpp"
#include "qmhlab/diagnostics.hpp"
#include "qmhlab/errors.hpp"
#include "qmhlab/halting.hpp"
#include "qmhlab/imprecise_mh.hpp"
#include "qmhlab/parallel.hpp"
#include "qmhlab/quantum.hpp"
#include "qmhlab/random_instances.hpp"

#ifndef QMHLAB_VERSION
#define QMHLAB_VERSION "unknown"
#endif

namespace qmh {

using nlohmann::json;
namespace fs = std::filesystem;

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int k = 0; k < len; ++k) {
    out.push_back(hex[digest[k] >> 4]);
    out.push_back(hex[digest[k] & 15]);
  }
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string config_hash(const ExperimentConfig& cfg) { return sha256_hex(canonical_config(cfg)); }

json mean_json(const MeanEstimate& m) {
  return {{"mean", m.mean}, {"variance", m.variance}, {"se_iid", m.se_iid}, {"se_batch", m.se_batch}};
}

std::string chain_file(const char* stem, std::size_t chain, const char* ext) {
  return std::string(stem) + "_chain" + std::to_string(chain) + ext;
}

std::size_t thermal_start(const Distribution& p, const ExperimentConfig& cfg, std::size_t chain) {
  if (cfg.raw.contains("start") && cfg.raw.at("start").is_number_integer()) {
    const auto s = cfg.raw.at("start").get<std::size_t>();
    if (s >= p.size()) throw ValidationError("config .start: state out of range");
    return s;
  }
  RandomStream init(cfg.seed, chain, "init");
  return sample(p, init);
}

// ---------------------------------------------------------------- classical

void classical_run(const ExperimentConfig& cfg, const std::string& hash, RunOutputs& out) {
  const MhModel model = config_mh_model(cfg);
  const Distribution p = thermal_distribution(model.energy, model.beta);
  const std::size_t total = cfg.burn_in + cfg.steps;
  std::vector<std::vector<MhStepResult>> chains(cfg.chains);
  parallel_for(cfg.chains, [&](std::size_t c) {
    RandomStream rng(cfg.seed, c, "classical");
    std::size_t a = thermal_start(p, cfg, c);
    chains[c].reserve(total);
    for (std::size_t t = 0; t < total; ++t) {
      chains[c].push_back(mh_step(model, a, rng));
      a = chains[c].back().state;
    }
  });
  std::vector<double> energies;
  std::vector<std::uint64_t> visits(model.size(), 0);
  std::uint64_t accepted = 0;
  for (std::size_t c = 0; c < cfg.chains; ++c) {
    std::ostringstream os;
    os << "# qmhlab classical trace config_sha256=" << hash << " chain=" << c << "\n";
    os << "step,state,proposal,accepted\n";
    for (std::size_t t = 0; t < total; ++t) {
      const auto& r = chains[c][t];
      os << t << ',' << r.state << ',' << r.proposal << ',' << (r.accepted ? 1 : 0) << '\n';
      if (t < cfg.burn_in) continue;
      energies.push_back(model.energy[r.state]);
      ++visits[r.state];
      if (r.accepted) ++accepted;
    }
    out.files.emplace_back(chain_file("trace", c, ".csv"), os.str());
  }
  const double n = static_cast<double>(energies.size());
  std::vector<double> freq(model.size());
  for (std::size_t a = 0; a < model.size(); ++a) freq[a] = static_cast<double>(visits[a]) / n;
  double mu = 0.0;
  for (std::size_t a = 0; a < model.size(); ++a) mu += p[a] * model.energy[a];
  json s = {{"acceptance_rate", static_cast<double>(accepted) / n},
            {"energy", mean_json(estimate_mean(energies))},
            {"thermal_energy", mu},
            {"state_frequencies", freq},
            {"thermal_distribution", p.probs()},
            {"tv_frequencies_thermal", tv_distance(std::span<const double>(freq), std::span<const double>(p.probs()))}};
  if (model.size() <= kMaxDenseStates) {
    const StochasticKernel k = build_pm_kernel(model);
    const RejectionReport rr = rejection_rate(model);
    const BalanceReport br = check_detailed_balance(k, p);
    s["exact"] = {{"rejection_rate", rr.lambda},
                  {"retention_rate", retention_rate(k)},
                  {"balance_violation", br.max_violation},
                  {"stationarity_l1", br.stationarity_l1}};
  }
  out.summary["classical"] = s;
}

// --------------------------------------------------- imprecise and quantum

struct ChainRecords {
  std::vector<UpdateRecord> records;
  std::vector<std::size_t> hidden;   // classical: final hidden state
  std::vector<double> fidelity;      // quantum: state fidelity after the update
};

std::string trajectory_jsonl(const ExperimentConfig& cfg, const std::string& hash, std::size_t chain,
                             const ChainRecords& cr, bool quantum) {
  std::ostringstream os;
  os << "{\"config_sha256\":\"" << hash << "\",\"chain\":" << chain << ",\"format\":\"qmhlab-trajectory-v1\"}\n";
  for (std::size_t t = 0; t < cr.records.size(); ++t) {
    const UpdateRecord& r = cr.records[t];
    os << "{\"step\":" << t << ",\"n\":" << r.halted_at << ",\"truncated\":" << (r.truncated ? "true" : "false")
       << ",\"trajectory\":[";
    for (std::size_t k = 0; k < r.trajectory.length(); ++k) {
      if (k) os << ',';
      os << '[' << r.trajectory[k].o << ',' << format_double(r.trajectory[k].omega) << ']';
    }
    os << ']';
    if (cfg.oracle_mode) {
      if (quantum)
        os << ",\"state_fidelity\":" << format_double(cr.fidelity[t]);
      else
        os << ",\"hidden_state\":" << cr.hidden[t];
    }
    os << "}\n";
  }
  return os.str();
}

json chain_statistics(const ExperimentConfig& cfg, const std::vector<ChainRecords>& chains,
                      const std::vector<double>& f, double omega_lo, double omega_hi, std::size_t obs_size) {
  std::vector<UpdateRecord> post;
  std::vector<TruncationGroup> groups;
  std::map<std::size_t, std::uint64_t> halting;
  std::uint64_t truncated = 0;
  for (const auto& c : chains) {
    std::vector<UpdateRecord> tail(c.records.begin() + static_cast<std::ptrdiff_t>(cfg.burn_in), c.records.end());
    for (const auto& [key, g] : group_truncations(tail, omega_lo, omega_hi)) groups.push_back(g);
    for (const auto& r : tail) {
      ++halting[r.halted_at];
      if (r.truncated) ++truncated;
    }
    post.insert(post.end(), tail.begin(), tail.end());
  }
  const EstimatorReport est = estimators(post, [&](std::size_t i) { return f[i]; });
  const double n = static_cast<double>(post.size());
  const double eps = static_cast<double>(truncated) / n;
  const EpsMaxEstimate em = epsilon_max_estimate(groups);
  json hist = json::array();
  for (const auto& [k, v] : halting) hist.push_back({k, v});
  json s = {{"updates", post.size()},
            {"f_o1", mean_json(est.f)},
            {"omega_0", mean_json(est.omega)},
            {"eps_tilde", eps},
            {"eps_tilde_se", std::sqrt(eps * (1.0 - eps) / n)},
            {"halting_histogram", hist}};
  json diag = {{"eps_tilde", eps},
               {"eps_max", em.estimate},
               {"eps_max_upper", em.upper},
               {"eps_max_bins", kEpsMaxBins},
               {"eps_max_groups", em.groups}};
  json flags = json::array({"eps_max is a biased proxy for the hidden-state maximum"});
  std::vector<std::size_t> obs;
  for (std::size_t t = cfg.burn_in; t < chains[0].records.size(); ++t) obs.push_back(chains[0].records[t].trajectory[1].o);
  if (obs.size() >= 1000) {
    const CoarseRetention cr = coarse_retention_from_trace(obs, obs_size);
    diag["omega_bar"] = cr.omega_bar;
    diag["omega_bar_se"] = cr.se;
    const double denom = bound_denominator(cr.omega_bar, em.estimate);
    diag["bound_denominator"] = denom;
    if (cr.omega_bar < 1.0) diag["n_mix_bound"] = n_mix_bound(cr.omega_bar);
    if (!(denom > 0.0)) flags.push_back("trace-distance bound is vacuous: denominator clipped at 0");
    if (!cr.excluded.empty()) flags.push_back("unobserved observation classes excluded from omega_bar");
    if (eps > 0.0 && eps < 1.0 && cr.omega_bar < 1.0 && cfg.sigma > 0.0) {
      const double beta = config_beta(cfg).value();
      diag["t_mix"] = {{"value", t_mix(CostModelInputs(cr.omega_bar, eps, beta, cfg.sigma))}, {"tag", "model"}};
      if (beta > 0.0) diag["sigma_opt"] = {{"value", sigma_opt(beta, eps).sigma}, {"tag", "model"}};
    }
  } else {
    flags.push_back("trace shorter than 1000 updates: omega_bar not estimated");
  }
  diag["flags"] = flags;
  s["diagnostics"] = diag;
  return s;
}

void imprecise_run(const ExperimentConfig& cfg, const std::string& hash, RunOutputs& out) {
  const ImpreciseModel model(config_energies(cfg), config_classical_spam(cfg));
  const InverseTemperature beta = config_beta(cfg);
  const ImpreciseConfig icfg(cfg.sigma, cfg.n_max, config_driver(cfg, model.spam.obs_size()), beta);
  const std::vector<double> f = config_observable(cfg, model.spam.obs_size());
  const Distribution p = thermal_distribution(model.energy, beta);
  const std::size_t total = cfg.burn_in + cfg.steps;
  std::vector<ChainRecords> chains(cfg.chains);
  parallel_for(cfg.chains, [&](std::size_t c) {
    RandomStream rng(cfg.seed, c, "imprecise");
    std::size_t a = thermal_start(p, cfg, c);
    for (std::size_t t = 0; t < total; ++t) {
      UpdateRecord r = imh_step(model, icfg, a, rng);
      a = r.final_state;
      chains[c].hidden.push_back(a);
      chains[c].records.push_back(std::move(r));
    }
  });
  for (std::size_t c = 0; c < cfg.chains; ++c)
    out.files.emplace_back(chain_file("trace", c, ".jsonl"), trajectory_jsonl(cfg, hash, c, chains[c], false));
  const double pad = 6.0 * cfg.sigma + 1e-9;
  json s = chain_statistics(cfg, chains, f, model.energy.min() - pad, model.energy.max() + pad, model.spam.obs_size());
  const EstimatorOracle o = estimator_oracle(model, p, cfg.sigma, [&](std::size_t i) { return f[i]; });
  s["oracle"] = {{"mu_f", o.mu_f}, {"mu_omega", o.mu_omega}, {"var_f", o.var_f}, {"var_omega", o.var_omega}};
  if (cfg.oracle_mode) {
    std::vector<double> freq(model.size(), 0.0);
    double n = 0.0;
    for (const auto& c : chains)
      for (std::size_t t = cfg.burn_in; t < c.hidden.size(); ++t) {
        freq[c.hidden[t]] += 1.0;
        n += 1.0;
      }
    for (double& v : freq) v /= n;
    s["oracle"]["hidden_frequencies"] = freq;
    s["oracle"]["thermal_distribution"] = p.probs();
  }
  out.summary["imprecise"] = s;
}

void quantum_run(const ExperimentConfig& cfg, const std::string& hash, RunOutputs& out) {
  const auto [ham, spam] = config_quantum(cfg);
  const InverseTemperature beta = config_beta(cfg);
  const ImpreciseConfig icfg(cfg.sigma, cfg.n_max, config_driver(cfg, spam.obs_size()), beta);
  const std::vector<double> f = config_observable(cfg, spam.obs_size());
  const Distribution p = thermal_distribution(ham.energy, beta);
  const std::size_t d = ham.dim();
  const std::size_t total = cfg.burn_in + cfg.steps;
  std::vector<ChainRecords> chains(cfg.chains);
  parallel_for(cfg.chains, [&](std::size_t c) {
    RandomStream rng(cfg.seed, c, "quantum");
    QuantumState psi = QuantumState::basis(d, thermal_start(p, cfg, c));
    for (std::size_t t = 0; t < total; ++t) {
      auto [r, next] = qmh_step(psi, ham, spam, icfg, rng);
      psi = std::move(next);
      chains[c].fidelity.push_back(state_fidelity(psi));
      chains[c].records.push_back(std::move(r));
    }
  });
  for (std::size_t c = 0; c < cfg.chains; ++c)
    out.files.emplace_back(chain_file("trace", c, ".jsonl"), trajectory_jsonl(cfg, hash, c, chains[c], true));
  const double pad = 6.0 * cfg.sigma + 1e-9;
  json s = chain_statistics(cfg, chains, f, ham.energy.min() - pad, ham.energy.max() + pad, spam.obs_size());
  const CMatrix rho = thermal_density(ham.energy, beta).matrix();
  CMatrix fop = CMatrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < spam.obs_size(); ++i) fop += f[i] * spam.k_o(i).adjoint() * spam.k_o(i);
  double mu_omega = 0.0;
  for (std::size_t a = 0; a < d; ++a) mu_omega += p[a] * ham.energy[a];
  s["oracle"] = {{"tr_F_rho", (fop * rho).trace().real()}, {"tr_H_rho", mu_omega}};
  s["diagnostics"]["flags"].push_back("omega_bar from quantum observations is a biased estimate");
  out.summary["quantum"] = s;
}

// ----------------------------------------------------------------- halting

void halting_run(const ExperimentConfig& cfg, const std::string& hash, RunOutputs& out) {
  const HaltingParams hp(cfg.halting_delta, cfg.halting_n_max);
  const HaltingTable tab = halting_table(hp, cfg.halting_n_limit);
  const HaltingSample sim = simulate_halting(hp, cfg.halting_runs, cfg.seed);
  std::ostringstream os;
  os << "# qmhlab halting table config_sha256=" << hash << " delta=" << format_double(cfg.halting_delta)
     << " runs=" << cfg.halting_runs << " n_max=" << cfg.halting_n_max << "\n";
  os << "n,p_halt,t_n,s_n,empirical_p,SE\n";
  double max_z = 0.0;
  for (std::size_t n = 1; n <= cfg.halting_n_limit; ++n) {
    os << n << ',' << format_double(tab.p_halt[n]) << ',' << format_double(tab.t[n]) << ',' << format_double(tab.s[n])
       << ',' << format_double(sim.p(n)) << ',' << format_double(sim.se(n)) << '\n';
    if (sim.se(n) > 0.0) max_z = std::max(max_z, std::abs(sim.p(n) - tab.p_halt[n]) / sim.se(n));
  }
  out.files.emplace_back("halting.csv", os.str());
  out.summary["halting"] = {{"delta", cfg.halting_delta},
                            {"runs", cfg.halting_runs},
                            {"n_limit", cfg.halting_n_limit},
                            {"n_max", cfg.halting_n_max},
                            {"p_halt_1_closed_form", boost::math::erfc(0.5 * std::sqrt(cfg.halting_delta))},
                            {"p_halt_1_analytic", tab.p_halt[1]},
                            {"p_halt_1_empirical", sim.p(1)},
                            {"p_halt_1_se", sim.se(1)},
                            {"max_abs_z", max_z},
                            {"truncation_empirical", sim.truncation()},
                            {"quadrature_max_error", tab.max_error}};
}

// -------------------------------------------------------------------- cost

void cost_run(const ExperimentConfig& cfg, RunOutputs& out) {
  const json& k = cfg.raw.at("cost");
  const double sigma0 = k.contains("sigma0") ? k.at("sigma0").get<double>() : 0.0;
  const CostModelInputs in(k.at("omega_tilde").get<double>(), k.at("eps_tilde").get<double>(),
                           k.at("beta").get<double>(), k.at("sigma").get<double>(), sigma0);
  const SigmaChoice so = sigma_opt(in.beta, in.eps_tilde);
  const CostAccuracy ca = cost_accuracy_model(in.beta, in.sigma, in.eps_tilde);
  json flags = json::array();
  if (!ca.in_regime) flags.push_back("eps_tilde < beta sigma < 1 does not hold: cost-accuracy model outside its regime");
  json s = {{"tag", "model"},
            {"n_mix_bound", n_mix_bound(in.omega_tilde)},
            {"t_mix", t_mix(in)},
            {"sigma_opt", so.sigma},
            {"t_max", so.t_max},
            {"t_mix_minimized", t_mix_minimized(in.beta, in.eps_tilde, in.omega_tilde, in.sigma0)},
            {"n_halt_model", ca.n_halt},
            {"flags", flags}};
  if (k.contains("n_max")) {
    const double nm = k.at("n_max").get<double>();
    s["eps_tilde_of_n_max"] = eps_tilde_model(in.beta * in.sigma, nm);
    s["n_halt_of_n_max"] = n_halt_model(in.beta * in.sigma, nm);
  }
  out.summary["cost"] = s;
}

// ------------------------------------------------------------------ verify

struct CheckResult {
  std::string name;
  std::size_t instances = 0;
  std::size_t skipped = 0;
  double worst = 0.0;
  double tolerance = 0.0;
  bool has_mutation = false;
  double mutation_worst = 0.0;
  double mutation_threshold = 0.0;

  bool pass(bool mutation) const {
    const bool ok = worst <= tolerance;
    return mutation && has_mutation ? ok && mutation_worst > mutation_threshold : ok;
  }
};

// Moves delta of mass within the row of the most probable state, so the
// violation is at least delta / |S| whatever the model.
StochasticKernel perturbed(const StochasticKernel& k, const Distribution& p, double delta) {
  RowMatrix m = k.matrix();
  const Eigen::Index n = m.rows();
  Eigen::Index a = 0;
  for (Eigen::Index s = 1; s < n; ++s)
    if (p[static_cast<std::size_t>(s)] > p[static_cast<std::size_t>(a)]) a = s;
  Eigen::Index from = 0;
  m.row(a).maxCoeff(&from);
  const Eigen::Index to = (from + 1) % n;
  const double take = std::min(delta, m(a, from));
  m(a, from) -= take;
  m(a, to) += take;
  return StochasticKernel(std::move(m));
}

CheckResult check_balance(const ExperimentConfig& cfg, RandomStream& rng, bool mutation) {
  CheckResult r{"balance"};
  r.tolerance = 1e-12;
  r.has_mutation = true;
  r.mutation_threshold = 1e-6;
  std::vector<MhModel> models;
  if (cfg.has_model() && cfg.mode != Mode::quantum) {
    try {
      models.push_back(config_mh_model(cfg));
    } catch (const ValidationError&) {
    }
  }
  for (std::size_t t = 0; t < cfg.instances; ++t) models.push_back(random_mh_model(rng));
  for (const auto& m : models) {
    const Distribution p = thermal_distribution(m.energy, m.beta);
    const StochasticKernel k = build_pm_kernel(m);
    const BalanceReport b = check_detailed_balance(k, p);
    r.worst = std::max({r.worst, b.max_violation, b.stationarity_l1});
    ++r.instances;
    if (mutation) {
      const BalanceReport bm = check_detailed_balance(perturbed(k, p, 1e-3), p);
      r.mutation_worst = r.instances == 1 ? bm.max_violation : std::min(r.mutation_worst, bm.max_violation);
    }
  }
  return r;
}

CheckResult check_rejection(const ExperimentConfig& cfg, RandomStream& rng) {
  CheckResult r{"rejection_identity"};
  r.tolerance = 1e-12;
  for (std::size_t t = 0; t < cfg.instances; ++t) {
    const MhModel m = random_mh_model(rng);
    const RejectionReport rr = rejection_rate(m);
    r.worst = std::max({r.worst, std::abs(rr.lambda - rr.lambda_tv), std::max(0.0, rr.trial_tv - rr.lambda)});
    ++r.instances;
  }
  return r;
}

CheckResult check_acceptance(const ExperimentConfig& cfg, RandomStream& rng) {
  CheckResult r{"acceptance_equivalence"};
  r.tolerance = 1e-12;
  // Random trajectories often could not have occurred (min x_r <= 0); draw
  // until enough valid ones are found.
  for (std::size_t t = 0; t < 50 * cfg.instances && r.instances < cfg.instances; ++t) {
    const std::size_t k = 2 + static_cast<std::size_t>(rng.uniform() * 3.0);
    const StochasticKernel drv = random_kernel(k, rng);
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 6.0);
    const Trajectory g = random_trajectory(n, k, rng);
    const double beta = 2.0 * rng.uniform();
    const double sigma = rng.uniform();
    try {
      const double a = accept_explicit(g, drv, beta, sigma);
      const double b = accept_recursive(g, drv, beta, sigma);
      r.worst = std::max(r.worst, std::abs(a - b));
      ++r.instances;
    } catch (const ImpossibleEvent&) {
      ++r.skipped;
    }
  }
  if (r.instances < cfg.instances) r.worst = std::numeric_limits<double>::infinity();
  return r;
}

CheckResult check_branch_balance(const ExperimentConfig& cfg, RandomStream& rng, bool mutation) {
  CheckResult r{"branch_balance"};
  r.tolerance = 1e-12;
  r.has_mutation = true;
  r.mutation_threshold = 1e-6;
  for (std::size_t t = 0; t < cfg.instances; ++t) {
    const std::size_t k = 2 + static_cast<std::size_t>(rng.uniform() * 3.0);
    const StochasticKernel drv = random_kernel(k, rng);
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 5.0);
    const Trajectory g = random_trajectory(n, k, rng);
    const double beta = 0.2 + 1.8 * rng.uniform();
    const double sigma = 0.1 + rng.uniform();
    const BranchBalance b = branch_balance_check(g, drv, beta, sigma);
    if (b.impossible) {
      ++r.skipped;
      continue;
    }
    r.worst = std::max(r.worst, b.violation);
    ++r.instances;
    if (mutation) {
      const BranchBalance bm = branch_balance_check(g, drv, beta, sigma, false);
      if (!bm.impossible) r.mutation_worst = std::max(r.mutation_worst, bm.violation);
    }
  }
  return r;
}

CheckResult check_gaussian(const ExperimentConfig& cfg, RandomStream& rng) {
  CheckResult r{"gaussian_identity"};
  r.tolerance = 1e-10;
  const std::size_t count = std::min<std::size_t>(cfg.instances, 100);
  for (std::size_t t = 0; t < count; ++t) {
    const double e = 2.0 * rng.uniform() - 1.0;
    const double beta = 2.0 * rng.uniform();
    const double sigma = 0.05 + rng.uniform();
    const double a = rng.uniform();
    const double b = 3.0 * rng.uniform();
    const GaussianIdentity g =
        gaussian_identity_check(e, beta, sigma, [&](double w) { return a + std::sin(b * w) + 0.1 * w * w; });
    r.worst = std::max(r.worst, g.violation);
    ++r.instances;
  }
  return r;
}

std::vector<std::pair<DiagonalHamiltonian, QuantumSpamModel>> quantum_instances(const ExperimentConfig& cfg,
                                                                               RandomStream& rng) {
  std::vector<std::pair<DiagonalHamiltonian, QuantumSpamModel>> out;
  if (cfg.has_model() && (cfg.raw.contains("spam") || cfg.mode == Mode::quantum) && cfg.sigma > 0.0) {
    try {
      out.push_back(config_quantum(cfg));
    } catch (const ValidationError&) {
    }
  }
  const std::size_t count = std::min<std::size_t>(cfg.instances, 60);
  for (std::size_t t = 0; t < count; ++t) {
    const std::size_t d = 2 * (1 + t % 3);
    const std::size_t k = (t / 3) % 2 == 0 ? 2 : d;
    const std::size_t j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(k));
    const CMatrix basis = random_unitary(d, rng);
    out.emplace_back(DiagonalHamiltonian(random_energies(d, rng, 1.0), 0.1 + 0.5 * rng.uniform()),
                     typical_spam_builder(basis, j, k));
  }
  return out;
}

CheckResult check_quantum_spam(const ExperimentConfig& cfg, RandomStream& rng, bool mutation) {
  CheckResult r{"quantum_spam"};
  r.tolerance = 1e-10;
  r.has_mutation = true;
  r.mutation_threshold = 1e-10;
  bool first = true;
  for (const auto& [ham, spam] : quantum_instances(cfg, rng)) {
    r.worst = std::max(r.worst, spam_invariants(spam).worst());
    ++r.instances;
    if (mutation) {
      const double m = spam_invariants(spam.with_perturbed_control(0, 0, 0, 1e-4)).worst();
      r.mutation_worst = first ? m : std::min(r.mutation_worst, m);
      first = false;
    }
  }
  return r;
}

CheckResult check_quantum_balance(const ExperimentConfig& cfg, RandomStream& rng, bool mutation) {
  CheckResult r{"quantum_balance"};
  r.tolerance = 1e-10;
  r.has_mutation = true;
  r.mutation_threshold = 1e-10;
  for (const auto& [ham, spam] : quantum_instances(cfg, rng)) {
    const std::size_t k = spam.obs_size();
    const StochasticKernel drv = random_kernel(k, rng);
    const double beta = 0.2 + 1.8 * rng.uniform();
    for (int rep = 0; rep < 5; ++rep) {
      const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 3.0);
      const Trajectory g = random_trajectory(n, k, rng, 1.0);
      const QuantumBalance b = quantum_balance_check(g, ham, spam, drv, beta);
      if (b.impossible) {
        ++r.skipped;
        continue;
      }
      r.worst = std::max(r.worst, b.violation);
      ++r.instances;
      if (mutation && k > 1) {
        // Perturb a control the trajectory actually applies.
        const std::size_t o = g[0].o;
        const QuantumSpamModel bad = spam.with_perturbed_control(o, 0, 1, 1e-4);
        const QuantumBalance bm = quantum_balance_check(g, ham, bad, drv, beta);
        if (!bm.impossible) r.mutation_worst = std::max(r.mutation_worst, bm.violation);
      }
    }
  }
  return r;
}

}  // namespace

json verify_suite(const ExperimentConfig& cfg) {
  std::vector<CheckResult> results;
  for (std::size_t idx = 0; idx < cfg.checks.size(); ++idx) {
    const std::string& name = cfg.checks[idx];
    RandomStream rng(cfg.seed, idx, "verify:" + name);
    if (name == "balance")
      results.push_back(check_balance(cfg, rng, cfg.mutation));
    else if (name == "rejection_identity")
      results.push_back(check_rejection(cfg, rng));
    else if (name == "acceptance_equivalence")
      results.push_back(check_acceptance(cfg, rng));
    else if (name == "branch_balance")
      results.push_back(check_branch_balance(cfg, rng, cfg.mutation));
    else if (name == "gaussian_identity")
      results.push_back(check_gaussian(cfg, rng));
    else if (name == "quantum_spam")
      results.push_back(check_quantum_spam(cfg, rng, cfg.mutation));
    else if (name == "quantum_balance")
      results.push_back(check_quantum_balance(cfg, rng, cfg.mutation));
    else
      throw ValidationError("config .verify.checks: unknown check \"" + name + "\"");
  }
  json checks = json::array();
  bool all = true;
  for (const auto& r : results) {
    const bool ok = r.pass(cfg.mutation);
    all = all && ok;
    json e = {{"name", r.name},   {"instances", r.instances}, {"skipped_impossible", r.skipped},
              {"worst", r.worst}, {"tolerance", r.tolerance}, {"pass", ok}};
    if (cfg.mutation && r.has_mutation)
      e["mutation"] = {{"weakest_detection", r.mutation_worst},
                       {"threshold", r.mutation_threshold},
                       {"detected", r.mutation_worst > r.mutation_threshold}};
    checks.push_back(e);
  }
  return {{"checks", checks}, {"all_pass", all}, {"mutation", cfg.mutation}};
}

RunOutputs compute_run(const ExperimentConfig& cfg) {
  RunOutputs out;
  const std::string hash = config_hash(cfg);
  out.summary = {{"mode", mode_name(cfg.mode)}, {"seed", cfg.seed}, {"config_sha256", hash}};
  switch (cfg.mode) {
    case Mode::classical: classical_run(cfg, hash, out); break;
    case Mode::imprecise: imprecise_run(cfg, hash, out); break;
    case Mode::quantum: quantum_run(cfg, hash, out); break;
    case Mode::halting: halting_run(cfg, hash, out); break;
    case Mode::cost: cost_run(cfg, out); break;
    case Mode::verify: {
      out.summary["verify"] = verify_suite(cfg);
      if (!out.summary["verify"]["all_pass"].get<bool>()) out.exit_code = kExitVerificationFailure;
      break;
    }
  }
  return out;
}

namespace {

std::string dump_json(const json& j) {
  // Doubles go through format_double so every file uses the same format.
  std::function<std::string(const json&, int)> rec = [&](const json& v, int depth) -> std::string {
    const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
    const std::string end_pad(static_cast<std::size_t>(2 * depth), ' ');
    if (v.is_number_float()) return format_double(v.get<double>());
    if (v.is_object()) {
      if (v.empty()) return "{}";
      std::string s = "{\n";
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) s += ",\n";
        first = false;
        s += pad + json(it.key()).dump() + ": " + rec(it.value(), depth + 1);
      }
      return s + "\n" + end_pad + "}";
    }
    if (v.is_array()) {
      if (v.empty()) return "[]";
      bool flat = std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_primitive(); });
      std::string s = flat ? "[" : "[\n";
      for (std::size_t k = 0; k < v.size(); ++k) {
        if (k) s += flat ? ", " : ",\n";
        s += (flat ? "" : pad) + rec(v[k], depth + 1);
      }
      return s + (flat ? "]" : "\n" + end_pad + "]");
    }
    return v.dump();
  };
  return rec(j, 0) + "\n";
}

}  // namespace

void write_outputs(const ExperimentConfig& cfg, const RunOutputs& out, const fs::path& dir) {
  const std::string hash = config_hash(cfg);
  bool created = false;
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw ValidationError("output path exists and is not a directory: " + dir.string());
    const fs::path manifest = dir / "manifest.json";
    if (fs::exists(manifest)) {
      std::ifstream in(manifest);
      json m;
      try {
        in >> m;
      } catch (const json::exception&) {
        throw ValidationError("refusing output directory with an unreadable manifest: " + dir.string());
      }
      if (m.value("config_sha256", std::string()) != hash)
        throw ValidationError("refusing output directory holding results of a different config: " + dir.string());
    } else if (!fs::is_empty(dir)) {
      throw ValidationError("refusing non-empty output directory without a manifest: " + dir.string());
    }
  } else {
    fs::create_directories(dir);
    created = true;
  }
  std::vector<fs::path> written;
  try {
    json files = json::object();
    auto put = [&](const std::string& name, const std::string& content) {
      const fs::path p = dir / name;
      std::ofstream os(p, std::ios::binary | std::ios::trunc);
      written.push_back(p);
      os << content;
      os.close();
      if (!os) throw std::runtime_error("failed to write " + p.string());
      files[name] = sha256_hex(content);
    };
    for (const auto& [name, content] : out.files) put(name, content);
    put("summary.json", dump_json(out.summary));
    const json manifest = {{"config_sha256", hash},
                           {"code_version", QMHLAB_VERSION},
                           {"mode", mode_name(cfg.mode)},
                           {"config", cfg.raw},
                           {"files", files}};
    put("manifest.json", dump_json(manifest));
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    if (created) fs::remove(dir, ec);
    throw;
  }
}

int run(const ExperimentConfig& cfg, const fs::path& dir) {
  const RunOutputs out = compute_run(cfg);
  write_outputs(cfg, out, dir);
  return out.exit_code;
}

}  // namespace qmh
