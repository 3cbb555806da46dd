// Acceptance runner: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <json.hpp>

#include "qmhlab/acceptance.hpp"
#include "qmhlab/branch_integration.hpp"
#include "qmhlab/classical_mh.hpp"
#include "qmhlab/diagnostics.hpp"
#include "qmhlab/errors.hpp"
#include "qmhlab/halting.hpp"
#include "qmhlab/harness.hpp"
#include "qmhlab/imprecise_mh.hpp"
#include "qmhlab/quantum.hpp"
#include "qmhlab/random_instances.hpp"

namespace fs = std::filesystem;
using namespace qmh;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

struct Criterion {
  int id;
  std::string title;
  double time_limit;  // seconds; 0 when the criterion states none
  std::function<void(Outcome&)> body;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// ------------------------------------------------------------ 1 to 3

void detailed_balance(Outcome& o) {
  RandomStream rng(101, 0, "acceptance:balance");
  double worst = 0.0, worst_l1 = 0.0;
  for (int t = 0; t < 100; ++t) {
    const MhModel m = random_mh_model(rng, 8);
    const BalanceReport r = check_detailed_balance(build_pm_kernel(m), thermal_distribution(m.energy, m.beta));
    worst = std::max(worst, r.max_violation);
    worst_l1 = std::max(worst_l1, r.stationarity_l1);
  }
  o.detail << "100 models, max balance violation " << sci(worst) << ", max stationarity L1 " << sci(worst_l1);
  o.require(worst <= 1e-12, "balance <= 1e-12");
  o.require(worst_l1 <= 1e-12, "stationarity <= 1e-12");
}

void rejection_identity(Outcome& o) {
  RandomStream rng(101, 0, "acceptance:balance");
  double worst = 0.0, worst_try = -INFINITY;
  for (int t = 0; t < 100; ++t) {
    const RejectionReport r = rejection_rate(random_mh_model(rng, 8));
    worst = std::max(worst, std::abs(r.lambda - r.lambda_tv));
    worst_try = std::max(worst_try, r.trial_tv - r.lambda);
  }
  o.detail << "max |Lambda - Lambda_tv| " << sci(worst) << ", max TV(p_try, p) - Lambda " << sci(worst_try);
  o.require(worst <= 1e-12, "identity within 1e-12");
  o.require(worst_try <= 1e-12, "TV(p_try, p) <= Lambda");
}

void example_family(Outcome& o) {
  const Distribution p({0.1, 0.2, 0.3, 0.4});
  const double grid[5] = {0.0, 0.2, 0.4, 0.6, 0.8};
  double worst = 0.0;
  for (double lam : grid)
    for (double om : grid) {
      const ExampleFamily f = example_family_kernel(p, lam, om);
      worst = std::max(worst, std::abs(retention_rate(f.pm_kernel) - (1.0 - (1.0 - om) * (1.0 - lam))));
      worst = std::max(worst, std::abs(f.predicted_retention - (1.0 - (1.0 - om) * (1.0 - lam))));
    }
  o.detail << "5x5 grid, max |Omega'_M - (1 - (1 - Omega')(1 - Lambda'))| " << sci(worst);
  o.require(worst <= 1e-12, "within 1e-12");
}

// ------------------------------------------------------------ 4 and 5

void acceptance_equivalence(Outcome& o) {
  RandomStream rng(104, 0, "acceptance:equivalence");
  double worst = 0.0;
  std::size_t valid = 0, impossible = 0;
  while (valid < 10000) {
    const std::size_t k = 2 + static_cast<std::size_t>(rng.uniform() * 4.0);
    const StochasticKernel p = random_kernel(k, rng);
    const Trajectory g = random_trajectory(1 + static_cast<std::size_t>(rng.uniform() * 6.0), k, rng);
    const double beta = 2.0 * rng.uniform(), sigma = rng.uniform();
    try {
      const double a = accept_explicit(g, p, beta, sigma);
      worst = std::max(worst, std::abs(accept_recursive(g, p, beta, sigma) - a));
      ++valid;
    } catch (const ImpossibleEvent&) {
      ++impossible;
    }
  }
  double aux = 0.0;
  for (int t = 0; t < 10000; ++t) {
    std::vector<double> xs(1 + static_cast<std::size_t>(rng.uniform() * 6.0));
    for (double& v : xs) v = 2.0 * rng.uniform() - 1.0;
    aux = std::max(aux, std::abs(minmax_identity_residual(xs, 2.0 * rng.uniform() - 1.0)));
    std::vector<double> b(2 + static_cast<std::size_t>(rng.uniform() * 6.0));
    for (double& v : b) v = 2.0 * rng.uniform() - 1.0;
    aux = std::max(aux, std::abs(partial_sum_identity_residual(b)));
  }
  o.detail << valid << " trajectories (" << impossible << " impossible skipped), max |explicit - recursive| "
           << sci(worst) << "; identities max residual " << sci(aux);
  o.require(worst <= 1e-12, "equivalence within 1e-12");
  o.require(aux <= 1e-14, "identities within 1e-14");
}

void branch_balance(Outcome& o) {
  RandomStream rng(105, 0, "acceptance:branch");
  double worst = 0.0, mutated = 0.0;
  std::size_t valid = 0;
  while (valid < 10000) {
    const std::size_t k = 2 + static_cast<std::size_t>(rng.uniform() * 4.0);
    const StochasticKernel p = random_kernel(k, rng);
    const Trajectory g = random_trajectory(1 + static_cast<std::size_t>(rng.uniform() * 5.0), k, rng);
    const double beta = 0.2 + 1.8 * rng.uniform(), sigma = 0.1 + rng.uniform();
    const BranchBalance b = branch_balance_check(g, p, beta, sigma);
    if (b.impossible) continue;
    ++valid;
    worst = std::max(worst, b.violation);
    mutated = std::max(mutated, branch_balance_check(g, p, beta, sigma, false).violation);
  }
  o.detail << valid << " trajectories, max violation " << sci(worst) << ", mutation max violation " << sci(mutated);
  o.require(worst < 1e-12, "violation < 1e-12");
  o.require(mutated > 1e-6, "mutation detected");
}

// ------------------------------------------------------------ 6 and 7

void classical_limit(Outcome& o) {
  const EnergyTable e({0.0, 0.6, 1.3});
  RandomStream krng(106, 0, "acceptance:driver");
  const StochasticKernel drv = random_kernel(3, krng);
  const InverseTemperature beta(1.0);
  const ImpreciseModel model(e, ClassicalSpamModel::direct_access(3));
  const ImpreciseConfig cfg(0.0, 4, drv, beta);
  const StochasticKernel pm = build_pm_kernel(MhModel(StateSpace(3), e, beta, drv));
  double min_p = 1.0;
  for (std::size_t a = 0; a < 3; ++a) {
    RandomStream rng(106, a, "acceptance:classical-limit");
    std::vector<std::uint64_t> counts(3, 0);
    for (int t = 0; t < 100000; ++t) ++counts[imh_step(model, cfg, a, rng).final_state];
    const auto row = pm.row(a);
    min_p = std::min(min_p, chi_squared_test(counts, std::vector<double>(row.begin(), row.end())).p_value);
  }
  o.detail << "3 start states x 1e5 runs, min chi-squared p-value " << sci(min_p);
  o.require(min_p > 0.001, "p > 0.001");
}

void halting(Outcome& o) {
  double worst_z = 0.0, worst_p1 = 0.0, worst_s2 = 0.0;
  bool exact = true;
  for (double delta : {0.25, 1.0, 4.0}) {
    const HaltingParams hp(delta, 1000);
    const HaltingTable tab = halting_table(hp, 20);
    const HaltingSample sim = simulate_halting(hp, 1000000, 107);
    for (std::size_t n = 1; n <= 20; ++n) {
      const double se = std::sqrt(tab.p_halt[n] * (1.0 - tab.p_halt[n]) / 1e6);
      worst_z = std::max(worst_z, std::abs(sim.p(n) - tab.p_halt[n]) / se);
    }
    const double closed = boost::math::erfc(0.5 * std::sqrt(delta));
    worst_p1 = std::max(worst_p1, std::abs(sim.p(1) - closed) / sim.se(1));
    exact = exact && analytic_s(hp, 0) == 0.0 && analytic_s(hp, 1) == 1.0;
    worst_s2 = std::max(worst_s2, std::abs(analytic_s(hp, 2) - (2.0 - closed)));
  }
  double slack = INFINITY;
  std::size_t points = 0;
  for (const BoundCheck& c : bound_suite({0.25, 1.0, 4.0}, {4, 16, 64, 256})) {
    slack = std::min(slack, c.worst_slack);
    points += c.points;
  }
  o.detail << "max |z| over n <= 20 " << sci(worst_z) << ", p_halt(1) |z| " << sci(worst_p1) << ", s_2 error "
           << sci(worst_s2) << ", bound slack " << sci(slack) << " over " << points << " points";
  o.require(worst_z < 4.0, "table within 4 SE");
  o.require(worst_p1 < 4.0, "p_halt(1) within 4 SE");
  o.require(exact, "s_0 = 0 and s_1 = 1 exactly");
  o.require(worst_s2 <= 1e-8, "s_2 within 1e-8");
  o.require(slack >= 0.0, "bounds hold");
}

// ------------------------------------------------------------ 8 to 10

void quantum_balance(Outcome& o) {
  RandomStream rng(108, 0, "acceptance:quantum-balance");
  double worst = 0.0, worst_spam = 0.0;
  std::size_t tested = 0;
  while (tested < 1000) {
    const std::size_t d = 2 * (1 + tested % 3);
    const std::size_t k = tested % 2 == 0 ? 2 : d;
    const QuantumSpamModel spam = typical_spam_builder(random_unitary(d, rng), tested % k, k);
    worst_spam = std::max(worst_spam, spam_invariants(spam).worst());
    const DiagonalHamiltonian ham(random_energies(d, rng, 1.0), 0.1 + 0.5 * rng.uniform());
    const StochasticKernel drv = random_kernel(k, rng);
    const Trajectory g = random_trajectory(1 + static_cast<std::size_t>(rng.uniform() * 3.0), k, rng, 1.0);
    const QuantumBalance b = quantum_balance_check(g, ham, spam, drv, 0.2 + 1.8 * rng.uniform());
    if (b.impossible) continue;
    ++tested;
    worst = std::max(worst, b.violation);
  }
  o.detail << "1000 trajectories, max violation " << sci(worst) << ", max SPAM invariant deviation "
           << sci(worst_spam);
  o.require(worst < 1e-10, "balance < 1e-10");
  o.require(worst_spam < 1e-10, "SPAM invariants < 1e-10");
}

void quantum_thermal(Outcome& o) {
  RandomStream rng(109, 0, "acceptance:quantum-thermal");
  const EnergyTable e({0.0, 0.5, 1.0, 1.5});
  const DiagonalHamiltonian ham(e, 0.2);
  const QuantumSpamModel spam = typical_spam_builder(random_unitary(4, rng), 0, 2);
  const ImpreciseConfig cfg(0.2, 30, StochasticKernel::uniform(2), InverseTemperature(1.0));
  const Distribution p = thermal_distribution(e, cfg.beta);
  const CMatrix rho = thermal_density(e, cfg.beta).matrix();
  const double tr_h = (e.values()[0] * p[0] + e.values()[1] * p[1] + e.values()[2] * p[2] + e.values()[3] * p[3]);
  const double tr_f = (spam.k_o(1).adjoint() * spam.k_o(1) * rho).trace().real();  // f(i) = i

  QuantumState psi = QuantumState::basis(4, sample(p, rng));
  std::vector<UpdateRecord> post;
  std::vector<double> om, fo;
  std::vector<std::size_t> obs;
  std::size_t truncated = 0;
  for (int t = 0; t < 101000; ++t) {
    auto [rec, next] = qmh_step(psi, ham, spam, cfg, rng);
    psi = std::move(next);
    if (t < 1000) continue;
    om.push_back(rec.trajectory[0].omega);
    fo.push_back(static_cast<double>(rec.trajectory[1].o));
    obs.push_back(rec.trajectory[1].o);
    if (rec.truncated) ++truncated;
    post.push_back(std::move(rec));
  }
  const MeanEstimate mo = estimate_mean(om);
  const MeanEstimate mf = estimate_mean(fo);
  const double eps = static_cast<double>(truncated) / static_cast<double>(post.size());
  std::vector<TruncationGroup> groups;
  for (const auto& [key, g] : group_truncations(post, e.min() - 1.2, e.max() + 1.2)) groups.push_back(g);
  const EpsMaxEstimate em = epsilon_max_estimate(groups);
  const CoarseRetention cr = coarse_retention_from_trace(obs, 2);
  const double denom = bound_denominator(cr.omega_bar, em.estimate);
  const double zo = (mo.mean - tr_h) / mo.se_batch;
  const double zf = (mf.mean - tr_f) / mf.se_batch;
  o.detail << "1e5 updates, omega_0 " << sci(mo.mean) << " vs tr(H rho) " << sci(tr_h) << " (z " << sci(zo)
           << "), f(o_1) " << sci(mf.mean) << " vs tr(F rho) " << sci(tr_f) << " (z " << sci(zf) << "), eps_tilde "
           << sci(eps) << ", Omega_bar " << sci(cr.omega_bar) << ", eps_max " << sci(em.estimate)
           << ", denominator " << sci(denom);
  o.require(std::abs(zo) < 4.0, "omega_0 within 4 SE");
  o.require(std::abs(zf) < 4.0, "f(o_1) within 4 SE");
  o.require(denom > 0.0, "bound non-vacuous");
}

void quantum_classical(Outcome& o) {
  const EnergyTable e({0.0, 0.4, 1.1});
  const DiagonalHamiltonian ham(e, 0.3);
  const QuantumSpamModel qspam =
      typical_spam_builder(CMatrix::Identity(3, 3), 1, 3);
  const ImpreciseModel model(e, classical_limit_spam(qspam));
  RandomStream krng(110, 0, "acceptance:driver");
  const ImpreciseConfig cfg(0.3, 6, random_kernel(3, krng), InverseTemperature(1.0));
  double worst = 0.0;
  std::size_t cells = 0;
  for (std::size_t a = 0; a < 3; ++a) {
    RandomStream rq(110, a, "acceptance:quantum");
    RandomStream rc(110, a, "acceptance:classical");
    OutcomeHistogram hq, hc;
    for (int t = 0; t < 100000; ++t) {
      ++hq[outcome_key(qmh_step(QuantumState::basis(3, a), ham, qspam, cfg, rq).first)];
      ++hc[outcome_key(imh_step(model, cfg, a, rc))];
    }
    const HistogramComparison cmp = compare_histograms(hq, 100000, hc, 100000);
    worst = std::max(worst, cmp.max_z);
    cells += cmp.cells;
  }
  o.detail << "3 start states x 1e5 runs, " << cells << " (n, o-sequence) cells, max |z| " << sci(worst);
  o.require(worst < 4.0, "within 4 SE");
}

// ------------------------------------------------------------ 11 and 12

void exact_bounds(Outcome& o) {
  const EnergyTable e({0.0, 0.5});
  const ImpreciseModel model(e, ClassicalSpamModel::direct_access(2));
  double slack = INFINITY;
  for (std::size_t n_max : {1, 2, 3}) {
    const ImpreciseConfig cfg(0.3, n_max, StochasticKernel::uniform(2), InverseTemperature(1.0));
    const ExactErrorReport r = exact_error_bounds(model, cfg, [](std::size_t i) { return static_cast<double>(i); });
    const double s = std::min({r.bound_eps_tilde - r.tv, r.bound_eps - r.tv, r.bound_measurable - r.tv,
                               r.ev_bound_omega - std::abs(r.mu_omega_tilde - r.mu_omega)});
    o.detail << "n_max " << n_max << ": TV " << sci(r.tv) << ", slack " << sci(s) << "; ";
    slack = std::min(slack, s);
  }
  o.detail << "min slack " << sci(slack) << " (tolerance 1e-9)";
  o.require(slack >= -1e-9, "slack >= -1e-9");
}

int run_cli(const std::string& cli, const fs::path& cfg, const fs::path& out) {
  const std::string cmd = cli + " " + cfg.string() + " --out " + out.string() + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void reproducibility(Outcome& o, const std::string& cli, const fs::path& configs, const fs::path& scratch) {
  std::size_t n_configs = 0, n_files = 0;
  for (const auto& entry : fs::directory_iterator(configs)) {
    if (entry.path().extension() != ".json") continue;
    ++n_configs;
    const std::string stem = entry.path().stem().string();
    const fs::path a = scratch / (stem + "_a");
    const fs::path b = scratch / (stem + "_b");
    fs::remove_all(a);
    fs::remove_all(b);
    const int ra = run_cli(cli, entry.path(), a);
    const int rb = run_cli(cli, entry.path(), b);
    o.require(ra == 0 && rb == 0, stem + " exit codes " + std::to_string(ra) + "/" + std::to_string(rb));
    if (ra != 0 || rb != 0) continue;
    const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
    for (const auto& [name, digest] : manifest["files"].items()) {
      if (name == "summary.json") continue;
      ++n_files;
      o.require(sha256_hex(slurp(b / name)) == digest.get<std::string>(), stem + "/" + name + " differs");
    }
  }
  o.detail << n_configs << " bundled configs, " << n_files << " trace files compared by SHA-256";
  o.require(n_configs > 0 && n_files > 0, "something to compare");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qmhlab acceptance criteria"};
  std::string cli, configs, scratch;
  app.add_option("--cli", cli, "qmhlab executable")->required();
  app.add_option("--configs", configs, "directory of bundled configs")->required();
  app.add_option("--scratch", scratch, "scratch directory")->required();
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(scratch);

  const std::vector<Criterion> criteria{
      {1, "classical detailed balance", 10, detailed_balance},
      {2, "rejection-rate identity", 0, rejection_identity},
      {3, "example family retention", 0, example_family},
      {4, "explicit and recursive acceptance", 30, acceptance_equivalence},
      {5, "branch balance", 60, branch_balance},
      {6, "classical limit", 0, classical_limit},
      {7, "halting law", 300, halting},
      {8, "quantum balance", 120, quantum_balance},
      {9, "quantum thermal stability", 600, quantum_thermal},
      {10, "quantum to classical reduction", 0, quantum_classical},
      {11, "exact small-instance error bounds", 0, exact_bounds},
      {12, "reproducibility", 0, [&](Outcome& o) { reproducibility(o, cli, configs, scratch); }},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.body(o);
    } catch (const std::exception& ex) {
      o.require(false, std::string("exception: ") + ex.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.time_limit > 0.0) o.require(secs < c.time_limit, "runtime < " + sci(c.time_limit) + " s");
    if (!o.pass) ++failures;
    std::printf("%s criterion %2d (%s): %s; %.1f s\n", o.pass ? "PASS" : "FAIL", c.id, c.title.c_str(),
                o.detail.str().c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
