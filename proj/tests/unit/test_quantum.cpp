#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "qmhlab/diagnostics.hpp"
#include "qmhlab/errors.hpp"
#include "qmhlab/halting.hpp"
#include "qmhlab/imprecise_mh.hpp"
#include "qmhlab/quantum.hpp"
#include "qmhlab/random_instances.hpp"

using namespace qmh;

namespace {

QuantumState random_state(std::size_t d, RandomStream& rng) {
  CVector v(static_cast<Eigen::Index>(d));
  for (Eigen::Index a = 0; a < v.size(); ++a) {
    const double re = rng.normal();
    v(a) = cplx(re, rng.normal());
  }
  return QuantumState(v / v.norm());
}

CMatrix identity_basis(std::size_t d) { return CMatrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)); }

double energy_trace(const EnergyTable& e, const Distribution& p) {
  double s = 0.0;
  for (std::size_t a = 0; a < e.size(); ++a) s += p[a] * e[a];
  return s;
}

}  // namespace

TEST_CASE("state and density validation") {
  CHECK_THROWS_AS(QuantumState(CVector::Ones(3)), ValidationError);
  CHECK_THROWS_AS(QuantumState::basis(65, 0), ValidationError);
  CMatrix bad = CMatrix::Identity(2, 2) * 0.5;
  bad(0, 1) = 0.3;
  CHECK_THROWS_AS(DensityMatrix{bad}, ValidationError);
  CMatrix neg = CMatrix::Zero(2, 2);
  neg(0, 0) = 1.5;
  neg(1, 1) = -0.5;
  CHECK_THROWS_AS(DensityMatrix{neg}, ValidationError);
  CHECK_THROWS_AS(DensityMatrix{CMatrix::Identity(2, 2)}, ValidationError);
  CHECK_NOTHROW(DensityMatrix{CMatrix::Identity(2, 2) * 0.5});
  std::vector<CMatrix> ko{CMatrix::Identity(2, 2) * 0.9};
  std::vector<CMatrix> uc{CMatrix::Identity(2, 2)};
  CHECK_THROWS_AS(QuantumSpamModel(ko, uc), ValidationError);
}

TEST_CASE("trace distance") {
  RandomStream rng(1, 0, "td");
  const auto psi = random_state(3, rng);
  CHECK(trace_distance(DensityMatrix::pure(psi), DensityMatrix::pure(psi)) < 1e-14);
  CHECK(trace_distance(DensityMatrix::pure(QuantumState::basis(3, 0)), DensityMatrix::pure(QuantumState::basis(3, 2))) ==
        doctest::Approx(1.0).epsilon(1e-14));
  const Distribution p({0.5, 0.3, 0.2});
  const Distribution q({0.1, 0.6, 0.3});
  CHECK(trace_distance(DensityMatrix::diagonal(p), DensityMatrix::diagonal(q)) ==
        doctest::Approx(tv_distance(p, q)).epsilon(1e-14));
  CHECK_THROWS(trace_distance(CMatrix::Identity(2, 2), CMatrix::Identity(3, 3)));
}

TEST_CASE("energy measurement") {
  RandomStream rng(2, 0, "qpe");
  const DiagonalHamiltonian ham(EnergyTable({0.0, 1.0, 5.0}), 0.3);

  SUBCASE("eigenstate is preserved") {
    const auto psi = QuantumState::basis(3, 1);
    std::vector<double> om;
    for (int k = 0; k < 100000; ++k) {
      auto [omega, out] = qpe_measure(psi, ham, rng);
      if (k < 10) CHECK(state_fidelity(out) == doctest::Approx(1.0).epsilon(1e-14));
      om.push_back(omega);
    }
    const auto m = estimate_mean(om);
    CHECK(std::abs(m.mean - 1.0) < 4.0 * m.se_iid);
    CHECK(m.variance == doctest::Approx(0.09).epsilon(0.02));
  }

  SUBCASE("well-separated superposition collapses") {
    CVector v = CVector::Zero(3);
    v(0) = v(2) = std::sqrt(0.5);
    const QuantumState psi(v);
    std::vector<double> diffs;
    for (int k = 0; k < 20000; ++k) {
      auto [w1, s1] = qpe_measure(psi, ham, rng);
      CHECK(state_fidelity(s1) > 1.0 - 1e-9);
      auto [w2, s2] = qpe_measure(s1, ham, rng);
      diffs.push_back(w2 - w1);
    }
    const auto m = estimate_mean(diffs);
    CHECK(m.variance == doctest::Approx(2.0 * 0.09).epsilon(0.05));
  }

  SUBCASE("thermal mean energy") {
    const Distribution p = thermal_distribution(ham.energy, InverseTemperature(0.7));
    std::vector<double> om;
    for (int k = 0; k < 100000; ++k) om.push_back(qpe_measure(QuantumState::basis(3, sample(p, rng)), ham, rng).first);
    const auto m = estimate_mean(om);
    CHECK(std::abs(m.mean - energy_trace(ham.energy, p)) < 4.0 * m.se_iid);
  }

  CHECK_THROWS_AS(qpe_measure(QuantumState::basis(3, 0), DiagonalHamiltonian(EnergyTable({0.0, 1.0, 2.0}), 0.0), rng),
                  ValidationError);
}

TEST_CASE("POVM measurement") {
  RandomStream rng(3, 0, "povm");
  const auto spam = typical_spam_builder(random_unitary(4, rng), 1, 2);
  for (int t = 0; t < 20; ++t) {
    const auto psi = random_state(4, rng);
    double total = 0.0;
    for (std::size_t i = 0; i < 2; ++i) total += (spam.k_o(i) * psi.amplitudes()).squaredNorm();
    CHECK(std::abs(total - 1.0) < 1e-10);
  }

  const auto direct = typical_spam_builder(identity_basis(3), 0, 3);
  for (std::size_t a = 0; a < 3; ++a)
    for (int k = 0; k < 20; ++k) CHECK(povm_measure(QuantumState::basis(3, a), direct, rng).first == a);

  const auto psi = random_state(4, rng);
  std::vector<std::uint64_t> counts(2, 0);
  const std::uint64_t shots = 100000;
  for (std::uint64_t s = 0; s < shots; ++s) ++counts[povm_measure(psi, spam, rng).first];
  for (std::size_t i = 0; i < 2; ++i) {
    const double p = (spam.k_o(i) * psi.amplitudes()).squaredNorm();
    CHECK(test::binomial_z(counts[i], shots, p) < 4.0);
  }
}

TEST_CASE("typical SPAM construction") {
  const auto direct = typical_spam_builder(identity_basis(4), 2, 4);
  CHECK(spam_invariants(direct).worst() < 1e-12);
  for (std::size_t i = 0; i < 4; ++i) {
    Eigen::JacobiSVD<CMatrix> svd(direct.k_o(i));
    CHECK(svd.singularValues()(0) == doctest::Approx(1.0));
    CHECK(svd.singularValues()(1) < 1e-14);
  }

  RandomStream rng(4, 0, "typical");
  for (int t = 0; t < 50; ++t) {
    const auto spam = typical_spam_builder(random_unitary(4, rng), static_cast<std::size_t>(t % 2), 2);
    CHECK(spam_invariants(spam).worst() < 1e-12);
  }

  SUBCASE("relabeling covariance") {
    const CMatrix b = random_unitary(4, rng);
    CMatrix swapped = b;
    swapped.col(0) = b.col(1);
    swapped.col(1) = b.col(0);
    const auto s1 = typical_spam_builder(b, 3, 4);
    const auto s2 = typical_spam_builder(swapped, 3, 4);
    CHECK((s1.k_o(0) - s2.k_o(1)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((s1.k_o(1) - s2.k_o(0)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((s1.u_c(0) - s2.u_c(1)).cwiseAbs().maxCoeff() < 1e-14);
  }

  CHECK_THROWS_AS(typical_spam_builder(identity_basis(4), 0, 3), ValidationError);
  CHECK_THROWS_AS(typical_spam_builder(identity_basis(4), 2, 2), ValidationError);
  CHECK(spam_invariants(direct.with_perturbed_control(0, 0, 1, 1e-4)).worst() > 1e-5);
}

TEST_CASE("Hamiltonian diagonalization") {
  RandomStream rng(5, 0, "diag");
  const CMatrix v = random_unitary(4, rng);
  Eigen::VectorXd e(4);
  e << 0.3, -1.0, 2.0, 0.7;
  const CMatrix h = v * e.cast<cplx>().asDiagonal() * v.adjoint();
  const auto spam = typical_spam_builder(random_unitary(4, rng), 0, 2);
  const Diagonalized dz = diagonalize_hamiltonian(h, spam);
  std::vector<double> sorted{-1.0, 0.3, 0.7, 2.0};
  for (std::size_t a = 0; a < 4; ++a) {
    CHECK(dz.energies[a] == doctest::Approx(sorted[a]).epsilon(1e-12));
    const CVector col = dz.eigenbasis.col(static_cast<Eigen::Index>(a));
    CHECK((h * col - dz.energies[a] * col).norm() < 1e-12);
  }
  CHECK(spam_invariants(dz.spam).worst() < 1e-10);
  CMatrix nonh = h;
  nonh(0, 1) += 0.1;
  CHECK_THROWS_AS(diagonalize_hamiltonian(nonh, spam), ValidationError);
}

TEST_CASE("quantum update in the classical limit") {
  const EnergyTable e({0.0, 0.4, 1.1});
  const DiagonalHamiltonian ham(e, 0.3);
  const auto qspam = typical_spam_builder(identity_basis(3), 1, 3);
  const ImpreciseModel model(e, classical_limit_spam(qspam));
  RandomStream krng(6, 0, "kernel");
  const ImpreciseConfig cfg(0.3, 6, random_kernel(3, krng), InverseTemperature(1.0));
  const std::uint64_t runs = 100000;
  for (std::size_t a = 0; a < 3; ++a) {
    RandomStream r1(6, a, "quantum");
    RandomStream r2(6, a, "classical");
    OutcomeHistogram hq;
    OutcomeHistogram hc;
    for (std::uint64_t s = 0; s < runs; ++s) {
      auto [rec, out] = qmh_step(QuantumState::basis(3, a), ham, qspam, cfg, r1);
      CHECK(std::abs(out.amplitudes().norm() - 1.0) < 1e-10);
      ++hq[outcome_key(rec)];
      ++hc[outcome_key(imh_step(model, cfg, a, r2))];
    }
    const auto cmp = compare_histograms(hq, runs, hc, runs);
    INFO("start " << a << ", cells " << cmp.cells);
    CHECK(cmp.max_z < 4.0);
  }
}

TEST_CASE("idle SPAM reproduces the null halting law") {
  const DiagonalHamiltonian ham(EnergyTable({0.0, 0.5}), 1.0);
  const auto spam = QuantumSpamModel::idle(2);
  const ImpreciseConfig cfg(1.0, 1000, StochasticKernel::identity(1), InverseTemperature(1.0));
  const auto table = halting_table(HaltingParams(1.0), 10);
  RandomStream rng(7, 0, "idle");
  const std::uint64_t runs = 100000;
  std::vector<std::uint64_t> counts(1001, 0);
  for (std::uint64_t s = 0; s < runs; ++s) ++counts[qmh_step(QuantumState::basis(2, 1), ham, spam, cfg, rng).first.halted_at];
  for (std::size_t n = 1; n <= 10; ++n) {
    INFO("n = " << n);
    CHECK(test::binomial_z(counts[n], runs, table.p_halt[n]) < 4.0);
  }
}

TEST_CASE("stationary chain estimates the thermal energy") {
  RandomStream rng(8, 0, "chain");
  const EnergyTable e({0.0, 0.5, 1.0, 1.5});
  const DiagonalHamiltonian ham(e, 0.2);
  const auto spam = typical_spam_builder(random_unitary(4, rng), 0, 2);
  const ImpreciseConfig cfg(0.2, 2000, StochasticKernel::uniform(2), InverseTemperature(1.0));
  const Distribution p = thermal_distribution(e, cfg.beta);
  QuantumState psi = QuantumState::basis(4, sample(p, rng));
  std::vector<double> om;
  std::size_t truncated = 0;
  for (int k = 0; k < 10000; ++k) {
    auto [rec, out] = qmh_step(psi, ham, spam, cfg, rng);
    CHECK(std::abs(out.amplitudes().norm() - 1.0) < 1e-10);
    if (rec.truncated) ++truncated;
    om.push_back(rec.trajectory[0].omega);
    psi = out;
  }
  CHECK(static_cast<double>(truncated) / 1e4 < 1e-3);
  const auto m = estimate_mean(om);
  CHECK(std::abs(m.mean - energy_trace(e, p)) < 4.0 * m.se_batch);
}

TEST_CASE("trajectory Kraus operators") {
  SUBCASE("idle, one step") {
    const DiagonalHamiltonian ham(EnergyTable({0.0, 0.8}), 0.5);
    const auto spam = QuantumSpamModel::idle(2);
    const Trajectory g(std::vector<TrajectoryEntry>{{0, 0.1}, {0, 0.6}});
    const auto drv = StochasticKernel::identity(1);
    const auto k = trajectory_kraus(g, ham, spam, drv, 1.0);
    CHECK_FALSE(k.zero_decision);
    CHECK(std::abs(k.matrix(0, 1)) == 0.0);
    CHECK(std::abs(k.matrix(1, 0)) == 0.0);
    auto amp = [&](double w, double en) {
      return std::pow(2.0 * std::numbers::pi * 0.25, -0.25) * std::exp(-(w - en) * (w - en) / (4.0 * 0.25));
    };
    const double dec = decision_probability(g, drv, 1.0, 0.5);
    for (int a = 0; a < 2; ++a) {
      const double en = a == 0 ? 0.0 : 0.8;
      CHECK(k.matrix(a, a).real() == doctest::Approx(amp(0.1, en) * amp(0.6, en) * std::sqrt(dec)).epsilon(1e-13));
    }
  }

  SUBCASE("diagonal SPAM amplitudes are square roots of branch probabilities") {
    RandomStream rng(9, 0, "branch");
    const EnergyTable e({0.0, 0.6, 1.3});
    const DiagonalHamiltonian ham(e, 0.4);
    const auto qspam = typical_spam_builder(identity_basis(3), 2, 3);
    const ImpreciseModel model(e, classical_limit_spam(qspam));
    const ImpreciseConfig cfg(0.4, 5, random_kernel(3, rng), InverseTemperature(0.8));
    std::size_t tested = 0;
    for (int t = 0; t < 200; ++t) {
      const std::size_t n = 1 + t % 3;
      const Trajectory g = random_trajectory(n, 3, rng, 1.5);
      const auto k = trajectory_kraus(g, ham, qspam, cfg.driver, cfg.beta.value(), cfg.n_max);
      if (k.zero_decision) continue;
      ++tested;
      for (std::size_t a = 0; a < 3; ++a) {
        double classical = 0.0;
        std::vector<std::size_t> path(n + 1, 0);
        path[0] = a;
        const std::size_t total = static_cast<std::size_t>(std::pow(3.0, static_cast<double>(n)));
        for (std::size_t code = 0; code < total; ++code) {
          std::size_t c = code;
          for (std::size_t m = 1; m <= n; ++m, c /= 3) path[m] = c % 3;
          classical += branch_probability(g, path, model, cfg);
        }
        const double quantum = k.matrix.col(static_cast<Eigen::Index>(a)).squaredNorm();
        CHECK(quantum == doctest::Approx(classical).epsilon(1e-10));
      }
    }
    CHECK(tested > 50);
  }
}

TEST_CASE("quantum detailed balance") {
  RandomStream rng(10, 0, "balance");

  SUBCASE("palindromes") {
    const auto spam = typical_spam_builder(random_unitary(4, rng), 1, 2);
    const DiagonalHamiltonian ham(EnergyTable({0.0, 0.3, 0.9, 1.2}), 0.3);
    const Trajectory g(std::vector<TrajectoryEntry>{{0, 0.2}, {1, 0.5}, {0, 0.2}});
    REQUIRE(g.is_palindrome());
    const auto b = quantum_balance_check(g, ham, spam, StochasticKernel::uniform(2), 1.0);
    CHECK_FALSE(b.impossible);
    CHECK(b.violation < 1e-14);
  }

  SUBCASE("random sweep") {
    double worst = 0.0;
    std::size_t tested = 0;
    for (int t = 0; t < 1000; ++t) {
      const std::size_t d = 2 * (1 + static_cast<std::size_t>(t % 3));
      const std::size_t k = t % 2 == 0 ? 2 : d;
      const auto spam = typical_spam_builder(random_unitary(d, rng), static_cast<std::size_t>(t) % k, k);
      const DiagonalHamiltonian ham(random_energies(d, rng, 1.0), 0.1 + 0.5 * rng.uniform());
      const auto drv = random_kernel(k, rng);
      const Trajectory g = random_trajectory(1 + static_cast<std::size_t>(t % 3), k, rng, 1.0);
      const auto b = quantum_balance_check(g, ham, spam, drv, 0.2 + 1.8 * rng.uniform());
      if (b.impossible) continue;
      ++tested;
      worst = std::max(worst, b.violation);
    }
    CHECK(tested > 500);
    CHECK(worst < 1e-10);
  }

  SUBCASE("symmetry mutation scales linearly") {
    const auto spam = typical_spam_builder(random_unitary(4, rng), 1, 2);
    const DiagonalHamiltonian ham(EnergyTable({0.0, 0.3, 0.9, 1.2}), 0.3);
    const Trajectory g(std::vector<TrajectoryEntry>{{0, 0.2}, {1, 0.7}});
    const auto drv = StochasticKernel::uniform(2);
    const double v1 = quantum_balance_check(g, ham, spam.with_perturbed_control(0, 0, 1, 1e-4), drv, 1.0).violation;
    const double v2 = quantum_balance_check(g, ham, spam.with_perturbed_control(0, 0, 1, 2e-4), drv, 1.0).violation;
    const double v4 = quantum_balance_check(g, ham, spam.with_perturbed_control(0, 0, 1, 4e-4), drv, 1.0).violation;
    CHECK(v1 > 1e-6);
    CHECK(v2 / v1 == doctest::Approx(2.0).epsilon(1e-3));
    CHECK(v4 / v1 == doctest::Approx(4.0).epsilon(1e-3));
  }
}

TEST_CASE("channel estimates") {
  RandomStream rng(11, 0, "channel");
  const EnergyTable e({0.0, 0.5, 1.0, 1.5});
  const DiagonalHamiltonian ham(e, 0.2);
  const ImpreciseConfig cfg(0.2, 30, StochasticKernel::uniform(2), InverseTemperature(1.0));

  SUBCASE("output is a density matrix") {
    const auto spam = typical_spam_builder(random_unitary(4, rng), 0, 2);
    const auto est = channel_apply_mc(DensityMatrix::pure(random_state(4, rng)), ham, spam, cfg, 2000, 3);
    CHECK((est.rho - est.rho.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(est.rho.trace() - cplx(1.0)) < 1e-12);
    CHECK_NOTHROW(DensityMatrix{0.5 * (est.rho + est.rho.adjoint())});
  }

  SUBCASE("diagonal SPAM keeps diagonal states diagonal") {
    const auto spam = typical_spam_builder(identity_basis(4), 0, 2);
    const auto est = channel_apply_mc(thermal_density(e, cfg.beta), ham, spam, cfg, 20000, 4);
    for (Eigen::Index r = 0; r < 4; ++r)
      for (Eigen::Index c = 0; c < 4; ++c)
        if (r != c) CHECK(std::abs(est.rho(r, c)) <= 4.0 * est.se(r, c) + 1e-15);
  }

  SUBCASE("thermal state is stationary up to truncation") {
    const auto spam = typical_spam_builder(random_unitary(4, rng), 1, 2);
    const auto rep = stationarity_check(ham, spam, cfg, 100000, 5);
    INFO("distance " << rep.distance << ", noise " << rep.noise << ", eps " << rep.eps_tilde);
    CHECK(rep.consistent());
  }

  SUBCASE("retention proxies are in range") {
    const auto spam = typical_spam_builder(random_unitary(2, rng), 0, 2);
    const DiagonalHamiltonian h2(EnergyTable({0.0, 0.5}), 0.2);
    const auto r = estimate_retention(h2, spam, cfg, 4000, 6);
    CHECK(r.pairwise >= 0.0);
    CHECK(r.pairwise <= 1.0);
    CHECK(r.spectral >= 0.0);
    CHECK(r.spectral < 1.2);
  }
}

TEST_CASE("pair mixing") {
  RandomStream rng(12, 0, "pair");
  const EnergyTable e({0.0, 0.5, 1.0, 1.5});
  const DiagonalHamiltonian ham(e, 0.2);
  const ImpreciseConfig cfg(0.2, 30, StochasticKernel::uniform(2), InverseTemperature(1.0));
  const auto spam = typical_spam_builder(random_unitary(4, rng), 0, 2);
  const auto rep = pair_mixing_check(ham, spam, cfg, 5, 2000, 7);
  const Distribution p = thermal_distribution(e, cfg.beta);
  double sq = 0.0;
  for (double v : p.probs()) sq += v * v;
  CHECK(rep.distance[0] == doctest::Approx(1.0 - sq).epsilon(1e-12));
  CHECK(rep.distance.size() == 6);
  CHECK(rep.nonincreasing);
  CHECK(rep.distance[5] < rep.distance[0]);
}
