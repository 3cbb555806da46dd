#include "qmhlab/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "qmhlab/errors.hpp"

namespace qmh {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ValidationError("config " + path + ": " + what);
}

const json& need(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) fail(path + "." + key, "required field is missing");
  return j.at(key);
}

double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "expected a finite number");
  return v;
}

std::size_t as_count(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() < 0) fail(path, "expected a non-negative integer");
  return j.get<std::size_t>();
}

std::vector<double> as_vector(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of numbers");
  std::vector<double> v;
  for (std::size_t k = 0; k < j.size(); ++k) v.push_back(as_double(j[k], path + "[" + std::to_string(k) + "]"));
  return v;
}

cplx as_complex(const json& j, const std::string& path) {
  if (j.is_number()) return {as_double(j, path), 0.0};
  if (!j.is_array() || j.size() != 2) fail(path, "expected a number or a [re, im] pair");
  return {as_double(j[0], path + "[0]"), as_double(j[1], path + "[1]")};
}

CMatrix as_cmatrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a square matrix");
  const auto n = static_cast<Eigen::Index>(j.size());
  CMatrix m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::string rp = path + "[" + std::to_string(r) + "]";
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) fail(rp, "row length differs from row count");
    for (Eigen::Index c = 0; c < n; ++c)
      m(r, c) = as_complex(row[static_cast<std::size_t>(c)], rp + "[" + std::to_string(c) + "]");
  }
  return m;
}

template <class F>
auto rethrow_with_path(const std::string& path, F f) -> decltype(f()) {
  try {
    return f();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    if (msg.rfind("config ", 0) == 0) throw;
    fail(path, msg);
  }
}

std::size_t opt_count(const json& j, const std::string& key, std::size_t dflt, const std::string& path) {
  return j.contains(key) ? as_count(j.at(key), path + "." + key) : dflt;
}

const json& spam_spec(const ExperimentConfig& cfg) {
  static const json direct = {{"type", "direct"}};
  return cfg.raw.contains("spam") ? cfg.raw.at("spam") : direct;
}

CMatrix spam_basis(const ExperimentConfig& cfg, const json& spec, std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  if (!spec.contains("basis")) return CMatrix::Identity(n, n);
  const json& b = spec.at("basis");
  if (b.is_string()) {
    if (b == "identity") return CMatrix::Identity(n, n);
    if (b == "random") {
      RandomStream rng(cfg.seed, 0, "basis");
      return random_unitary(d, rng);
    }
    fail(".spam.basis", "expected \"identity\", \"random\" or a matrix");
  }
  return as_cmatrix(b, ".spam.basis");
}

}  // namespace

Mode parse_mode(const std::string& name) {
  if (name == "classical") return Mode::classical;
  if (name == "imprecise") return Mode::imprecise;
  if (name == "quantum") return Mode::quantum;
  if (name == "halting") return Mode::halting;
  if (name == "verify") return Mode::verify;
  if (name == "cost") return Mode::cost;
  throw ValidationError("config .mode: unknown mode \"" + name + "\"");
}

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::classical: return "classical";
    case Mode::imprecise: return "imprecise";
    case Mode::quantum: return "quantum";
    case Mode::halting: return "halting";
    case Mode::verify: return "verify";
    case Mode::cost: return "cost";
  }
  return "verify";
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) fail("", "top level must be an object");
  ExperimentConfig c;
  c.raw = j;
  const json& mode = need(j, "mode", "");
  if (!mode.is_string()) fail(".mode", "expected a string");
  c.mode = parse_mode(mode.get<std::string>());
  const json& seed = need(j, "seed", "");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0))
    fail(".seed", "expected a non-negative integer");
  c.seed = seed.get<std::uint64_t>();
  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string()) fail(".output_dir", "expected a string");
    c.output_dir = j.at("output_dir").get<std::string>();
  }
  if (j.contains("oracle_mode")) {
    if (!j.at("oracle_mode").is_boolean()) fail(".oracle_mode", "expected true or false");
    c.oracle_mode = j.at("oracle_mode").get<bool>();
  }
  c.steps = opt_count(j, "steps", 0, "");
  c.burn_in = opt_count(j, "burn_in", 0, "");
  c.chains = opt_count(j, "chains", 1, "");
  c.n_max = opt_count(j, "n_max", 1, "");
  if (j.contains("sigma")) c.sigma = as_double(j.at("sigma"), ".sigma");
  if (c.sigma < 0.0) fail(".sigma", "must be non-negative");

  const bool sampling = c.mode == Mode::classical || c.mode == Mode::imprecise || c.mode == Mode::quantum;
  if (sampling) {
    need(j, "model", "");
    if (c.steps == 0) fail(".steps", "must be positive for sampling modes");
    if (c.chains == 0) fail(".chains", "must be positive");
  }
  if (c.mode == Mode::imprecise || c.mode == Mode::quantum) {
    if (c.n_max == 0) fail(".n_max", "must be at least 1");
    if (!j.contains("n_max")) fail(".n_max", "required field is missing");
  }
  if (c.mode == Mode::quantum && !(c.sigma > 0.0)) fail(".sigma", "quantum runs need sigma > 0");
  if (c.has_model()) {
    rethrow_with_path(".model", [&] { return config_energies(c); });
    rethrow_with_path(".model.beta", [&] { return config_beta(c); });
  }

  if (c.mode == Mode::halting) {
    const json& h = need(j, "halting", "");
    c.halting_delta = as_double(need(h, "delta", ".halting"), ".halting.delta");
    if (!(c.halting_delta > 0.0)) fail(".halting.delta", "must be positive");
    c.halting_runs = as_count(need(h, "runs", ".halting"), ".halting.runs");
    if (c.halting_runs == 0) fail(".halting.runs", "must be positive");
    c.halting_n_limit = as_count(need(h, "n_limit", ".halting"), ".halting.n_limit");
    if (c.halting_n_limit == 0) fail(".halting.n_limit", "must be positive");
    c.halting_n_max = opt_count(h, "n_max", std::max<std::size_t>(1000, c.halting_n_limit + 1), ".halting");
    if (c.halting_n_max <= c.halting_n_limit) fail(".halting.n_max", "must exceed n_limit");
  }
  if (c.mode == Mode::cost) {
    const json& k = need(j, "cost", "");
    for (const char* key : {"omega_tilde", "eps_tilde", "beta", "sigma"}) as_double(need(k, key, ".cost"), std::string(".cost.") + key);
  }
  if (j.contains("verify")) {
    const json& v = j.at("verify");
    if (v.contains("checks")) {
      if (!v.at("checks").is_array()) fail(".verify.checks", "expected an array of names");
      for (const auto& s : v.at("checks")) {
        if (!s.is_string()) fail(".verify.checks", "expected an array of names");
        c.checks.push_back(s.get<std::string>());
      }
    } else {
      c.checks = {"balance", "rejection_identity", "acceptance_equivalence", "branch_balance",
                  "gaussian_identity", "quantum_spam", "quantum_balance"};
    }
    if (v.contains("mutation")) {
      if (!v.at("mutation").is_boolean()) fail(".verify.mutation", "expected true or false");
      c.mutation = v.at("mutation").get<bool>();
    }
    c.instances = opt_count(v, "instances", 200, ".verify");
  } else if (c.mode == Mode::verify) {
    c.checks = {"balance", "rejection_identity", "acceptance_equivalence", "branch_balance",
                "gaussian_identity", "quantum_spam", "quantum_balance"};
  }
  // Builders validate the rest eagerly so errors surface before any output.
  if (c.mode == Mode::classical) rethrow_with_path(".driver", [&] { return config_mh_model(c); });
  if (c.mode == Mode::imprecise) {
    const ClassicalSpamModel s = rethrow_with_path(".spam", [&] { return config_classical_spam(c); });
    rethrow_with_path(".driver", [&] { return config_driver(c, s.obs_size()); });
    rethrow_with_path(".observable", [&] { return config_observable(c, s.obs_size()); });
  }
  if (c.mode == Mode::quantum) {
    const auto q = rethrow_with_path(".spam", [&] { return config_quantum(c); });
    rethrow_with_path(".driver", [&] { return config_driver(c, q.second.obs_size()); });
    rethrow_with_path(".observable", [&] { return config_observable(c, q.second.obs_size()); });
  }
  return c;
}

nlohmann::json load_config_json(const std::string& path) {
  const std::filesystem::path cfg_path(path);
  auto read = [](const std::filesystem::path& p, const std::string& field) {
    std::ifstream in(p);
    if (!in) fail(field, "cannot open file \"" + p.string() + "\"");
    try {
      return json::parse(in);
    } catch (const json::parse_error& e) {
      fail(field, std::string("invalid JSON in \"") + p.string() + "\": " + e.what());
    }
  };
  json j = read(cfg_path, "file");
  if (!j.is_object()) fail("", "top level must be an object");
  for (const char* key : {"model", "driver", "spam", "hamiltonian"}) {
    if (!j.contains(key)) continue;
    const json& v = j.at(key);
    if (!v.is_object() || !v.contains("file")) continue;
    const std::string field = std::string(".") + key + ".file";
    if (v.size() != 1 || !v.at("file").is_string()) fail(field, "a file reference must be {\"file\": path} only");
    j[key] = read(cfg_path.parent_path() / v.at("file").get<std::string>(), field);
  }
  return j;
}

std::string canonical_config(const ExperimentConfig& cfg) { return cfg.raw.dump(); }

EnergyTable config_energies(const ExperimentConfig& cfg) {
  const json& m = need(cfg.raw, "model", "");
  return EnergyTable(as_vector(need(m, "energies", ".model"), ".model.energies"));
}

InverseTemperature config_beta(const ExperimentConfig& cfg) {
  const json& m = need(cfg.raw, "model", "");
  return InverseTemperature(as_double(need(m, "beta", ".model"), ".model.beta"));
}

StochasticKernel config_driver(const ExperimentConfig& cfg, std::size_t size) {
  if (!cfg.raw.contains("driver")) return StochasticKernel::uniform(size);
  const json& d = cfg.raw.at("driver");
  const std::string type = need(d, "type", ".driver").get<std::string>();
  if (type == "uniform") return StochasticKernel::uniform(size);
  if (type == "identity") return StochasticKernel::identity(size);
  if (type != "matrix") fail(".driver.type", "expected uniform, identity or matrix");
  const json& rows = need(d, "rows", ".driver");
  if (!rows.is_array() || rows.size() != size) fail(".driver.rows", "expected " + std::to_string(size) + " rows");
  RowMatrix m(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(size));
  for (std::size_t r = 0; r < size; ++r) {
    const auto v = as_vector(rows[r], ".driver.rows[" + std::to_string(r) + "]");
    if (v.size() != size) fail(".driver.rows[" + std::to_string(r) + "]", "wrong row length");
    for (std::size_t c = 0; c < size; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[c];
  }
  return StochasticKernel(std::move(m));
}

MhModel config_mh_model(const ExperimentConfig& cfg) {
  const EnergyTable e = config_energies(cfg);
  std::vector<std::string> labels;
  const json& m = cfg.raw.at("model");
  if (m.contains("labels")) {
    if (!m.at("labels").is_array()) fail(".model.labels", "expected an array of strings");
    for (const auto& l : m.at("labels")) labels.push_back(l.get<std::string>());
  }
  const std::size_t n = e.size();
  return MhModel(StateSpace(n, std::move(labels)), e, config_beta(cfg), config_driver(cfg, n));
}

ClassicalSpamModel config_classical_spam(const ExperimentConfig& cfg) {
  const std::size_t n = config_energies(cfg).size();
  const json& s = spam_spec(cfg);
  const std::string type = need(s, "type", ".spam").get<std::string>();
  if (type == "direct") return ClassicalSpamModel::direct_access(n);
  if (type == "idle") return ClassicalSpamModel::idle(n);
  if (type == "classical") {
    const std::size_t k = as_count(need(s, "obs_size", ".spam"), ".spam.obs_size");
    return ClassicalSpamModel(n, k, as_vector(need(s, "p_o", ".spam"), ".spam.p_o"),
                              as_vector(need(s, "p_c", ".spam"), ".spam.p_c"));
  }
  return classical_limit_spam(config_quantum_spam(cfg));
}

QuantumSpamModel config_quantum_spam(const ExperimentConfig& cfg) {
  const std::size_t d = config_energies(cfg).size();
  const json& s = spam_spec(cfg);
  const std::string type = need(s, "type", ".spam").get<std::string>();
  if (type == "idle") return QuantumSpamModel::idle(d);
  if (type == "direct") return typical_spam_builder(CMatrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)), 0, d);
  if (type == "typical") {
    const std::size_t j = opt_count(s, "j", 0, ".spam");
    const std::size_t k = as_count(need(s, "obs_size", ".spam"), ".spam.obs_size");
    return typical_spam_builder(spam_basis(cfg, s, d), j, k);
  }
  if (type == "inline") {
    const json& ko = need(s, "k_o", ".spam");
    const json& uc = need(s, "u_c", ".spam");
    if (!ko.is_array() || !uc.is_array()) fail(".spam", "k_o and u_c must be arrays of matrices");
    std::vector<CMatrix> k_o;
    std::vector<CMatrix> u_c;
    for (std::size_t i = 0; i < ko.size(); ++i) k_o.push_back(as_cmatrix(ko[i], ".spam.k_o[" + std::to_string(i) + "]"));
    for (std::size_t i = 0; i < uc.size(); ++i) u_c.push_back(as_cmatrix(uc[i], ".spam.u_c[" + std::to_string(i) + "]"));
    return QuantumSpamModel(std::move(k_o), std::move(u_c));
  }
  fail(".spam.type", "expected direct, idle, classical, typical or inline");
}

std::pair<DiagonalHamiltonian, QuantumSpamModel> config_quantum(const ExperimentConfig& cfg) {
  QuantumSpamModel spam = config_quantum_spam(cfg);
  if (!cfg.raw.contains("hamiltonian"))
    return {DiagonalHamiltonian(config_energies(cfg), cfg.sigma), std::move(spam)};
  const CMatrix h = as_cmatrix(cfg.raw.at("hamiltonian"), ".hamiltonian");
  Diagonalized dz = diagonalize_hamiltonian(h, spam);
  return {DiagonalHamiltonian(EnergyTable(dz.energies), cfg.sigma), std::move(dz.spam)};
}

std::vector<double> config_observable(const ExperimentConfig& cfg, std::size_t obs_size) {
  if (!cfg.raw.contains("observable")) {
    std::vector<double> f(obs_size);
    for (std::size_t i = 0; i < obs_size; ++i) f[i] = static_cast<double>(i);
    return f;
  }
  auto f = as_vector(cfg.raw.at("observable"), ".observable");
  if (f.size() != obs_size) fail(".observable", "needs one value per observation label");
  return f;
}

}  // namespace qmh
