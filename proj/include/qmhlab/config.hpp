#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qmhlab/classical_mh.hpp"
#include "qmhlab/imprecise_mh.hpp"
#include "qmhlab/quantum.hpp"

namespace qmh {

enum class Mode { classical, imprecise, quantum, halting, verify, cost };

Mode parse_mode(const std::string& name);
std::string mode_name(Mode m);

/// Parsed experiment configuration. Validation errors name the field path.
struct ExperimentConfig {
  Mode mode = Mode::verify;
  std::uint64_t seed = 0;
  std::string output_dir;
  bool oracle_mode = false;

  // Sampling runs.
  std::size_t steps = 0;
  std::size_t burn_in = 0;
  std::size_t chains = 1;
  double sigma = 0.0;
  std::size_t n_max = 1;

  // Halting runs.
  double halting_delta = 0.0;
  std::size_t halting_runs = 0;
  std::size_t halting_n_limit = 0;
  std::size_t halting_n_max = 0;

  // Verify runs.
  std::vector<std::string> checks;
  bool mutation = false;
  std::size_t instances = 200;

  /// Effective configuration after CLI overrides; the hash covers this.
  nlohmann::json raw;

  /// Parses and validates; throws ValidationError with a field path.
  static ExperimentConfig from_json(const nlohmann::json& j);

  bool has_model() const { return raw.contains("model"); }
};

/// Reads a config file. Any object under "model", "driver", "spam" or
/// "hamiltonian" of the form {"file": path} is replaced by the JSON it names,
/// resolved relative to the config's directory, so the hash covers it.
nlohmann::json load_config_json(const std::string& path);

/// Canonical serialization used for hashing (sorted keys, no whitespace).
std::string canonical_config(const ExperimentConfig& cfg);

EnergyTable config_energies(const ExperimentConfig& cfg);
InverseTemperature config_beta(const ExperimentConfig& cfg);
/// Driver over `size` labels; defaults to uniform.
StochasticKernel config_driver(const ExperimentConfig& cfg, std::size_t size);
MhModel config_mh_model(const ExperimentConfig& cfg);
ClassicalSpamModel config_classical_spam(const ExperimentConfig& cfg);
QuantumSpamModel config_quantum_spam(const ExperimentConfig& cfg);
/// Hamiltonian and SPAM in the eigenbasis; a full "hamiltonian" matrix is
/// diagonalized and the SPAM conjugated to match.
std::pair<DiagonalHamiltonian, QuantumSpamModel> config_quantum(const ExperimentConfig& cfg);
/// f over observation labels; defaults to f(i) = i.
std::vector<double> config_observable(const ExperimentConfig& cfg, std::size_t obs_size);

}  // namespace qmh
