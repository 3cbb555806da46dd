// qmhlab <config.json> [--mode M] [--seed N] [--out DIR]
#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "qmhlab/config.hpp"
#include "qmhlab/errors.hpp"
#include "qmhlab/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Metropolis-Hastings sampler and verification runner"};
  std::string config_path;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  app.add_option("config", config_path, "JSON experiment config")->required();
  app.add_option("--mode", mode, "override the config mode")
      ->check(CLI::IsMember({"classical", "imprecise", "quantum", "halting", "verify", "cost"}));
  app.add_option("--seed", seed, "override the config seed");
  app.add_option("--out", out_dir, "output directory");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? qmh::kExitOk : qmh::kExitConfigError;
  }

  try {
    nlohmann::json raw = qmh::load_config_json(config_path);
    if (mode) raw["mode"] = *mode;
    if (seed) raw["seed"] = *seed;
    const qmh::ExperimentConfig cfg = qmh::ExperimentConfig::from_json(raw);
    const std::string dir = out_dir ? *out_dir : (cfg.output_dir.empty() ? "qmhlab_out" : cfg.output_dir);
    const int rc = qmh::run(cfg, dir);
    std::cout << "qmhlab: mode " << qmh::mode_name(cfg.mode) << ", outputs in " << dir << "\n";
    if (rc == qmh::kExitVerificationFailure) std::cerr << "qmhlab: verification failed, see summary.json\n";
    return rc;
  } catch (const qmh::ValidationError& e) {
    std::cerr << "qmhlab: " << e.what() << "\n";
    return qmh::kExitConfigError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "qmhlab: config: " << e.what() << "\n";
    return qmh::kExitConfigError;
  } catch (const qmh::QuadratureError& e) {
    std::cerr << "qmhlab: numerical check failed: " << e.what() << "\n";
    return qmh::kExitVerificationFailure;
  } catch (const qmh::ContractError& e) {
    std::cerr << "qmhlab: numerical check failed: " << e.what() << "\n";
    return qmh::kExitVerificationFailure;
  } catch (const std::exception& e) {
    std::cerr << "qmhlab: error: " << e.what() << "\n";
    return qmh::kExitConfigError;
  }
}
