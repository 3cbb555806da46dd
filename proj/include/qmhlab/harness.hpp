#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qmhlab/config.hpp"

namespace qmh {

/// Exit codes of the command-line runner.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitVerificationFailure = 2;

/// Lower-case hex SHA-256.
std::string sha256_hex(const std::string& data);

/// %.17g, the round-trip format used in every output file.
std::string format_double(double v);

/// In-memory products of one run, written to disk only after every mode
/// computation has succeeded.
struct RunOutputs {
  std::vector<std::pair<std::string, std::string>> files;  ///< name, content
  nlohmann::json summary;
  int exit_code = kExitOk;
};

/// Computes all artifacts for the configured mode.
RunOutputs compute_run(const ExperimentConfig& cfg);

/// Machine-readable pass/fail per requested check.
nlohmann::json verify_suite(const ExperimentConfig& cfg);

/// Writes outputs plus summary.json and manifest.json into dir. Refuses a
/// directory that holds output from a different config; on failure removes
/// every file this call created.
void write_outputs(const ExperimentConfig& cfg, const RunOutputs& out, const std::filesystem::path& dir);

/// compute_run followed by write_outputs; returns the exit code.
int run(const ExperimentConfig& cfg, const std::filesystem::path& dir);

}  // namespace qmh
