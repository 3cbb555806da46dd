#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "qmhlab/halting.hpp"
#include "qmhlab/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qmhlab_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(QMHLAB_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config(const std::string& name) { return std::string(QMHLAB_CONFIG_DIR) + "/" + name; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

}  // namespace

TEST_CASE("verify mode on the bundled 2-state example") {
  const fs::path out = scratch("verify");
  REQUIRE(run_cli(config("verify_2state.json") + " --out " + out.string()) == 0);
  const json s = read_json(out / "summary.json");
  CHECK(s["verify"]["all_pass"].get<bool>());
  CHECK(s["verify"]["checks"].size() >= 6);
  for (const auto& c : s["verify"]["checks"]) {
    INFO(c.dump());
    CHECK(c["pass"].get<bool>());
    if (c.contains("mutation_detected")) CHECK(c["mutation_detected"].get<bool>());
  }
  const json m = read_json(out / "manifest.json");
  CHECK(m["config_sha256"] == s["config_sha256"]);
  for (const auto& [name, digest] : m["files"].items()) CHECK(qmh::sha256_hex(slurp(out / name)) == digest);
}

TEST_CASE("empty check list gives an empty report") {
  const fs::path dir = scratch("empty");
  write_file(dir / "cfg.json", R"({"mode": "verify", "seed": 1, "verify": {"checks": []}})");
  REQUIRE(run_cli((dir / "cfg.json").string() + " --out " + (dir / "out").string()) == 0);
  const json s = read_json(dir / "out" / "summary.json");
  CHECK(s["verify"]["checks"].empty());
  CHECK(s["verify"]["all_pass"].get<bool>());
}

TEST_CASE("halting mode matches the analytic table") {
  const fs::path out = scratch("halting");
  REQUIRE(run_cli(config("halting_delta1.json") + " --out " + out.string()) == 0);
  std::istringstream csv(slurp(out / "halting.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line.rfind("# qmhlab halting table config_sha256=", 0) == 0);
  std::getline(csv, line);
  CHECK(line == "n,p_halt,t_n,s_n,empirical_p,SE");
  const auto table = qmh::halting_table(qmh::HaltingParams(1.0), 20);
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    std::istringstream row(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(row, cell, ',')) v.push_back(std::stod(cell));
    REQUIRE(v.size() == 6);
    const auto n = static_cast<std::size_t>(v[0]);
    CHECK(std::abs(v[1] - table.p_halt[n]) < 1e-10);
    const double se = std::sqrt(table.p_halt[n] * (1.0 - table.p_halt[n]) / 1e6);
    INFO("n = " << n);
    CHECK(std::abs(v[4] - table.p_halt[n]) < 4.0 * se);
    ++rows;
  }
  CHECK(rows == 20);
}

TEST_CASE("same config and seed give byte-identical traces") {
  for (const char* name : {"classical_3state.json", "imprecise_4state.json"}) {
    const fs::path a = scratch(std::string("repro_a_") + name);
    const fs::path b = scratch(std::string("repro_b_") + name);
    REQUIRE(run_cli(config(name) + " --out " + a.string()) == 0);
    REQUIRE(run_cli(config(name) + " --out " + b.string()) == 0);
    std::size_t traces = 0;
    for (const auto& e : fs::directory_iterator(a)) {
      const std::string f = e.path().filename().string();
      if (f.rfind("trace_", 0) != 0) continue;
      ++traces;
      CHECK(qmh::sha256_hex(slurp(e.path())) == qmh::sha256_hex(slurp(b / f)));
    }
    CHECK(traces > 0);
    CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
  }
}

TEST_CASE("seed override changes traces") {
  const fs::path a = scratch("seed_a");
  const fs::path b = scratch("seed_b");
  REQUIRE(run_cli(config("classical_3state.json") + " --out " + a.string()) == 0);
  REQUIRE(run_cli(config("classical_3state.json") + " --seed 8 --out " + b.string()) == 0);
  CHECK(slurp(a / "trace_chain0.csv") != slurp(b / "trace_chain0.csv"));
  CHECK(read_json(b / "summary.json")["seed"] == 8);
}

TEST_CASE("mode override") {
  const fs::path out = scratch("mode");
  REQUIRE(run_cli(config("imprecise_4state.json") + " --mode verify --out " + out.string()) == 0);
  CHECK(read_json(out / "summary.json")["mode"] == "verify");
  CHECK(run_cli(config("imprecise_4state.json") + " --mode bogus --out " + scratch("bogus").string()) == 1);
}

TEST_CASE("config errors exit 1 and leave nothing behind") {
  const fs::path dir = scratch("bad");
  write_file(dir / "missing_seed.json", R"({"mode": "halting", "halting": {"delta": 1, "runs": 10, "n_limit": 5}})");
  write_file(dir / "bad_mode.json", R"({"mode": "nope", "seed": 1})");
  write_file(dir / "bad_energy.json",
             R"({"mode": "classical", "seed": 1, "model": {"energies": [0, "x"], "beta": 1}, "steps": 10})");
  write_file(dir / "not_json.json", "{");
  for (const char* f : {"missing_seed.json", "bad_mode.json", "bad_energy.json", "not_json.json"}) {
    const fs::path out = dir / (std::string("out_") + f);
    INFO(f);
    CHECK(run_cli((dir / f).string() + " --out " + out.string()) == 1);
    CHECK_FALSE(fs::exists(out));
  }
  CHECK(run_cli((dir / "absent.json").string()) == 1);
}

TEST_CASE("mixed-provenance directories are refused") {
  const fs::path out = scratch("mixed");
  REQUIRE(run_cli(config("classical_3state.json") + " --out " + out.string()) == 0);
  const std::string before = slurp(out / "manifest.json");
  CHECK(run_cli(config("classical_3state.json") + " --seed 99 --out " + out.string()) == 1);
  CHECK(slurp(out / "manifest.json") == before);
  CHECK(run_cli(config("classical_3state.json") + " --out " + out.string()) == 0);

  const fs::path foreign = scratch("foreign");
  write_file(foreign / "notes.txt", "keep me");
  CHECK(run_cli(config("classical_3state.json") + " --out " + foreign.string()) == 1);
  CHECK(slurp(foreign / "notes.txt") == "keep me");
}

TEST_CASE("file references resolve relative to the config") {
  const fs::path dir = scratch("refs");
  write_file(dir / "parts" / "model.json", R"({"energies": [0.0, 0.7, 1.4], "beta": 0.8})");
  write_file(dir / "parts" / "driver.json", R"({"type": "uniform"})");
  write_file(dir / "cfg.json", R"({"mode": "classical", "seed": 5, "model": {"file": "parts/model.json"},
                                   "driver": {"file": "parts/driver.json"}, "steps": 2000, "burn_in": 100})");
  REQUIRE(run_cli((dir / "cfg.json").string() + " --out " + (dir / "out").string()) == 0);
  const json m = read_json(dir / "out" / "manifest.json");
  CHECK(m["config"]["model"]["energies"].size() == 3);

  write_file(dir / "dangling.json", R"({"mode": "classical", "seed": 5, "model": {"file": "nope.json"}, "steps": 10})");
  CHECK(run_cli((dir / "dangling.json").string() + " --out " + (dir / "out2").string()) == 1);
  CHECK_FALSE(fs::exists(dir / "out2"));
}

TEST_CASE("a check subset runs only the named checks") {
  const fs::path dir = scratch("subset");
  write_file(dir / "cfg.json", R"({"mode": "verify", "seed": 1, "model": {"energies": [0.0, 1.0], "beta": 1.0},
    "sigma": 0.3, "n_max": 2, "verify": {"checks": ["gaussian_identity", "balance"], "instances": 5}})");
  REQUIRE(run_cli((dir / "cfg.json").string() + " --out " + (dir / "out").string()) == 0);
  const json checks = read_json(dir / "out" / "summary.json")["verify"]["checks"];
  REQUIRE(checks.size() == 2);
  CHECK(checks[0]["name"] == "gaussian_identity");
  CHECK(checks[1]["name"] == "balance");
  write_file(dir / "unknown.json", R"({"mode": "verify", "seed": 1, "verify": {"checks": ["nonsense"]}})");
  CHECK(run_cli((dir / "unknown.json").string() + " --out " + (dir / "out2").string()) == 1);
}
