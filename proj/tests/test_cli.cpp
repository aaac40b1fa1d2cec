#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ciwnls/cli.hpp"
#include "ciwnls/json_io.hpp"

using namespace ciwnls;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

fs::path scratch(const char* name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("help snapshots") {
  const fs::path dir = CIWNLS_SNAPSHOT_DIR;
  const bool update = std::getenv("CIWNLS_UPDATE_SNAPSHOTS") != nullptr;
  for (std::string verb : {"", "graph-gen", "audit", "covariance", "simulate", "reproduce-paper"}) {
    std::vector<std::string> args{"--help"};
    if (!verb.empty()) args.insert(args.begin(), verb);
    const Run r = cli(args);
    CHECK(r.code == kExitOk);
    const fs::path file = dir / ((verb.empty() ? std::string("main") : verb) + ".txt");
    if (update) {
      std::ofstream(file, std::ios::binary) << r.out;
    }
    INFO("snapshot " << file.string());
    CHECK(r.out == slurp(file));
  }
}

TEST_CASE("graph-gen with a covering radius gives one edge") {
  const Run r = cli({"graph-gen", "--n", "2", "--radius", "1.5"});
  REQUIRE(r.code == kExitOk);
  const auto j = json_io::json::parse(r.out);
  CHECK(j["n_agents"] == 2);
  CHECK(j["edges"] == json_io::json::parse("[[1,2]]"));
}

TEST_CASE("graph-gen replays byte for byte") {
  const auto dir = scratch("ciwnls-cli-graph");
  for (const char* name : {"a.json", "b.json"}) {
    CHECK(cli({"graph-gen", "--n", "10", "--radius", "0.4", "--seed", "5", "--out",
               (dir / name).string()})
              .code == kExitOk);
  }
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  fs::remove_all(dir);
}

TEST_CASE("graph-gen failure is numerical") {
  const Run r = cli({"graph-gen", "--n", "60", "--radius", "0.001"});
  CHECK(r.code == kExitNumerical);
  CHECK(r.err.find("attempt") != std::string::npos);
}

TEST_CASE("covariance on the preset") {
  const Run r = cli({"covariance", "--model", "paper", "--set", "paper", "--theta", "paper"});
  REQUIRE(r.code == kExitOk);
  const auto j = json_io::json::parse(r.out);
  CHECK(j["trace_sigma_c"].get<double>() == doctest::Approx(4.720024497584101).epsilon(1e-12));
  CHECK_FALSE(j.contains("sigma_d"));
}

TEST_CASE("covariance with the recovered gain") {
  const Run r =
      cli({"covariance", "--model", "paper", "--set", "paper", "--theta", "paper", "--a", "paper"});
  REQUIRE(r.code == kExitOk);
  const auto j = json_io::json::parse(r.out);
  CHECK(j["a"].get<double>() == doctest::Approx(14.3313).epsilon(1e-4));
  CHECK(j["gain_recovery"]["exact_root"] == false);
  CHECK(j["gap_norm"].get<double>() <= j["gap_bound"].get<double>());
}

TEST_CASE("covariance flag errors name the flag") {
  Run r = cli({"covariance", "--model", "paper", "--set", "paper", "--theta", "1,2"});
  CHECK(r.code == kExitValidation);
  CHECK(r.err.find("--theta") != std::string::npos);
  r = cli({"covariance", "--model", "paper", "--set", "paper", "--theta", "paper", "--a", "0.01"});
  CHECK(r.code == kExitValidation);
  CHECK(r.err.find("must exceed") != std::string::npos);
  r = cli({"covariance", "--model", "/nonexistent.json", "--set", "paper", "--theta", "paper"});
  CHECK(r.code == kExitValidation);
  CHECK(r.err.find("--model /nonexistent.json") != std::string::npos);
  r = cli({"covariance", "--model", "paper", "--set", "paper", "--theta", "paper", "--n-agents",
           "7"});
  CHECK(r.code == kExitValidation);
  CHECK(r.err.find("--n-agents") != std::string::npos);
}

TEST_CASE("usage errors") {
  Run r = cli({"simulate"});
  CHECK(r.code == kExitValidation);
  CHECK(r.err.find("--config") != std::string::npos);
  CHECK(r.err.find("Usage") != std::string::npos);
  r = cli({"graph-gen", "--n", "3", "--radius", "0.5", "--bogus"});
  CHECK(r.code == kExitValidation);
  r = cli({});
  CHECK(r.code == kExitValidation);
  r = cli({"frobnicate"});
  CHECK(r.code == kExitValidation);
}

TEST_CASE("audit prints a table") {
  const Run r = cli({"audit", "--model", "paper", "--set", "paper", "--samples", "300", "--a",
                     "14.33"});
  REQUIRE(r.code == kExitOk);
  for (const char* id : {"M1", "M2", "M3", "M4", "M5", "M6", "M7", "G1", "G2", "G3"}) {
    CHECK(r.out.find(id) != std::string::npos);
  }
}

TEST_CASE("simulate writes outputs and honors the environment default") {
  const auto dir = scratch("ciwnls-cli-sim");
  const fs::path config = dir / "config.json";
  std::ofstream(config) << R"({
    "graph": {"n_agents": 3, "edges": [[1, 2], [2, 3]]},
    "model": {"type": "linear", "F": [[[1, 0]], [[0, 1]], [[1, 1]]], "R": [[[1]], [[1]], [[1]]]},
    "feasible_set": {"kind": "box", "lower": [-2, -2], "upper": [2, 2]},
    "theta_true": [0.5, -0.25],
    "schedule": {"a": 3.0},
    "horizon": 200,
    "trials": 3,
    "run_audit": false
  })";
  const fs::path out = dir / "env-out";
  ::setenv("CIWNLS_OUT_DIR", out.string().c_str(), 1);
  Run r = cli({"simulate", "--config", config.string(), "--quiet", "--jobs", "2"});
  ::unsetenv("CIWNLS_OUT_DIR");
  REQUIRE(r.code == kExitOk);
  CHECK(r.err.empty());
  CHECK(fs::exists(out / "metrics.csv"));
  CHECK(fs::exists(out / "manifest.json"));

  r = cli({"simulate", "--config", config.string(), "--quiet", "--trials", "2", "--out-dir",
           (dir / "flag-out").string()});
  REQUIRE(r.code == kExitOk);
  CHECK(json_io::read_json_file(dir / "flag-out" / "manifest.json")["trials"] == 2);
  fs::remove_all(dir);
}

TEST_CASE("simulate with a bad config names the file") {
  const auto dir = scratch("ciwnls-cli-bad");
  const fs::path config = dir / "config.json";
  std::ofstream(config) << R"({"graph": {"n_agents": 2, "edges": []}})";
  const Run r = cli({"simulate", "--config", config.string()});
  CHECK(r.code == kExitValidation);
  CHECK(r.err.find(config.string()) != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("reproduce-paper runs a shortened preset") {
  const auto dir = scratch("ciwnls-cli-paper");
  const Run r = cli({"reproduce-paper", "--trials", "2", "--horizon", "100",
                     "--centralized-trials", "1", "--quiet", "--out-dir", dir.string()});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("trace_sigma_c") != std::string::npos);
  for (const char* f : {"metrics.csv", "graph.json", "covariance.json", "audit.json",
                        "manifest.json"}) {
    CHECK(fs::exists(dir / f));
  }
  fs::remove_all(dir);
}
