#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numbers>

#include "ciwnls/experiment.hpp"
#include "ciwnls/json_io.hpp"
#include "support.hpp"

using namespace ciwnls;
using json = json_io::json;
using std::numbers::pi;

TEST_CASE("graph JSON uses 1-based ordered pairs") {
  const auto g = build_graph(3, {{2, 1}, {0, 1}});
  const json j = json_io::graph_to_json(g);
  CHECK(j["n_agents"] == 3);
  CHECK(j["edges"] == json::parse("[[1,2],[2,3]]"));
  CHECK_FALSE(j.contains("coords"));
  CHECK(json_io::graph_from_json(j).edges() == g.edges());
}

TEST_CASE("graph JSON keeps coordinates") {
  Rng rng(1);
  const auto g = generate_random_geometric(5, 0.7, rng);
  const auto back = json_io::graph_from_json(json_io::graph_to_json(g));
  CHECK(back.edges() == g.edges());
  CHECK(*back.coords() == *g.coords());
}

TEST_CASE("malformed graph JSON is a validation error") {
  CHECK_THROWS_AS(json_io::graph_from_json(json::parse(R"({"edges": []})")), ValidationError);
  CHECK_THROWS_AS(json_io::graph_from_json(json::parse(R"({"n_agents": 2, "edges": [[1]]})")),
                  ValidationError);
  CHECK_THROWS_AS(json_io::graph_from_json(json::parse(R"({"n_agents": 2, "edges": [[1,3]]})")),
                  InvalidGraphError);
}

TEST_CASE("sine model JSON") {
  const json j = json::parse(
      R"({"type": "pairwise_sine", "pairs": [[1,2],[3,2]], "variance": 2.0, "param_dim": 3})");
  const auto m = json_io::model_from_json(j);
  CHECK(m.n_agents() == 2);
  CHECK(m.eval(1, test::vec({0, 0.1, 0.2}))(0) == std::sin(0.1 + 0.2));
  CHECK(json_io::model_to_json(m) == j);
}

TEST_CASE("linear model JSON") {
  const json j = json::parse(R"({"type": "linear", "F": [[[1, 0]], [[0, 1]]], "R": [[[1]], [[2]]]})");
  const auto m = json_io::model_from_json(j);
  CHECK(m.param_dim() == 2);
  CHECK(m.noise_cov(1)(0, 0) == 2.0);
  CHECK(json_io::model_from_json(json_io::model_to_json(m)).noise_cov(1)(0, 0) == 2.0);
  CHECK_THROWS_AS(json_io::model_from_json(json::parse(R"({"type": "quadratic"})")),
                  ValidationError);
}

TEST_CASE("feasible set JSON") {
  const json box = json::parse(R"({"kind": "box", "lower": [-1, -2], "upper": [1, 2]})");
  const auto s = json_io::set_from_json(box);
  CHECK(s.upper() == test::vec({1, 2}));
  CHECK(json_io::set_to_json(s) == box);
  const auto all = json_io::set_from_json(json::parse(R"({"kind": "whole-space", "dim": 3})"));
  CHECK_FALSE(all.bounded());
  CHECK(all.dim() == 3);
}

TEST_CASE("config JSON round trip") {
  auto c = reproduce_paper_experiment();
  c.trials = 12;
  c.centralized_trials = 3;
  const json j = json_io::config_to_json(c);
  const auto back = json_io::config_from_json(j);
  CHECK(json_io::config_to_json(back) == j);
  CHECK(json_io::config_hash(back) == json_io::config_hash(c));
  c.trials = 13;
  CHECK(json_io::config_hash(c) != json_io::config_hash(back));
}

TEST_CASE("config JSON with auto gains and file references") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "ciwnls-json-test";
  fs::create_directories(dir);
  json_io::write_json_file(
      json::parse(R"({"type": "linear", "F": [[[1]], [[1]]], "R": [[[1]], [[1]]]})"),
      dir / "model.json");
  const json j = json::parse(R"({
    "graph": {"n_agents": 2, "edges": [[1, 2]]},
    "model": "model.json",
    "feasible_set": {"kind": "box", "lower": [-1], "upper": [1]},
    "theta_true": [0.25],
    "schedule": {"a": "auto", "b": 0.5, "delta1": 0.2},
    "horizon": 10,
    "trials": 2
  })");
  const auto c = json_io::config_from_json(j, dir);
  CHECK_FALSE(c.schedule.a.has_value());
  CHECK(c.schedule.b.value() == 0.5);
  CHECK(c.schedule.delta1 == 0.2);
  CHECK(c.horizon == 10);
  CHECK(std::holds_alternative<ExplicitGraph>(c.graph));
  fs::remove_all(dir);
}

TEST_CASE("invalid config fields are rejected by name") {
  const json j = json::parse(R"({
    "graph": {"n_agents": 2, "edges": [[1, 2]]},
    "model": {"type": "linear", "F": [[[1]], [[1]]], "R": [[[1]], [[1]]]},
    "feasible_set": {"kind": "box", "lower": [-1], "upper": [1]},
    "theta_true": [0.25],
    "trials": 0
  })");
  CHECK_THROWS_WITH_AS(json_io::config_from_json(j), doctest::Contains("trials"),
                       ValidationError);
}

TEST_CASE("missing and unparsable files") {
  CHECK_THROWS_AS(json_io::read_json_file("/nonexistent/config.json"), IoError);
  const auto path = std::filesystem::temp_directory_path() / "ciwnls-bad.json";
  {
    std::ofstream out(path);
    out << "{not json";
  }
  CHECK_THROWS_WITH_AS(json_io::read_json_file(path), doctest::Contains("ciwnls-bad.json"),
                       ValidationError);
  std::filesystem::remove(path);
}

TEST_CASE("covariance JSON has row-major matrices and summaries") {
  const auto model = pairwise_sine_model(paper_sensing_pairs(), 2.0, 5);
  const auto rep = covariance_report(model, paper_theta_true(), 10, 20.0, 1.0);
  const json j = json_io::covariance_to_json(rep);
  CHECK(j["sigma_c"].size() == 5U);
  CHECK(j["sigma_c"][0].size() == 5U);
  CHECK(j["sigma_c"][1][2] == rep.sigma_c(1, 2));
  CHECK(j["trace_sigma_c"] == rep.trace_sigma_c());
  CHECK(j.contains("trace_sigma_d"));
  CHECK(j.contains("gap_norm"));
  CHECK(j.contains("gap_bound"));
}
