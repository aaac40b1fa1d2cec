#include "ciwnls/json_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace ciwnls::json_io {

namespace {

const json& field(const json& j, const char* key, const char* where) {
  if (!j.is_object() || !j.contains(key)) {
    throw ValidationError(std::string(where) + ": missing \"" + key + "\"");
  }
  return j.at(key);
}

double number(const json& j, const char* what) {
  if (!j.is_number()) throw ValidationError(std::string(what) + ": expected a number");
  return j.get<double>();
}

long integer(const json& j, const char* what) {
  if (!j.is_number_integer()) throw ValidationError(std::string(what) + ": expected an integer");
  return j.get<long>();
}

// Non-finite values have no JSON literal; they serialize as null.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const char* what) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) {
    throw ValidationError(std::string(what) + ": expected a non-empty array of rows");
  }
  // A flat array is a single row.
  if (j.front().is_number()) {
    Matrix m(1, static_cast<Eigen::Index>(j.size()));
    for (std::size_t k = 0; k < j.size(); ++k) m(0, static_cast<Eigen::Index>(k)) = number(j[k], what);
    return m;
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ValidationError(std::string(what) + ": ragged matrix rows");
    }
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = number(row[static_cast<std::size_t>(k)], what);
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(finite_or_null(v(i)));
  return out;
}

Vector vector_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty()) {
    throw ValidationError(std::string(what) + ": expected a non-empty array");
  }
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v(static_cast<Eigen::Index>(k)) = number(j[k], what);
  return v;
}

json graph_to_json(const NetworkGraph& g) {
  json edges = json::array();
  for (const auto& [u, v] : g.edges()) edges.push_back({u + 1, v + 1});
  json out = {{"n_agents", g.n_agents()}, {"edges", edges}};
  if (g.coords()) out["coords"] = matrix_to_json(*g.coords());
  return out;
}

NetworkGraph graph_from_json(const json& j) {
  const int n = static_cast<int>(integer(field(j, "n_agents", "graph"), "graph.n_agents"));
  std::vector<Edge> edges;
  const json& e = field(j, "edges", "graph");
  if (!e.is_array()) throw ValidationError("graph.edges: expected an array of pairs");
  for (const auto& pair : e) {
    if (!pair.is_array() || pair.size() != 2) {
      throw ValidationError("graph.edges: every edge must be a pair [n, l]");
    }
    edges.emplace_back(static_cast<int>(integer(pair[0], "graph.edges")) - 1,
                       static_cast<int>(integer(pair[1], "graph.edges")) - 1);
  }
  std::optional<Eigen::MatrixX2d> coords;
  if (j.contains("coords") && !j["coords"].is_null()) {
    const Matrix c = matrix_from_json(j["coords"], "graph.coords");
    if (c.cols() != 2) throw ValidationError("graph.coords: expected [x, y] rows");
    coords = c;
  }
  return NetworkGraph(n, std::move(edges), std::move(coords));
}

json model_to_json(const SensingModel& model) {
  bool all_sine = true;
  bool all_linear = true;
  for (int n = 0; n < model.n_agents(); ++n) {
    all_sine = all_sine && std::holds_alternative<SineSumSensor>(model.sensor(n));
    all_linear = all_linear && std::holds_alternative<LinearSensor>(model.sensor(n));
  }
  if (all_sine) {
    const double variance = model.noise_cov(0)(0, 0);
    bool uniform = true;
    json pairs = json::array();
    for (int n = 0; n < model.n_agents(); ++n) {
      const auto& s = std::get<SineSumSensor>(model.sensor(n));
      pairs.push_back({s.i + 1, s.j + 1});
      uniform = uniform && model.noise_cov(n)(0, 0) == variance;
    }
    if (uniform) {
      return {{"type", "pairwise_sine"},
              {"pairs", pairs},
              {"variance", variance},
              {"param_dim", model.param_dim()}};
    }
  }
  if (all_linear) {
    json F = json::array();
    json R = json::array();
    for (int n = 0; n < model.n_agents(); ++n) {
      F.push_back(matrix_to_json(std::get<LinearSensor>(model.sensor(n)).F));
      R.push_back(matrix_to_json(model.noise_cov(n)));
    }
    return {{"type", "linear"}, {"F", F}, {"R", R}};
  }
  throw ValidationError("model has no JSON form (custom or mixed sensors)");
}

SensingModel model_from_json(const json& j) {
  const json& type = field(j, "type", "model");
  if (type == "pairwise_sine") {
    std::vector<std::pair<int, int>> pairs;
    const json& p = field(j, "pairs", "model");
    if (!p.is_array()) throw ValidationError("model.pairs: expected an array of pairs");
    for (const auto& pair : p) {
      if (!pair.is_array() || pair.size() != 2) {
        throw ValidationError("model.pairs: every entry must be a pair [i, j]");
      }
      pairs.emplace_back(static_cast<int>(integer(pair[0], "model.pairs")),
                         static_cast<int>(integer(pair[1], "model.pairs")));
    }
    return pairwise_sine_model(pairs, number(field(j, "variance", "model"), "model.variance"),
                               static_cast<int>(integer(field(j, "param_dim", "model"),
                                                        "model.param_dim")));
  }
  if (type == "linear") {
    const json& F = field(j, "F", "model");
    const json& R = field(j, "R", "model");
    if (!F.is_array() || !R.is_array() || F.size() != R.size()) {
      throw ValidationError("model: \"F\" and \"R\" must be arrays of equal length");
    }
    std::vector<Matrix> fs;
    std::vector<Matrix> rs;
    for (std::size_t n = 0; n < F.size(); ++n) {
      fs.push_back(matrix_from_json(F[n], "model.F"));
      rs.push_back(matrix_from_json(R[n], "model.R"));
    }
    return linear_model(fs, rs);
  }
  throw ValidationError("model.type: expected \"pairwise_sine\" or \"linear\"");
}

json set_to_json(const FeasibleSet& set) {
  if (set.bounded()) {
    return {{"kind", "box"},
            {"lower", vector_to_json(set.lower())},
            {"upper", vector_to_json(set.upper())}};
  }
  return {{"kind", "whole-space"}, {"dim", set.dim()}};
}

FeasibleSet set_from_json(const json& j) {
  const json& kind = field(j, "kind", "feasible set");
  if (kind == "box") {
    return FeasibleSet::box(vector_from_json(field(j, "lower", "feasible set"), "set.lower"),
                            vector_from_json(field(j, "upper", "feasible set"), "set.upper"));
  }
  if (kind == "whole-space") {
    return FeasibleSet::whole_space(
        static_cast<int>(integer(field(j, "dim", "feasible set"), "set.dim")));
  }
  throw ValidationError("feasible set kind: expected \"box\" or \"whole-space\"");
}

json covariance_to_json(const CovarianceReport& r) {
  json out = {
      {"gamma", matrix_to_json(r.gamma)},
      {"gamma_eigenvalues", vector_to_json(r.gamma_eigenvalues)},
      {"sigma_c", matrix_to_json(r.sigma_c)},
      {"trace_sigma_c", r.trace_sigma_c()},
  };
  if (r.a) out["a"] = *r.a;
  if (r.sigma_d) {
    out["sigma_d"] = matrix_to_json(*r.sigma_d);
    out["trace_sigma_d"] = *r.trace_sigma_d();
  }
  if (r.gap_norm) out["gap_norm"] = *r.gap_norm;
  if (r.k_star_max) out["k_star_max"] = *r.k_star_max;
  if (r.gap_bound) out["gap_bound"] = *r.gap_bound;
  return out;
}

json audit_to_json(const AuditReport& r) {
  json lip = json::array();
  for (double k : r.lipschitz) lip.push_back(finite_or_null(k));
  json out = {
      {"lipschitz", lip},
      {"k_star_max", finite_or_null(r.k_star_max)},
      {"monotonicity", r.monotonicity},
      {"monotonicity_witness", {vector_to_json(r.monotonicity_witness_theta),
                                vector_to_json(r.monotonicity_witness_theta_prime)}},
      {"observability_ok", r.observability_ok},
      {"observability_margin", r.observability_margin},
      {"observability_witness", {vector_to_json(r.observability_witness_theta),
                                 vector_to_json(r.observability_witness_theta_prime)}},
      {"gamma_min_eig", r.gamma_min_eig},
      {"gamma_min_witness", vector_to_json(r.gamma_min_witness)},
      {"epsilon1", r.epsilon1},
      {"delta1_max", r.delta1_max},
      {"a_min", finite_or_null(r.a_min)},
      {"positivity_tolerance", r.positivity_tolerance},
      {"noise_is_gaussian", r.noise_is_gaussian},
      {"sample_counts",
       {{"pairs", r.pair_samples},
        {"lipschitz_per_agent", r.lipschitz_samples},
        {"gamma", r.gamma_samples}}},
      {"grid_resolution", {{"pairs", r.pair_grid_points}, {"gamma", r.gamma_grid_points}}},
      {"seed", r.seed},
      {"assumptions",
       {{"M1", r.m1_ok()},
        {"M2", r.m2_ok()},
        {"M3", r.m3_ok()},
        {"M4", r.m4_ok()},
        {"M5", r.m5_ok() ? json(*r.m5_ok()) : json(nullptr)},
        {"M6", r.m6_ok()},
        {"M7", r.m7_ok()}}},
  };
  if (r.fiedler) out["fiedler"] = *r.fiedler;
  return out;
}

json config_to_json(const ExperimentConfig& c) {
  json graph = std::visit(
      [](const auto& g) -> json {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, ExplicitGraph>) {
          json edges = json::array();
          for (const auto& [u, v] : g.edges) edges.push_back({u + 1, v + 1});
          return {{"type", "explicit"}, {"n_agents", g.n_agents}, {"edges", edges}};
        } else {
          return {{"type", "rgg"}, {"n_agents", g.n_agents}, {"radius", g.radius}};
        }
      },
      c.graph);
  json schedule = {{"delta1", c.schedule.delta1}, {"epsilon1", c.schedule.epsilon1}};
  schedule["a"] = c.schedule.a ? json(*c.schedule.a) : json("auto");
  schedule["b"] = c.schedule.b ? json(*c.schedule.b) : json("auto");
  json out = {
      {"graph", graph},
      {"model", model_to_json(c.model)},
      {"feasible_set", set_to_json(c.feasible_set)},
      {"theta_true", vector_to_json(c.theta_true)},
      {"schedule", schedule},
      {"horizon", c.horizon},
      {"trials", c.trials},
      {"master_seed", c.master_seed},
      {"record_stride", {{"dense_until", c.record_stride.dense_until},
                         {"every", c.record_stride.every}}},
      {"run_centralized", c.run_centralized},
      {"centralized_checkpoints", c.centralized_checkpoints},
      {"centralized_starts", c.centralized_starts},
      {"run_audit", c.run_audit},
      {"audit", {{"pair_samples", c.audit.pair_samples},
                 {"lipschitz_samples", c.audit.lipschitz_samples},
                 {"gamma_grid_points", c.audit.gamma_grid_points},
                 {"gamma_random_samples", c.audit.gamma_random_samples},
                 {"seed", c.audit.seed}}},
      {"output_dir", c.output_dir},
      {"jobs", c.jobs},
  };
  if (c.initial) out["initial"] = vector_to_json(*c.initial);
  if (c.centralized_trials) out["centralized_trials"] = *c.centralized_trials;
  return out;
}

namespace {

json resolve_ref(const json& j, const std::filesystem::path& base) {
  if (j.is_string()) return read_json_file(base / j.get<std::string>());
  return j;
}

std::optional<double> auto_or_number(const json& s, const char* key) {
  if (!s.contains(key) || s[key].is_null() || s[key] == "auto") return std::nullopt;
  return number(s[key], key);
}

}  // namespace

ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ValidationError("config: expected a JSON object");
  const json g = resolve_ref(field(j, "graph", "config"), base_dir);
  GraphSpec graph;
  const std::string gtype = g.value("type", g.contains("radius") ? "rgg" : "explicit");
  if (gtype == "rgg") {
    graph = RandomGeometricLaw{
        static_cast<int>(integer(field(g, "n_agents", "config.graph"), "graph.n_agents")),
        number(field(g, "radius", "config.graph"), "graph.radius")};
  } else if (gtype == "explicit") {
    const NetworkGraph parsed = graph_from_json(g);
    graph = ExplicitGraph{parsed.n_agents(), parsed.edges()};
  } else {
    throw ValidationError("config.graph.type: expected \"rgg\" or \"explicit\"");
  }

  ExperimentConfig c{
      .graph = graph,
      .model = model_from_json(resolve_ref(field(j, "model", "config"), base_dir)),
      .feasible_set = set_from_json(resolve_ref(field(j, "feasible_set", "config"), base_dir)),
      .theta_true = vector_from_json(field(j, "theta_true", "config"), "config.theta_true"),
  };
  if (j.contains("schedule")) {
    const json& s = j["schedule"];
    c.schedule.a = auto_or_number(s, "a");
    c.schedule.b = auto_or_number(s, "b");
    if (s.contains("delta1")) c.schedule.delta1 = number(s["delta1"], "schedule.delta1");
    if (s.contains("epsilon1")) c.schedule.epsilon1 = number(s["epsilon1"], "schedule.epsilon1");
  }
  if (j.contains("initial")) c.initial = vector_from_json(j["initial"], "config.initial");
  if (j.contains("horizon")) c.horizon = integer(j["horizon"], "config.horizon");
  if (j.contains("trials")) c.trials = static_cast<int>(integer(j["trials"], "config.trials"));
  if (j.contains("master_seed")) {
    if (!j["master_seed"].is_number_unsigned() && !j["master_seed"].is_number_integer()) {
      throw ValidationError("config.master_seed: expected an integer");
    }
    c.master_seed = j["master_seed"].get<std::uint64_t>();
  }
  if (j.contains("record_stride")) {
    const json& r = j["record_stride"];
    if (r.contains("dense_until")) c.record_stride.dense_until = integer(r["dense_until"], "record_stride.dense_until");
    if (r.contains("every")) c.record_stride.every = integer(r["every"], "record_stride.every");
  }
  if (j.contains("run_centralized")) c.run_centralized = j["run_centralized"].get<bool>();
  if (j.contains("centralized_trials")) {
    c.centralized_trials = static_cast<int>(integer(j["centralized_trials"], "config.centralized_trials"));
  }
  if (j.contains("centralized_checkpoints")) {
    c.centralized_checkpoints =
        static_cast<int>(integer(j["centralized_checkpoints"], "config.centralized_checkpoints"));
  }
  if (j.contains("centralized_starts")) {
    c.centralized_starts = static_cast<int>(integer(j["centralized_starts"], "config.centralized_starts"));
  }
  if (j.contains("run_audit")) c.run_audit = j["run_audit"].get<bool>();
  if (j.contains("audit")) {
    const json& a = j["audit"];
    if (a.contains("pair_samples")) c.audit.pair_samples = static_cast<int>(integer(a["pair_samples"], "audit.pair_samples"));
    if (a.contains("lipschitz_samples")) c.audit.lipschitz_samples = static_cast<int>(integer(a["lipschitz_samples"], "audit.lipschitz_samples"));
    if (a.contains("gamma_grid_points")) c.audit.gamma_grid_points = static_cast<int>(integer(a["gamma_grid_points"], "audit.gamma_grid_points"));
    if (a.contains("gamma_random_samples")) c.audit.gamma_random_samples = static_cast<int>(integer(a["gamma_random_samples"], "audit.gamma_random_samples"));
    if (a.contains("seed")) c.audit.seed = a["seed"].get<std::uint64_t>();
  }
  if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
  if (j.contains("jobs")) c.jobs = static_cast<int>(integer(j["jobs"], "config.jobs"));
  validate(c);
  return c;
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config_to_json(config).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_json_file(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write to " + path.string() + " failed");
}

}  // namespace ciwnls::json_io
