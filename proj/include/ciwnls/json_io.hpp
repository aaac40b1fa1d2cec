#pragma once

#include <filesystem>

#include <json.hpp>

#include "ciwnls/audit.hpp"
#include "ciwnls/centralized.hpp"
#include "ciwnls/experiment.hpp"
#include "ciwnls/graph.hpp"
#include "ciwnls/sensing.hpp"

// JSON forms of the library types. Agent and component indices are 1-based
// here and 0-based in memory.
namespace ciwnls::json_io {

using nlohmann::json;

json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j, const char* what);
json vector_to_json(const Vector& v);
Vector vector_from_json(const json& j, const char* what);

/// {"n_agents": N, "edges": [[n,l],...], "coords": [[x,y],...]}, n < l.
json graph_to_json(const NetworkGraph& g);
NetworkGraph graph_from_json(const json& j);

/// {"type":"pairwise_sine","pairs":[[i,j],...],"variance":v,"param_dim":M} or
/// {"type":"linear","F":[F_1,...],"R":[R_1,...]}.
json model_to_json(const SensingModel& model);
SensingModel model_from_json(const json& j);

/// {"kind":"box","lower":[...],"upper":[...]} or {"kind":"whole-space","dim":M}.
json set_to_json(const FeasibleSet& set);
FeasibleSet set_from_json(const json& j);

json covariance_to_json(const CovarianceReport& report);
json audit_to_json(const AuditReport& report);

json config_to_json(const ExperimentConfig& config);
/// Relative "model"/"feasible_set"/"graph" file references resolve against
/// `base_dir`; inline objects are accepted too.
ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir = {});

/// FNV-1a 64 of the canonical dump.
std::uint64_t config_hash(const ExperimentConfig& config);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const json& j, const std::filesystem::path& path);

}  // namespace ciwnls::json_io
