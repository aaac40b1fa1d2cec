#include "ciwnls/graph.hpp"

#include <algorithm>
#include <set>
#include <string>

namespace ciwnls {

NetworkGraph::NetworkGraph(int n_agents, std::vector<Edge> edges,
                           std::optional<Eigen::MatrixX2d> coords)
    : n_agents_(n_agents), coords_(std::move(coords)) {
  if (n_agents < 1) {
    throw InvalidGraphError("graph needs at least one agent, got " +
                            std::to_string(n_agents));
  }
  if (coords_ && coords_->rows() != n_agents) {
    throw InvalidGraphError("coords has " + std::to_string(coords_->rows()) +
                            " rows for " + std::to_string(n_agents) + " agents");
  }
  std::set<Edge> seen;
  for (auto& [u, v] : edges) {
    if (u < 0 || u >= n_agents || v < 0 || v >= n_agents) {
      throw InvalidGraphError("edge (" + std::to_string(u + 1) + "," +
                              std::to_string(v + 1) + ") has an endpoint outside [1.." +
                              std::to_string(n_agents) + "]");
    }
    if (u == v) {
      throw InvalidGraphError("self-loop at agent " + std::to_string(u + 1));
    }
    if (u > v) std::swap(u, v);
    if (!seen.insert({u, v}).second) {
      throw InvalidGraphError("duplicate edge (" + std::to_string(u + 1) + "," +
                              std::to_string(v + 1) + ")");
    }
  }
  edges_.assign(seen.begin(), seen.end());

  neighbors_.assign(n_agents, {});
  adjacency_ = Matrix::Zero(n_agents, n_agents);
  for (const auto& [u, v] : edges_) {
    neighbors_[u].push_back(v);
    neighbors_[v].push_back(u);
    adjacency_(u, v) = 1.0;
    adjacency_(v, u) = 1.0;
  }
  for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());

  laplacian_ = -adjacency_;
  for (int n = 0; n < n_agents; ++n) {
    laplacian_(n, n) = static_cast<double>(neighbors_[n].size());
  }

  Eigen::SelfAdjointEigenSolver<Matrix> solver(laplacian_, Eigen::EigenvaluesOnly);
  spectrum_ = solver.eigenvalues();
  fiedler_ = n_agents > 1 ? std::max(0.0, spectrum_(1)) : 0.0;
}

const std::vector<int>& NetworkGraph::neighbors(int n) const {
  if (n < 0 || n >= n_agents_) {
    throw IndexError("agent " + std::to_string(n + 1) + " outside [1.." +
                     std::to_string(n_agents_) + "]");
  }
  return neighbors_[n];
}

NetworkGraph build_graph(int n_agents, const std::vector<Edge>& edges) {
  return NetworkGraph(n_agents, edges);
}

NetworkGraph generate_random_geometric(int n_agents, double radius, Rng& rng,
                                       int max_attempts) {
  if (n_agents < 1) {
    throw ValidationError("--n: need at least one agent");
  }
  if (!(radius > 0.0)) {
    throw ValidationError("--radius: must be positive, got " + std::to_string(radius));
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r2 = radius * radius;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    Eigen::MatrixX2d pts(n_agents, 2);
    for (int n = 0; n < n_agents; ++n) {
      pts(n, 0) = unit(rng);
      pts(n, 1) = unit(rng);
    }
    std::vector<Edge> edges;
    for (int u = 0; u < n_agents; ++u) {
      for (int v = u + 1; v < n_agents; ++v) {
        if ((pts.row(u) - pts.row(v)).squaredNorm() <= r2) edges.emplace_back(u, v);
      }
    }
    NetworkGraph g(n_agents, std::move(edges), pts);
    if (g.connected()) return g;
  }
  throw GenerationError("no connected random geometric graph with N=" +
                            std::to_string(n_agents) + ", radius=" +
                            std::to_string(radius) + " after " +
                            std::to_string(max_attempts) + " attempts",
                        max_attempts);
}

Vector kron_laplacian_apply(const NetworkGraph& graph, const Vector& x,
                            int param_dim) {
  const int n = graph.n_agents();
  if (x.size() != static_cast<Eigen::Index>(n) * param_dim) {
    throw ValidationError("stacked vector has size " + std::to_string(x.size()) +
                          ", expected " + std::to_string(n * param_dim));
  }
  // Agent-major stacking is the column-major layout of an M x N matrix.
  Eigen::Map<const Matrix> blocks(x.data(), param_dim, n);
  Matrix out = blocks * graph.laplacian().transpose();
  return Eigen::Map<Vector>(out.data(), out.size());
}

}  // namespace ciwnls
