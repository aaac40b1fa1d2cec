#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "ciwnls/common.hpp"

namespace ciwnls {

/// λ₂ above this value declares the graph connected.
inline constexpr double kConnectivityTolerance = 1e-8;
/// Full redraws attempted by generate_random_geometric before giving up.
inline constexpr int kRggRetryBudget = 10000;

using Edge = std::pair<int, int>;

/// Undirected simple communication graph. Agents are 0-based here; the JSON
/// and CLI layers convert to and from 1-based labels.
///
/// Immutable after construction, so one instance can be shared by
/// concurrently running trials.
class NetworkGraph {
 public:
  NetworkGraph(int n_agents, std::vector<Edge> edges,
               std::optional<Eigen::MatrixX2d> coords = std::nullopt);

  int n_agents() const { return n_agents_; }
  /// Edges with first < second, sorted lexicographically.
  const std::vector<Edge>& edges() const { return edges_; }
  /// Ω_n in ascending order.
  const std::vector<int>& neighbors(int n) const;
  int degree(int n) const { return static_cast<int>(neighbors(n).size()); }

  const Matrix& adjacency() const { return adjacency_; }
  const Matrix& laplacian() const { return laplacian_; }
  /// Laplacian eigenvalues in ascending order.
  const Vector& spectrum() const { return spectrum_; }
  /// Second-smallest Laplacian eigenvalue, clamped at zero. Zero for N = 1.
  double fiedler() const { return fiedler_; }
  /// Largest Laplacian eigenvalue λ_N(L).
  double spectral_radius() const { return spectrum_(spectrum_.size() - 1); }
  bool connected() const {
    return n_agents_ == 1 || fiedler_ > kConnectivityTolerance;
  }

  const std::optional<Eigen::MatrixX2d>& coords() const { return coords_; }

 private:
  int n_agents_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> neighbors_;
  Matrix adjacency_;
  Matrix laplacian_;
  Vector spectrum_;
  double fiedler_ = 0.0;
  std::optional<Eigen::MatrixX2d> coords_;
};

/// Validates the edge list (0-based endpoints) and builds L = D − A.
/// Throws InvalidGraphError on self-loops, out-of-range endpoints or
/// duplicate pairs.
NetworkGraph build_graph(int n_agents, const std::vector<Edge>& edges);

inline const std::vector<int>& neighbors(const NetworkGraph& graph, int n) {
  return graph.neighbors(n);
}

inline double fiedler_value(const NetworkGraph& graph) { return graph.fiedler(); }

/// Samples N points uniformly in the unit square and links pairs at distance
/// <= radius, redrawing everything until the graph is connected.
NetworkGraph generate_random_geometric(int n_agents, double radius, Rng& rng,
                                       int max_attempts = kRggRetryBudget);

/// (L ⊗ I_M) x for an agent-major stacked vector.
Vector kron_laplacian_apply(const NetworkGraph& graph, const Vector& x,
                            int param_dim);

}  // namespace ciwnls
