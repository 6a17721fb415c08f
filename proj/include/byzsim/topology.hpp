#pragma once

// Communication graphs, mixing matrices, in-arc pruning and the spectral
// quantities of the surviving row-stochastic block.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "byzsim/linalg.hpp"

namespace byzsim::topology {

using NodeSet = std::vector<std::size_t>;  // sorted, unique

class UndirectedGraph {
 public:
  UndirectedGraph() = default;
  // Throws std::invalid_argument on self-edges, duplicates or out-of-range endpoints.
  UndirectedGraph(std::size_t m, std::vector<std::pair<std::size_t, std::size_t>> edges);

  std::size_t size() const { return m_; }
  // Each pair stored as (min, max), sorted lexicographically.
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }
  const NodeSet& neighbors(std::size_t i) const { return adjacency_[i]; }
  std::size_t degree(std::size_t i) const { return adjacency_[i].size(); }
  bool has_edge(std::size_t u, std::size_t v) const;

  bool connected() const;
  // Connectivity of the subgraph induced by `nodes`.
  bool connected_on(const NodeSet& nodes) const;

 private:
  std::size_t m_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::vector<NodeSet> adjacency_;
};

class DirectedGraph {
 public:
  DirectedGraph() = default;
  // Arcs are (from, to). Throws on out-of-range endpoints or self-arcs.
  DirectedGraph(std::size_t m, std::vector<std::pair<std::size_t, std::size_t>> arcs);

  // Every undirected edge as two opposite arcs.
  static DirectedGraph from_undirected(const UndirectedGraph& g);
  // Arc j -> i for every i != j with w(i, j) > 0.
  static DirectedGraph from_support(const Matrix& w);

  std::size_t size() const { return m_; }
  const std::vector<std::pair<std::size_t, std::size_t>>& arcs() const { return arcs_; }
  const NodeSet& in_neighbors(std::size_t v) const { return in_[v]; }
  const NodeSet& out_neighbors(std::size_t u) const { return out_[u]; }
  bool has_arc(std::size_t from, std::size_t to) const;

 private:
  std::size_t m_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> arcs_;
  std::vector<NodeSet> in_;
  std::vector<NodeSet> out_;
};

// Nonnegative weights; row i holds the weights node i applies to its in-neighbors.
class MixingMatrix {
 public:
  MixingMatrix() = default;
  explicit MixingMatrix(Matrix w);

  const Matrix& weights() const { return w_; }
  std::size_t size() const { return w_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return w_(i, j); }

  double max_row_sum_error() const;
  double max_column_sum_error() const;
  double max_asymmetry() const;
  bool row_stochastic(double tol = 1e-12) const { return max_row_sum_error() <= tol; }
  bool doubly_stochastic(double tol = 1e-12) const {
    return row_stochastic(tol) && max_column_sum_error() <= tol;
  }

  MixingMatrix restricted_to(const NodeSet& nodes) const;

 private:
  Matrix w_;
};

// removals[i] = in-neighbors whose arcs into i are cut.
using RemovalSets = std::vector<NodeSet>;

struct SpectralProfile {
  Vector v1;               // left Perron vector, positive, sums to 1
  double rho = 0.0;        // observed per-step contraction of ||A^k - 1 v1^T||_2
  double c_const = 0.0;    // max_k ||A^k - 1 v1^T||_2 / rho^k over the observed window
  double w_const = 0.0;    // sup_k ||Diag(A^k)^{-1}||_2 over the observed window
  double lambda2 = 0.0;    // second largest eigenvalue modulus (reporting only)
  double v1_residual = 0.0;
  std::size_t power_iterations = 0;
  std::vector<double> decay;  // ||A^k - 1 v1^T||_2 for k = 0, 1, ...
};

UndirectedGraph gen_erdos_renyi(std::size_t m, double p, std::uint64_t seed);

MixingMatrix metropolis_weights(const UndirectedGraph& g);

std::pair<DirectedGraph, MixingMatrix> prune_and_reweight(const MixingMatrix& w_old,
                                                          const RemovalSets& removals);

// Components ordered by smallest member; members sorted.
std::vector<NodeSet> strongly_connected_components(const DirectedGraph& g);

std::optional<NodeSet> largest_closed_scc(const DirectedGraph& g);

// Throws std::invalid_argument unless `a` is square, row-stochastic and irreducible.
SpectralProfile spectral_profile(const MixingMatrix& a);

// m p (1 - beta0 - delta) - log m. Throws unless beta0 + delta < 1.
double connectivity_constant(double m, double p, double beta0, double delta);
// m p - log m, governing the number of isolated nodes of G(m, p).
double isolation_constant(double m, double p);

}  // namespace byzsim::topology
