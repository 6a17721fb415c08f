#pragma once

// Optimization phase: Perron-vector tracking and rescaled decentralized SGD
// over the pruned row-stochastic network, with per-round metrics.

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "byzsim/linalg.hpp"
#include "byzsim/problem.hpp"
#include "byzsim/topology.hpp"

namespace byzsim::drsgd {

using topology::NodeSet;

struct OptimizerState {
  std::vector<Vector> thetas;  // one per node of the pruned graph
  Matrix y;                    // row i is y_i
  std::size_t k = 0;
  double eta = 0.0;
};

struct MetricsRow {
  std::size_t k = 0;
  double eta = 0.0;
  double gap = 0.0;
  double grad_norm_bar = 0.0;
  double grad_norm_tilde = 0.0;
  double consensus_mk = 0.0;
  double tracking_residual = 0.0;
};

using RunMetrics = std::vector<MetricsRow>;

// Rows of a^t0. Throws if t0 == 0 or a is not row-stochastic.
Matrix init_y(const topology::MixingMatrix& a, std::size_t t0);

// ceil(log(m_g / (48 c^2 w^4 ||v1||^2)) / (2 log rho)) clamped to [1, 50].
std::size_t default_t0(const topology::SpectralProfile& profile, std::size_t m_g);

// One synchronous round. y <- W y; theta_i <- sum_j W(i,j) theta_j - eta g_i / [y_i]_i
// using the updated y. Nodes in `rescaled` must keep [y_i]_i > 1e-12 (std::runtime_error
// otherwise); the others take an unscaled step.
OptimizerState step(const OptimizerState& state, const topology::MixingMatrix& w, std::span<const Vector> gradients,
                    double eta, const NodeSet& rescaled);
// Every node rescaled.
OptimizerState step(const OptimizerState& state, const topology::MixingMatrix& w, std::span<const Vector> gradients,
                    double eta);

// theta_tilde = sum_{i in scc} v1_i theta_i.
Vector weighted_average(std::span<const Vector> thetas, const NodeSet& scc, std::span<const double> v1);

// Metrics over the closed SCC; v1 is indexed like `scc`. The objective is
// evaluated on the normal population.
MetricsRow compute_metrics(const OptimizerState& state, const NodeSet& scc, std::span<const double> v1,
                           const problem::GlobalObjective& objective);

struct Network {
  const topology::MixingMatrix* weights = nullptr;  // pruned, full node set
  NodeSet scc;                                      // closed SCC
  const topology::SpectralProfile* profile = nullptr;  // of the SCC block
  std::span<const problem::NodeDataset> data;
  NodeSet byz_ids;
  problem::AttackSpec attack = problem::NoAttack{};
  std::uint64_t seed = 0;
  const problem::GlobalObjective* objective = nullptr;
};

struct Options {
  std::size_t iterations = 1500;
  std::size_t batch = 10;
  std::optional<std::size_t> t0;
  std::optional<double> eta;                   // default 1 / sqrt(m_g K)
  std::optional<std::vector<Vector>> initial;  // default zeros
};

struct Result {
  OptimizerState state;
  RunMetrics metrics;  // rows k = 0..K
  std::size_t t0 = 0;
  double eta = 0.0;
};

double default_eta(std::size_t m_g, std::size_t iterations);

// Throws std::runtime_error when the SCC is empty.
Result run_optimization(const Network& net, const Options& opt);

void write_metrics_csv(std::ostream& os, const RunMetrics& metrics);

}  // namespace byzsim::drsgd
