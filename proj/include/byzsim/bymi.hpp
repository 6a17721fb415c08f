#pragma once

// Byzantine machine identification: sample-splitting scores, the
// empirical-null threshold, per-node discoveries and the in-arc removals
// they imply.

#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "byzsim/linalg.hpp"
#include "byzsim/problem.hpp"
#include "byzsim/robust.hpp"
#include "byzsim/topology.hpp"

namespace byzsim::bymi {

using topology::NodeSet;

struct IdentityOmega {};
struct PcaProjection {
  double variance_fraction = 0.95;  // in (0, 1]
};
using OmegaSpec = std::variant<IdentityOmega, PcaProjection>;

std::string omega_name(const OmegaSpec& s);

// Identity, or the projector onto the leading principal directions of the
// centered gradients that capture at least `variance_fraction` of the total
// variance. A degenerate spread falls back to the identity and appends a
// message to `warnings` when given.
Matrix build_omega(const OmegaSpec& spec, std::span<const Vector> first_half_grads,
                   std::vector<std::string>* warnings = nullptr);

// (g1 - g_hat)^T omega (g2 - g_hat)
double score(std::span<const double> g1, std::span<const double> g2, std::span<const double> g_hat,
             const Matrix& omega);

struct Threshold {
  double r = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> detected;  // positions into the score list, ascending
};

// Smallest candidate r among the distinct nonzero |S| with
// #{S <= -r} / max(#{S >= r}, 1) <= alpha; detected = {S >= r}. An empty
// discovery set reports r = +inf. Throws unless alpha is in (0, 1).
Threshold threshold(std::span<const double> scores, double alpha);

// |detected ∩ normal| / max(|detected|, 1)
double false_discovery_proportion(const NodeSet& detected, const NodeSet& byz_ids);
// true_byz_neighbors ⊆ detected
bool sure_detection(const NodeSet& detected, const NodeSet& true_byz_neighbors);

struct NodeDetection {
  std::size_t node = 0;
  NodeSet neighbors;          // scored neighbors (self excluded)
  std::vector<double> scores;  // aligned with neighbors
  double threshold = std::numeric_limits<double>::infinity();
  NodeSet detected;
  NodeSet byzantine_neighbors;
  double fdp = 0.0;
  bool pa = true;
};

struct DetectionReport {
  std::vector<NodeDetection> nodes;  // one per normal node
  double avg_fdp = 0.0;
  double avg_pa = 1.0;
  std::vector<std::string> warnings;
};

struct GradientPair {
  Vector first;
  Vector second;
};

struct DetectionSetup {
  const topology::UndirectedGraph* graph = nullptr;
  std::span<const problem::NodeDataset> data;  // identification splits filled
  std::span<const Vector> thetas;              // parameters entering detection
  NodeSet byz_ids;
  problem::AttackSpec attack = problem::NoAttack{};
  std::uint64_t seed = 0;
  robust::RobustMeanEstimator estimator = robust::CoordinateMedian{};
  OmegaSpec omega = IdentityOmega{};
  double alpha = 0.2;
  bool include_self = true;  // node i's own first-half gradient enters g_hat and omega
};

// Honest gradient pair of one node over its two identification halves.
GradientPair identification_gradients(std::span<const double> theta, const problem::NodeDataset& data,
                                      std::uint64_t seed);

// Pairs as transmitted: message-level attackers send one attacked vector for both halves.
std::vector<GradientPair> transmitted_gradients(const DetectionSetup& setup);

DetectionReport detect(const DetectionSetup& setup);

enum class ByzantinePolicy { KeepAll, DropAll };

// Normal nodes cut in-arcs from their discoveries; Byzantine nodes follow `policy`.
topology::RemovalSets prune_decisions(const DetectionReport& report, const topology::UndirectedGraph& graph,
                                      const NodeSet& byz_ids, ByzantinePolicy policy);

// kind,i,j,score,threshold,detected,truth,fdp,pa: "pair" rows, then one "summary" row.
void write_detection_csv(std::ostream& os, const DetectionReport& report, const NodeSet& byz_ids);

}  // namespace byzsim::bymi
