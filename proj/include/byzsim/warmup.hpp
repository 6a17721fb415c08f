#pragma once

// Warm-up phase: synchronous robust decentralized SGD on the warm-up splits.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "byzsim/problem.hpp"
#include "byzsim/robust.hpp"
#include "byzsim/topology.hpp"

namespace byzsim::warmup {

struct Network {
  const topology::UndirectedGraph* graph = nullptr;
  const topology::MixingMatrix* weights = nullptr;  // passed to weighted rules
  std::span<const problem::NodeDataset> data;       // warm-up splits filled
  topology::NodeSet byz_ids;
  problem::AttackSpec attack = problem::NoAttack{};
  std::uint64_t seed = 0;
};

struct Options {
  std::size_t k0 = 300;
  std::size_t batch = 10;
  std::optional<double> step;  // default 0.5 / sqrt(k0)
  std::optional<std::vector<Vector>> initial;  // default zeros
};

struct Result {
  std::vector<Vector> thetas;
  // sum_{j normal} ||theta_j - mean_normal||^2 after each round; entry 0 is the start.
  std::vector<double> consensus_trace;
  double step = 0.0;
};

double default_step(std::size_t k0);

double consensus_error(std::span<const Vector> thetas, const topology::NodeSet& nodes);

// Each round: gradients at the current iterates (Byzantine ones replaced for
// message-level attacks), neighbor aggregation via `rule`, then
// theta <- aggregate - step * gradient. Isolated nodes skip aggregation.
Result run_warmup(const Network& net, const robust::WarmupRule& rule, const Options& opt);

}  // namespace byzsim::warmup
