#pragma once

// Monte Carlo estimate of how often the normal nodes form the closed SCC of
// the pruned graph, for several in-arc removal models.

#include <cstdint>
#include <string>

#include "byzsim/config.hpp"

namespace byzsim {

enum class RemovalModel {
  None,              // nothing removed
  Exact,             // every normal node cuts exactly its Byzantine neighbors
  DeleteAllNormal,   // every normal node cuts all of its in-arcs
  Pipeline,          // removals from the warm-up + detection phases
};

// "none", "exact", "delete_all_normal", "pipeline". Throws ConfigError otherwise.
RemovalModel parse_removal_model(const std::string& name);
std::string removal_model_name(RemovalModel model);

struct ConnectivityStudy {
  std::size_t m = 50;
  double p = 0.5;
  double rho = 0.2;
  RemovalModel model = RemovalModel::Exact;
  std::size_t trials = 200;
  std::uint64_t seed = 1;
  double delta = 0.1;
  std::size_t threads = 0;  // 0: hardware concurrency
  RunConfig pipeline;  // task, attack, warm-up and detection settings for RemovalModel::Pipeline
};

struct ConnectivityResult {
  std::size_t trials = 0;
  std::size_t successes = 0;
  double probability = 0.0;
  double c_isolation = 0.0;     // m p - log m
  double c_connectivity = 0.0;  // m p (1 - rho - delta) - log m
};

// Trial t draws the graph and Byzantine set from seed + t with no retry.
ConnectivityResult connectivity_study(const ConnectivityStudy& study);

}  // namespace byzsim
