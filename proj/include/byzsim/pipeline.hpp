#pragma once

// End-to-end run: topology and data, warm-up, detection, pruning, spectral
// profile of the surviving block, optimization, and the run artifacts.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "byzsim/bymi.hpp"
#include "byzsim/config.hpp"
#include "byzsim/drsgd.hpp"
#include "byzsim/problem.hpp"
#include "byzsim/topology.hpp"

namespace byzsim {

// A failure inside one phase; phase() names it.
class PhaseError : public std::runtime_error {
 public:
  PhaseError(std::string phase, const std::string& what)
      : std::runtime_error(phase + ": " + what), phase_(std::move(phase)) {}
  const std::string& phase() const { return phase_; }

 private:
  std::string phase_;
};

inline constexpr std::size_t kMaxTopologyAttempts = 20;

struct Scenario {
  topology::UndirectedGraph graph;
  topology::NodeSet byz_ids;
  std::uint64_t topology_seed = 0;  // seed that produced graph and byz_ids
  std::size_t retries = 0;
};

// G connected and G restricted to the normal nodes connected.
bool admissible(const topology::UndirectedGraph& g, const topology::NodeSet& byz_ids);

// Uniform draw of round(rho m) Byzantine ids.
topology::NodeSet sample_byzantine(std::size_t m, std::size_t count, std::uint64_t seed);

// Tries topology seeds seed, seed + 1, ... until the draw is admissible.
// Throws PhaseError("topology") after kMaxTopologyAttempts failures.
Scenario sample_scenario(const RunConfig& cfg);

struct PipelineResult {
  RunConfig config;
  Scenario scenario;
  std::vector<problem::NodeDataset> data;
  std::vector<double> warmup_consensus;
  bymi::DetectionReport detection;
  bool detected = false;  // detection phase finished
  topology::RemovalSets removals;
  topology::DirectedGraph pruned;
  topology::MixingMatrix pruned_weights;
  topology::NodeSet scc;
  bool scc_is_normal_set = false;
  topology::SpectralProfile profile;
  double objective_condition = 0.0;
  drsgd::Result optimization;
  bool optimized = false;
};

enum class Stage { Detection, Scc, Optimization };

struct PipelineOptions {
  Stage last = Stage::Optimization;  // last phase to execute
};

// Deterministic in cfg. Throws PhaseError tagged with the failing phase.
PipelineResult run_pipeline(const RunConfig& cfg, const PipelineOptions& opt = {});
// Same phases on a given graph and Byzantine set (no admissibility check).
PipelineResult run_pipeline_on(const RunConfig& cfg, Scenario scenario, const PipelineOptions& opt = {});
// As run_pipeline, but fills `res` in place so a PhaseError leaves the
// finished phases readable.
void run_pipeline_into(const RunConfig& cfg, PipelineResult& res, const PipelineOptions& opt = {});

// detection.csv, metrics.csv, scc.txt and run.json under dir (created if missing).
void write_artifacts(const PipelineResult& res, const std::filesystem::path& dir);

std::string manifest_json(const PipelineResult& res);

}  // namespace byzsim
