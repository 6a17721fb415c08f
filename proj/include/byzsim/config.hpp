#pragma once

// Run configuration: one JSON object with fixed sections. Missing keys take
// the desk-scale defaults; unknown keys are rejected.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "byzsim/bymi.hpp"
#include "byzsim/problem.hpp"
#include "byzsim/robust.hpp"

namespace byzsim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  struct Topology {
    std::size_t m = 50;
    double p = 0.5;
    std::uint64_t seed = 1;
  } topology;
  struct Task {
    std::size_t d = 30;
    std::size_t N = 100;
    double noise = 1.0;
  } task;
  struct Byzantine {
    double rho = 0.2;
    problem::AttackSpec attack = problem::ParamAttack{5.0, 0.5};
  } byzantine;
  struct Warmup {
    robust::WarmupRule rule = robust::CenteredClip{};
    std::size_t k0 = 300;
    std::size_t batch = 10;
    std::optional<double> step;
  } warmup;
  struct Detection {
    robust::RobustMeanEstimator estimator = robust::Filtering{0.2};
    bymi::OmegaSpec omega = bymi::IdentityOmega{};
    double alpha = 0.2;
    std::optional<std::size_t> n;  // default N / 2
    bymi::ByzantinePolicy byzantine_policy = bymi::ByzantinePolicy::KeepAll;
    bool exact = false;  // prune the true Byzantine in-arcs instead of the discoveries
  } detection;
  struct Optimization {
    std::size_t K = 1500;
    std::size_t batch = 10;
    std::optional<std::size_t> t0;
  } optimization;
  struct Output {
    std::string dir = "out";
    int verbosity = 1;
  } output;

  std::size_t identification_size() const { return detection.n.value_or(task.N / 2); }
  std::size_t byzantine_count() const;
};

// Settings of the full-size synthetic experiments: m = 150, K = 3000.
RunConfig full_scale_defaults();

// Throws ConfigError on a violated invariant.
void validate(const RunConfig& cfg);

// Throws ConfigError on malformed text, unknown keys, wrong types or invalid values.
RunConfig parse_config(const std::string& text, const RunConfig& defaults = RunConfig{});
RunConfig load_config(const std::string& path, const RunConfig& defaults = RunConfig{});

// Fully resolved JSON (every key present) that parses back to the same config.
std::string serialize_config(const RunConfig& cfg, int indent = 2);

}  // namespace byzsim
