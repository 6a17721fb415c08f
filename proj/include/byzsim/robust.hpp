#pragma once

// Robust mean estimators (used to centre detection scores) and the
// neighbor-aggregation rules available to the warm-up phase.

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "byzsim/linalg.hpp"

namespace byzsim::robust {

struct CoordinateMedian {};
struct TrimmedMean {
  double fraction = 0.1;  // dropped from each tail, in [0, 0.5)
};
struct Filtering {
  double eps = 0.1;  // contamination level, in [0, 0.5)
};

using RobustMeanEstimator = std::variant<CoordinateMedian, TrimmedMean, Filtering>;

std::string estimator_name(const RobustMeanEstimator& e);

// Even counts use the midpoint of the two central values.
Vector coordinate_median(std::span<const Vector> vectors);
Vector trimmed_mean(std::span<const Vector> vectors, double fraction);

// Spectral filtering: soft-downweights points along the top eigenvector of the
// weighted covariance, keeping weights inside the capped simplex
// {w : 0 <= w_j <= 1 / ((1 - eps) n), sum w = 1}. Stops once the top eigenvalue
// falls by no more than 1% in a round, or after ceil(eps n) + 1 rounds.
Vector filtering_mean(std::span<const Vector> vectors, double eps);

Vector estimate_mean(const RobustMeanEstimator& est, std::span<const Vector> vectors);

// Centered clipping around the node's own parameter, `rounds` times.
struct CenteredClip {
  double tau = 1.0;
  std::size_t rounds = 3;
};
// Drop the b neighbors farthest from the running weighted mean, one at a time.
struct IosRemove {
  std::size_t b = 1;
};
// Accept neighbors within gamma * lambda^k * ||theta_i||.
struct BalanceDecay {
  double gamma = 1.0;
  double lambda = 0.99;
};
// Among the b nearest neighbors keep those whose loss on the node's batch is
// no larger than its own; if none qualifies keep the lowest-loss one.
struct UbarSelect {
  std::size_t b = 1;
};

using WarmupRule = std::variant<CenteredClip, IosRemove, BalanceDecay, UbarSelect>;

std::string rule_name(const WarmupRule& r);

struct Neighborhood {
  std::span<const double> self_theta;
  std::vector<std::span<const double>> neighbor_thetas;
  // Optional [self, neighbor_0, ...] weights summing to 1; uniform when empty.
  std::vector<double> weights;
  // Optional UbarSelect inputs: losses of each parameter on the node's batch.
  double self_loss = 0.0;
  std::vector<double> neighbor_losses;
  // BalanceDecay schedule position.
  std::size_t iteration = 0;
};

// Throws std::invalid_argument on an empty neighborhood or b >= neighbor count.
Vector warmup_aggregate(const WarmupRule& rule, const Neighborhood& nb);

// Validates parameter ranges; throws std::invalid_argument.
void validate(const RobustMeanEstimator& est);
void validate(const WarmupRule& rule);

}  // namespace byzsim::robust
