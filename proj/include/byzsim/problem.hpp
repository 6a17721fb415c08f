#pragma once

// Synthetic decentralized least-squares task: data generation under the
// Huber contamination model, minibatch oracles, local dataset splits and
// message-level attacks.

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "byzsim/linalg.hpp"
#include "byzsim/topology.hpp"

namespace byzsim::problem {

using topology::NodeSet;

struct LinearTask {
  std::size_t d = 0;
  Vector theta_star;  // (1_s, 0, ..., 0) with s = floor(0.1 d)
  double noise_std = 1.0;

  static LinearTask make(std::size_t d, double noise_std = 1.0);
};

struct NodeDataset {
  std::size_t node_id = 0;
  Matrix x;  // N x d
  Vector y;  // N
  bool is_byzantine = false;
  std::vector<std::size_t> warmup_indices;
  std::vector<std::size_t> identification_indices;

  std::size_t size() const { return y.size(); }
  std::size_t dim() const { return x.cols(); }
};

// Byzantine samples regressed on theta_c = (mu_c 1_s, 0, ...), s = floor(s_r d).
struct ParamAttack {
  double mu_c = 5.0;
  double s_r = 0.1;
};

// Byzantine covariates become scale * x + shift * v_d; responses gain +response_bias.
struct DataAttack {
  double scale = 0.8;
  double shift = 3.0;
  double response_bias = 1.0;
};

// Outgoing gradient := mean_coef * clean_mean + eps, eps ~ N(nu, std^2 I),
// nu ~ N(0, offset_scale^2 std^2 I), std taken coordinatewise over normal nodes.
struct GradAttack {
  double mean_coef = 0.5;
  double offset_scale = 20.0;
};

// Outgoing gradient := -a * clean_mean.
struct IpmAttack {
  double a = 1.0;
};

struct NoAttack {};

using AttackSpec = std::variant<NoAttack, ParamAttack, DataAttack, GradAttack, IpmAttack>;

bool is_message_level(const AttackSpec& a);
bool is_data_level(const AttackSpec& a);
std::string attack_name(const AttackSpec& a);

struct GradientBatch {
  Vector vector;
  std::size_t batch_size = 0;
};

// Shared covariate shift direction: entries U(0,1), L2-normalized, one draw per run.
Vector shared_shift_direction(std::size_t d, std::uint64_t seed);

std::vector<NodeDataset> generate_network_data(const LinearTask& task, std::size_t m, std::size_t n_per_node,
                                               const NodeSet& byz_ids, const AttackSpec& attack,
                                               std::uint64_t seed);

// (1/|I|) sum_{u in I} x_u (x_u^T theta - y_u). Throws on an empty or out-of-range index set.
GradientBatch minibatch_gradient(std::span<const double> theta, const NodeDataset& data,
                                 std::span<const std::size_t> indices);

// (1/(2|I|)) sum_{u in I} (y_u - x_u^T theta)^2.
double minibatch_loss(std::span<const double> theta, const NodeDataset& data, std::span<const std::size_t> indices);

std::vector<std::size_t> all_indices(const NodeDataset& data);

// Random disjoint split: n identification samples, N - n warm-up samples.
// Throws on odd n or n >= N.
NodeDataset split_dataset(NodeDataset data, std::size_t n, std::uint64_t seed);

struct IdentificationHalves {
  std::vector<std::size_t> first;
  std::vector<std::size_t> second;
};

// Two equal random halves of the identification set (independent draw per node).
IdentificationHalves split_identification(const NodeDataset& data, std::uint64_t seed);

// Replaces the messages of byz_ids; throws for data-level attacks.
std::vector<Vector> apply_message_attack(const AttackSpec& attack, std::span<const Vector> clean,
                                         const NodeSet& byz_ids, std::uint64_t seed, std::uint64_t round);

// f(theta) = (1/m_g) sum_i f_i(theta) over the given (normal) datasets, held as a quadratic.
class GlobalObjective {
 public:
  // Throws std::runtime_error if the pooled design is singular.
  explicit GlobalObjective(std::span<const NodeDataset> normal);

  std::size_t dim() const { return b_.size(); }
  double value(std::span<const double> theta) const;
  Vector gradient(std::span<const double> theta) const;
  double optimality_gap(std::span<const double> theta) const;
  const Vector& minimizer() const { return minimizer_; }
  double condition_number() const { return cond_; }

 private:
  Eigen::MatrixXd hessian_;
  Vector b_;
  double c_ = 0.0;
  Vector minimizer_;
  double cond_ = 0.0;
};

}  // namespace byzsim::problem
