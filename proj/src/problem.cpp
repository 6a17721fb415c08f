#include "byzsim/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "byzsim/rng.hpp"
#include "byzsim/simd.hpp"

namespace byzsim::problem {

LinearTask LinearTask::make(std::size_t d, double noise_std) {
  if (d == 0) throw std::invalid_argument("LinearTask: d must be positive");
  LinearTask t;
  t.d = d;
  t.noise_std = noise_std;
  t.theta_star.assign(d, 0.0);
  const auto s = static_cast<std::size_t>(std::floor(0.1 * static_cast<double>(d)));
  for (std::size_t k = 0; k < s; ++k) t.theta_star[k] = 1.0;
  return t;
}

bool is_message_level(const AttackSpec& a) {
  return std::holds_alternative<GradAttack>(a) || std::holds_alternative<IpmAttack>(a);
}

bool is_data_level(const AttackSpec& a) {
  return std::holds_alternative<ParamAttack>(a) || std::holds_alternative<DataAttack>(a);
}

std::string attack_name(const AttackSpec& a) {
  struct V {
    std::string operator()(const NoAttack&) const { return "none"; }
    std::string operator()(const ParamAttack&) const { return "param"; }
    std::string operator()(const DataAttack&) const { return "data"; }
    std::string operator()(const GradAttack&) const { return "grad"; }
    std::string operator()(const IpmAttack&) const { return "ipm"; }
  };
  return std::visit(V{}, a);
}

Vector shared_shift_direction(std::size_t d, std::uint64_t seed) {
  Rng rng(seed, Stream::SharedDirection);
  Vector v(d);
  for (auto& x : v) x = rng.uniform();
  const double n = norm(v);
  for (auto& x : v) x /= n;
  return v;
}

std::vector<NodeDataset> generate_network_data(const LinearTask& task, std::size_t m, std::size_t n_per_node,
                                               const NodeSet& byz_ids, const AttackSpec& attack,
                                               std::uint64_t seed) {
  if (2 * byz_ids.size() >= m) throw std::invalid_argument("generate_network_data: Byzantine ratio must be below 1/2");
  for (auto b : byz_ids)
    if (b >= m) throw std::invalid_argument("generate_network_data: Byzantine id out of range");
  const std::size_t d = task.d;

  Vector theta_c;
  if (const auto* pa = std::get_if<ParamAttack>(&attack)) {
    theta_c.assign(d, 0.0);
    const auto s = static_cast<std::size_t>(std::floor(pa->s_r * static_cast<double>(d)));
    for (std::size_t k = 0; k < std::min(s, d); ++k) theta_c[k] = pa->mu_c;
  }
  Vector v_d;
  if (std::holds_alternative<DataAttack>(attack)) v_d = shared_shift_direction(d, seed);

  std::vector<char> byz(m, 0);
  for (auto b : byz_ids) byz[b] = 1;

  std::vector<NodeDataset> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    NodeDataset& ds = out[i];
    ds.node_id = i;
    ds.is_byzantine = byz[i] != 0;
    ds.x = Matrix(n_per_node, d);
    ds.y.assign(n_per_node, 0.0);
    Rng rng(seed, Stream::Data, i);
    const bool contaminated = ds.is_byzantine && is_data_level(attack);
    const Vector& theta = (contaminated && !theta_c.empty()) ? theta_c : task.theta_star;
    for (std::size_t u = 0; u < n_per_node; ++u) {
      auto row = ds.x.row(u);
      for (auto& x : row) x = rng.normal();
      ds.y[u] = simd::dot(row, theta) + task.noise_std * rng.normal();
      if (contaminated) {
        if (const auto* da = std::get_if<DataAttack>(&attack)) {
          for (std::size_t k = 0; k < d; ++k) row[k] = da->scale * row[k] + da->shift * v_d[k];
          ds.y[u] += da->response_bias;
        }
      }
    }
  }
  return out;
}

namespace {

void check_indices(const NodeDataset& data, std::span<const std::size_t> indices, const char* what) {
  if (indices.empty()) throw std::invalid_argument(std::string(what) + ": empty index set");
  for (auto u : indices)
    if (u >= data.size()) throw std::out_of_range(std::string(what) + ": sample index out of range");
}

}  // namespace

GradientBatch minibatch_gradient(std::span<const double> theta, const NodeDataset& data,
                                 std::span<const std::size_t> indices) {
  check_indices(data, indices, "minibatch_gradient");
  if (theta.size() != data.dim()) throw std::invalid_argument("minibatch_gradient: dimension mismatch");
  GradientBatch g{Vector(data.dim(), 0.0), indices.size()};
  for (auto u : indices) {
    const auto row = data.x.row(u);
    const double r = simd::dot(row, theta) - data.y[u];
    simd::axpy(r, row, g.vector);
  }
  simd::scale(1.0 / static_cast<double>(indices.size()), g.vector);
  return g;
}

double minibatch_loss(std::span<const double> theta, const NodeDataset& data, std::span<const std::size_t> indices) {
  check_indices(data, indices, "minibatch_loss");
  double s = 0.0;
  for (auto u : indices) {
    const double r = data.y[u] - simd::dot(data.x.row(u), theta);
    s += r * r;
  }
  return 0.5 * s / static_cast<double>(indices.size());
}

std::vector<std::size_t> all_indices(const NodeDataset& data) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

NodeDataset split_dataset(NodeDataset data, std::size_t n, std::uint64_t seed) {
  if (n % 2 != 0) throw std::invalid_argument("split_dataset: identification size must be even");
  if (n >= data.size()) throw std::invalid_argument("split_dataset: identification size must be below N");
  Rng rng(seed, Stream::Split, data.node_id);
  auto perm = all_indices(data);
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  data.identification_indices.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n));
  data.warmup_indices.assign(perm.begin() + static_cast<std::ptrdiff_t>(n), perm.end());
  std::sort(data.identification_indices.begin(), data.identification_indices.end());
  std::sort(data.warmup_indices.begin(), data.warmup_indices.end());
  return data;
}

IdentificationHalves split_identification(const NodeDataset& data, std::uint64_t seed) {
  const auto& id = data.identification_indices;
  if (id.empty() || id.size() % 2 != 0)
    throw std::invalid_argument("split_identification: identification set must be non-empty and even");
  Rng rng(seed, Stream::DetectionSplit, data.node_id);
  auto perm = id;
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  const auto half = static_cast<std::ptrdiff_t>(perm.size() / 2);
  IdentificationHalves h{{perm.begin(), perm.begin() + half}, {perm.begin() + half, perm.end()}};
  std::sort(h.first.begin(), h.first.end());
  std::sort(h.second.begin(), h.second.end());
  return h;
}

std::vector<Vector> apply_message_attack(const AttackSpec& attack, std::span<const Vector> clean,
                                         const NodeSet& byz_ids, std::uint64_t seed, std::uint64_t round) {
  if (!is_message_level(attack) && !std::holds_alternative<NoAttack>(attack))
    throw std::invalid_argument("apply_message_attack: data-level attack '" + attack_name(attack) +
                                "' cannot act on messages");
  std::vector<Vector> out(clean.begin(), clean.end());
  if (byz_ids.empty() || std::holds_alternative<NoAttack>(attack)) return out;

  std::vector<char> byz(clean.size(), 0);
  for (auto b : byz_ids) {
    if (b >= clean.size()) throw std::invalid_argument("apply_message_attack: Byzantine id out of range");
    byz[b] = 1;
  }
  std::vector<Vector> normal;
  for (std::size_t i = 0; i < clean.size(); ++i)
    if (!byz[i]) normal.push_back(clean[i]);
  if (normal.empty()) throw std::invalid_argument("apply_message_attack: no normal messages");
  const Vector mean = mean_of(normal);
  const std::size_t d = mean.size();

  if (const auto* ipm = std::get_if<IpmAttack>(&attack)) {
    Vector msg = mean;
    simd::scale(-ipm->a, msg);
    for (auto b : byz_ids) out[b] = msg;
    return out;
  }

  const auto& ga = std::get<GradAttack>(attack);
  Vector sd(d, 0.0);
  for (const auto& g : normal)
    for (std::size_t k = 0; k < d; ++k) sd[k] += (g[k] - mean[k]) * (g[k] - mean[k]);
  for (auto& s : sd) s = std::sqrt(s / static_cast<double>(normal.size()));
  for (auto b : byz_ids) {
    // nu is a fixed per-node direction; eps is fresh every round.
    Rng offset(seed, Stream::Attack, b, 0);
    Rng noise(seed, Stream::Attack, b, round + 1);
    Vector msg(d);
    for (std::size_t k = 0; k < d; ++k) {
      const double nu = ga.offset_scale * sd[k] * offset.normal();
      msg[k] = ga.mean_coef * mean[k] + nu + sd[k] * noise.normal();
    }
    out[b] = std::move(msg);
  }
  return out;
}

GlobalObjective::GlobalObjective(std::span<const NodeDataset> normal) {
  if (normal.empty()) throw std::invalid_argument("GlobalObjective: need at least one normal node");
  const std::size_t d = normal.front().dim();
  const auto dd = static_cast<Eigen::Index>(d);
  hessian_ = Eigen::MatrixXd::Zero(dd, dd);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(dd);
  const double mg = static_cast<double>(normal.size());
  for (const auto& ds : normal) {
    if (ds.dim() != d) throw std::invalid_argument("GlobalObjective: dimension mismatch");
    if (ds.size() == 0) throw std::invalid_argument("GlobalObjective: empty dataset");
    const double w = 1.0 / (mg * static_cast<double>(ds.size()));
    const auto x = ds.x.as_eigen();
    const Eigen::Map<const Eigen::VectorXd> y(ds.y.data(), static_cast<Eigen::Index>(ds.y.size()));
    hessian_.noalias() += w * (x.transpose() * x);
    b.noalias() += w * (x.transpose() * y);
    c_ += w * y.squaredNorm();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hessian_, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  cond_ = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(lo > 0.0) || cond_ > 1e12)
    throw std::runtime_error("GlobalObjective: pooled design matrix is singular (condition number " +
                             std::to_string(cond_) + ")");
  const Eigen::VectorXd sol = hessian_.ldlt().solve(b);
  b_.assign(b.data(), b.data() + dd);
  minimizer_.assign(sol.data(), sol.data() + dd);
}

double GlobalObjective::value(std::span<const double> theta) const {
  const Eigen::Map<const Eigen::VectorXd> t(theta.data(), static_cast<Eigen::Index>(theta.size()));
  const Eigen::Map<const Eigen::VectorXd> b(b_.data(), static_cast<Eigen::Index>(b_.size()));
  return 0.5 * t.dot(hessian_ * t) - b.dot(t) + 0.5 * c_;
}

Vector GlobalObjective::gradient(std::span<const double> theta) const {
  const Eigen::Map<const Eigen::VectorXd> t(theta.data(), static_cast<Eigen::Index>(theta.size()));
  const Eigen::Map<const Eigen::VectorXd> b(b_.data(), static_cast<Eigen::Index>(b_.size()));
  const Eigen::VectorXd g = hessian_ * t - b;
  return Vector(g.data(), g.data() + g.size());
}

double GlobalObjective::optimality_gap(std::span<const double> theta) const {
  Eigen::VectorXd e(static_cast<Eigen::Index>(theta.size()));
  for (std::size_t k = 0; k < theta.size(); ++k) e(static_cast<Eigen::Index>(k)) = theta[k] - minimizer_[k];
  return 0.5 * e.dot(hessian_ * e);
}

}  // namespace byzsim::problem
