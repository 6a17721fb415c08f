#include "byzsim/drsgd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "byzsim/csv.hpp"
#include "byzsim/rng.hpp"
#include "byzsim/simd.hpp"

namespace byzsim::drsgd {

namespace {

// Attack round tags for this phase, disjoint from warm-up and detection.
constexpr std::uint64_t kRoundBase = 1ULL << 41;

constexpr double kDivisorGuard = 1e-12;

}  // namespace

Matrix init_y(const topology::MixingMatrix& a, std::size_t t0) {
  if (t0 == 0) throw std::invalid_argument("init_y: t0 must be at least 1");
  if (!a.row_stochastic(1e-10)) throw std::invalid_argument("init_y: matrix is not row-stochastic");
  return power(a.weights(), t0);
}

std::size_t default_t0(const topology::SpectralProfile& profile, std::size_t m_g) {
  const double v1sq = simd::squared_norm(profile.v1);
  const double c = profile.c_const, w = profile.w_const;
  const double arg = static_cast<double>(m_g) / (48.0 * c * c * w * w * w * w * v1sq);
  const double t = std::ceil(std::log(arg) / (2.0 * std::log(profile.rho)));
  if (!std::isfinite(t) || t < 1.0) return 1;
  return static_cast<std::size_t>(std::min(t, 50.0));
}

OptimizerState step(const OptimizerState& state, const topology::MixingMatrix& w, std::span<const Vector> gradients,
                    double eta, const NodeSet& rescaled) {
  const std::size_t m = w.size();
  if (state.thetas.size() != m || gradients.size() != m || state.y.rows() != m)
    throw std::invalid_argument("step: state, gradients and mixing matrix disagree on the node count");
  std::vector<char> scaled(m, 0);
  for (auto i : rescaled) scaled.at(i) = 1;

  OptimizerState next;
  next.k = state.k + 1;
  next.eta = eta;
  next.y = multiply(w.weights(), state.y);
  const std::size_t d = state.thetas.empty() ? 0 : state.thetas.front().size();
  next.thetas.assign(m, Vector(d, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    auto& th = next.thetas[i];
    const auto row = w.weights().row(i);
    for (std::size_t j = 0; j < m; ++j)
      if (row[j] != 0.0) simd::axpy(row[j], state.thetas[j], th);
    double divisor = 1.0;
    if (scaled[i]) {
      divisor = next.y(i, i);
      if (!(divisor > kDivisorGuard))
        throw std::runtime_error("step: [y_" + std::to_string(i) + "]_" + std::to_string(i) + " = " +
                                 csv::format_double(divisor) +
                                 " at iteration " + std::to_string(next.k) +
                                 "; the rescaled nodes must form an irreducible block");
    }
    simd::axpy(-eta / divisor, gradients[i], th);
  }
  return next;
}

OptimizerState step(const OptimizerState& state, const topology::MixingMatrix& w, std::span<const Vector> gradients,
                    double eta) {
  NodeSet all(w.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return step(state, w, gradients, eta, all);
}

Vector weighted_average(std::span<const Vector> thetas, const NodeSet& scc, std::span<const double> v1) {
  if (scc.empty() || v1.size() != scc.size()) throw std::invalid_argument("weighted_average: v1 must align with scc");
  Vector out(thetas[scc.front()].size(), 0.0);
  for (std::size_t q = 0; q < scc.size(); ++q) simd::axpy(v1[q], thetas[scc[q]], out);
  return out;
}

MetricsRow compute_metrics(const OptimizerState& state, const NodeSet& scc, std::span<const double> v1,
                           const problem::GlobalObjective& objective) {
  MetricsRow row;
  row.k = state.k;
  row.eta = state.eta;
  const Vector tilde = weighted_average(state.thetas, scc, v1);
  Vector bar(tilde.size(), 0.0);
  for (auto i : scc) simd::axpy(1.0, state.thetas[i], bar);
  simd::scale(1.0 / static_cast<double>(scc.size()), bar);

  row.gap = objective.optimality_gap(tilde);
  row.grad_norm_bar = norm(objective.gradient(bar));
  row.grad_norm_tilde = norm(objective.gradient(tilde));
  double mk = 0.0;
  for (auto i : scc) mk += simd::squared_distance(tilde, state.thetas[i]);
  row.consensus_mk = mk / static_cast<double>(scc.size());

  Matrix dev = submatrix(state.y, scc);
  for (std::size_t r = 0; r < scc.size(); ++r)
    for (std::size_t c = 0; c < scc.size(); ++c) dev(r, c) -= v1[c];
  row.tracking_residual = spectral_norm(dev);
  return row;
}

double default_eta(std::size_t m_g, std::size_t iterations) {
  return 1.0 / std::sqrt(static_cast<double>(m_g) * static_cast<double>(std::max<std::size_t>(iterations, 1)));
}

Result run_optimization(const Network& net, const Options& opt) {
  if (net.weights == nullptr || net.profile == nullptr || net.objective == nullptr)
    throw std::invalid_argument("run_optimization: incomplete network description");
  if (net.scc.empty())
    throw std::runtime_error("run_optimization: no closed strongly connected component; review the detection output");
  if (opt.batch == 0) throw std::invalid_argument("run_optimization: batch must be positive");
  const auto& w = *net.weights;
  const std::size_t m = w.size();
  if (net.data.size() != m) throw std::invalid_argument("run_optimization: one dataset per node required");
  if (net.profile->v1.size() != net.scc.size())
    throw std::invalid_argument("run_optimization: spectral profile does not match the SCC");
  const std::size_t d = net.data.front().dim();
  const std::size_t m_g = net.scc.size();

  Result res;
  res.t0 = opt.t0.value_or(default_t0(*net.profile, m_g));
  res.eta = opt.eta.value_or(default_eta(m_g, opt.iterations));

  OptimizerState state;
  state.thetas = opt.initial.value_or(std::vector<Vector>(m, Vector(d, 0.0)));
  if (state.thetas.size() != m) throw std::invalid_argument("run_optimization: initial parameters must cover every node");
  state.y = init_y(w, res.t0);
  state.eta = res.eta;
  res.metrics.reserve(opt.iterations + 1);
  res.metrics.push_back(compute_metrics(state, net.scc, net.profile->v1, *net.objective));

  std::vector<Rng> rngs;
  rngs.reserve(m);
  for (std::size_t i = 0; i < m; ++i) rngs.emplace_back(net.seed, Stream::Optimization, i);
  std::vector<std::size_t> batch(opt.batch);
  std::vector<Vector> grads(m);
  const bool message_attack = problem::is_message_level(net.attack) && !net.byz_ids.empty();

  for (std::size_t k = 0; k < opt.iterations; ++k) {
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t n = net.data[i].size();
      for (auto& u : batch) u = rngs[i].index(n);
      grads[i] = problem::minibatch_gradient(state.thetas[i], net.data[i], batch).vector;
    }
    if (message_attack)
      grads = problem::apply_message_attack(net.attack, grads, net.byz_ids, net.seed, kRoundBase + k);
    state = step(state, w, grads, res.eta, net.scc);
    res.metrics.push_back(compute_metrics(state, net.scc, net.profile->v1, *net.objective));
  }
  res.state = std::move(state);
  return res;
}

void write_metrics_csv(std::ostream& os, const RunMetrics& metrics) {
  os << "k,eta,gap,grad_norm_bar,grad_norm_tilde,consensus_Mk,tracking_residual\n";
  for (const auto& r : metrics)
    os << r.k << ',' << csv::format_double(r.eta) << ',' << csv::format_double(r.gap) << ','
       << csv::format_double(r.grad_norm_bar) << ',' << csv::format_double(r.grad_norm_tilde) << ','
       << csv::format_double(r.consensus_mk) << ',' << csv::format_double(r.tracking_residual) << '\n';
}

}  // namespace byzsim::drsgd
