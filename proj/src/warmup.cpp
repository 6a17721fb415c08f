#include "byzsim/warmup.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "byzsim/rng.hpp"
#include "byzsim/simd.hpp"

namespace byzsim::warmup {

double default_step(std::size_t k0) { return 0.5 / std::sqrt(static_cast<double>(std::max<std::size_t>(k0, 1))); }

double consensus_error(std::span<const Vector> thetas, const topology::NodeSet& nodes) {
  if (nodes.empty()) return 0.0;
  Vector mean(thetas[nodes.front()].size(), 0.0);
  for (auto j : nodes) simd::axpy(1.0, thetas[j], mean);
  simd::scale(1.0 / static_cast<double>(nodes.size()), mean);
  double s = 0.0;
  for (auto j : nodes) s += simd::squared_distance(thetas[j], mean);
  return s;
}

Result run_warmup(const Network& net, const robust::WarmupRule& rule, const Options& opt) {
  if (net.graph == nullptr) throw std::invalid_argument("run_warmup: missing graph");
  const auto& g = *net.graph;
  const std::size_t m = g.size();
  if (net.data.size() != m) throw std::invalid_argument("run_warmup: one dataset per node required");
  if (opt.batch == 0) throw std::invalid_argument("run_warmup: batch must be positive");
  robust::validate(rule);
  const std::size_t d = net.data.front().dim();

  std::size_t b_param = 0;
  if (const auto* i = std::get_if<robust::IosRemove>(&rule)) b_param = i->b;
  if (const auto* u = std::get_if<robust::UbarSelect>(&rule)) b_param = u->b;
  for (std::size_t i = 0; i < m; ++i) {
    if (b_param > 0 && g.degree(i) > 0 && b_param >= g.degree(i))
      throw std::invalid_argument("run_warmup: rule parameter b=" + std::to_string(b_param) +
                                  " is not below the neighbor count of node " + std::to_string(i));
    if (net.data[i].warmup_indices.empty())
      throw std::invalid_argument("run_warmup: node " + std::to_string(i) + " has an empty warm-up set");
  }
  const bool weighted = std::holds_alternative<robust::CenteredClip>(rule) ||
                        std::holds_alternative<robust::IosRemove>(rule);
  if (weighted && net.weights == nullptr) throw std::invalid_argument("run_warmup: rule needs mixing weights");
  const bool needs_loss = std::holds_alternative<robust::UbarSelect>(rule);

  std::vector<char> byz(m, 0);
  for (auto b : net.byz_ids) byz.at(b) = 1;
  topology::NodeSet normal;
  for (std::size_t i = 0; i < m; ++i)
    if (!byz[i]) normal.push_back(i);

  Result res;
  res.step = opt.step.value_or(default_step(opt.k0));
  res.thetas = opt.initial.value_or(std::vector<Vector>(m, Vector(d, 0.0)));
  if (res.thetas.size() != m) throw std::invalid_argument("run_warmup: initial parameters must cover every node");
  res.consensus_trace.push_back(consensus_error(res.thetas, normal));

  std::vector<Rng> rngs;
  rngs.reserve(m);
  for (std::size_t i = 0; i < m; ++i) rngs.emplace_back(net.seed, Stream::Warmup, i);

  std::vector<std::vector<std::size_t>> batches(m, std::vector<std::size_t>(opt.batch));
  std::vector<Vector> grads(m);
  for (std::size_t k = 0; k < opt.k0; ++k) {
    for (std::size_t i = 0; i < m; ++i) {
      const auto& pool = net.data[i].warmup_indices;
      for (auto& u : batches[i]) u = pool[rngs[i].index(pool.size())];
      grads[i] = problem::minibatch_gradient(res.thetas[i], net.data[i], batches[i]).vector;
    }
    if (problem::is_message_level(net.attack))
      grads = problem::apply_message_attack(net.attack, grads, net.byz_ids, net.seed, k);

    std::vector<Vector> next(m);
    for (std::size_t i = 0; i < m; ++i) {
      const auto& nbrs = g.neighbors(i);
      if (nbrs.empty()) {
        next[i] = res.thetas[i];
      } else {
        robust::Neighborhood nb;
        nb.self_theta = res.thetas[i];
        nb.iteration = k;
        for (auto j : nbrs) nb.neighbor_thetas.emplace_back(res.thetas[j]);
        if (weighted) {
          nb.weights.push_back((*net.weights)(i, i));
          for (auto j : nbrs) nb.weights.push_back((*net.weights)(i, j));
        }
        if (needs_loss) {
          nb.self_loss = problem::minibatch_loss(res.thetas[i], net.data[i], batches[i]);
          for (auto j : nbrs) nb.neighbor_losses.push_back(problem::minibatch_loss(res.thetas[j], net.data[i], batches[i]));
        }
        next[i] = robust::warmup_aggregate(rule, nb);
      }
      simd::axpy(-res.step, grads[i], next[i]);
    }
    res.thetas = std::move(next);
    res.consensus_trace.push_back(consensus_error(res.thetas, normal));
  }
  return res;
}

}  // namespace byzsim::warmup
