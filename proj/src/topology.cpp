#include "byzsim/topology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>

#include "byzsim/rng.hpp"
#include "byzsim/simd.hpp"

namespace byzsim::topology {

namespace {

void check_node(std::size_t m, std::size_t v, const char* what) {
  if (v >= m) throw std::invalid_argument(std::string(what) + ": node index out of range");
}

bool bfs_covers(std::size_t m, const std::vector<NodeSet>& adj, const NodeSet& nodes) {
  if (nodes.size() <= 1) return true;
  std::vector<char> allowed(m, 0), seen(m, 0);
  for (auto v : nodes) allowed[v] = 1;
  std::queue<std::size_t> q;
  q.push(nodes.front());
  seen[nodes.front()] = 1;
  std::size_t reached = 1;
  while (!q.empty()) {
    const auto u = q.front();
    q.pop();
    for (auto v : adj[u]) {
      if (allowed[v] && !seen[v]) {
        seen[v] = 1;
        ++reached;
        q.push(v);
      }
    }
  }
  return reached == nodes.size();
}

}  // namespace

UndirectedGraph::UndirectedGraph(std::size_t m, std::vector<std::pair<std::size_t, std::size_t>> edges)
    : m_(m), adjacency_(m) {
  for (auto& [u, v] : edges) {
    check_node(m, u, "UndirectedGraph");
    check_node(m, v, "UndirectedGraph");
    if (u == v) throw std::invalid_argument("UndirectedGraph: self-edge");
    if (u > v) std::swap(u, v);
  }
  std::sort(edges.begin(), edges.end());
  if (std::adjacent_find(edges.begin(), edges.end()) != edges.end())
    throw std::invalid_argument("UndirectedGraph: duplicate edge");
  edges_ = std::move(edges);
  for (const auto& [u, v] : edges_) {
    adjacency_[u].push_back(v);
    adjacency_[v].push_back(u);
  }
  for (auto& a : adjacency_) std::sort(a.begin(), a.end());
}

bool UndirectedGraph::has_edge(std::size_t u, std::size_t v) const {
  if (u >= m_ || v >= m_) return false;
  return std::binary_search(adjacency_[u].begin(), adjacency_[u].end(), v);
}

bool UndirectedGraph::connected() const {
  NodeSet all(m_);
  for (std::size_t i = 0; i < m_; ++i) all[i] = i;
  return bfs_covers(m_, adjacency_, all);
}

bool UndirectedGraph::connected_on(const NodeSet& nodes) const { return bfs_covers(m_, adjacency_, nodes); }

DirectedGraph::DirectedGraph(std::size_t m, std::vector<std::pair<std::size_t, std::size_t>> arcs)
    : m_(m), in_(m), out_(m) {
  for (const auto& [u, v] : arcs) {
    check_node(m, u, "DirectedGraph");
    check_node(m, v, "DirectedGraph");
    if (u == v) throw std::invalid_argument("DirectedGraph: self-arc");
  }
  std::sort(arcs.begin(), arcs.end());
  arcs.erase(std::unique(arcs.begin(), arcs.end()), arcs.end());
  arcs_ = std::move(arcs);
  for (const auto& [u, v] : arcs_) {
    out_[u].push_back(v);
    in_[v].push_back(u);
  }
  for (auto& s : in_) std::sort(s.begin(), s.end());
}

DirectedGraph DirectedGraph::from_undirected(const UndirectedGraph& g) {
  std::vector<std::pair<std::size_t, std::size_t>> arcs;
  arcs.reserve(2 * g.edges().size());
  for (const auto& [u, v] : g.edges()) {
    arcs.emplace_back(u, v);
    arcs.emplace_back(v, u);
  }
  return DirectedGraph(g.size(), std::move(arcs));
}

DirectedGraph DirectedGraph::from_support(const Matrix& w) {
  std::vector<std::pair<std::size_t, std::size_t>> arcs;
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j)
      if (i != j && w(i, j) > 0.0) arcs.emplace_back(j, i);
  return DirectedGraph(w.rows(), std::move(arcs));
}

bool DirectedGraph::has_arc(std::size_t from, std::size_t to) const {
  if (from >= m_ || to >= m_) return false;
  return std::binary_search(in_[to].begin(), in_[to].end(), from);
}

MixingMatrix::MixingMatrix(Matrix w) : w_(std::move(w)) {
  if (w_.rows() != w_.cols()) throw std::invalid_argument("MixingMatrix: not square");
  for (double x : w_.data())
    if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument("MixingMatrix: negative or non-finite weight");
}

double MixingMatrix::max_row_sum_error() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < w_.rows(); ++i) {
    double s = 0.0;
    for (double x : w_.row(i)) s += x;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

double MixingMatrix::max_column_sum_error() const {
  double worst = 0.0;
  for (std::size_t j = 0; j < w_.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < w_.rows(); ++i) s += w_(i, j);
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

double MixingMatrix::max_asymmetry() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < w_.rows(); ++i)
    for (std::size_t j = i + 1; j < w_.cols(); ++j) worst = std::max(worst, std::abs(w_(i, j) - w_(j, i)));
  return worst;
}

MixingMatrix MixingMatrix::restricted_to(const NodeSet& nodes) const {
  return MixingMatrix(submatrix(w_, nodes));
}

UndirectedGraph gen_erdos_renyi(std::size_t m, double p, std::uint64_t seed) {
  if (m < 2) throw std::invalid_argument("gen_erdos_renyi: need m >= 2");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("gen_erdos_renyi: p outside [0, 1]");
  Rng rng(seed, Stream::Topology);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      if (rng.bernoulli(p)) edges.emplace_back(i, j);
  return UndirectedGraph(m, std::move(edges));
}

MixingMatrix metropolis_weights(const UndirectedGraph& g) {
  const std::size_t m = g.size();
  Matrix w(m, m);
  for (const auto& [u, v] : g.edges()) {
    const double x = 1.0 / (1.0 + static_cast<double>(std::max(g.degree(u), g.degree(v))));
    w(u, v) = x;
    w(v, u) = x;
  }
  for (std::size_t i = 0; i < m; ++i) {
    double off = 0.0;
    for (auto j : g.neighbors(i)) off += w(i, j);
    w(i, i) = 1.0 - off;
  }
  return MixingMatrix(std::move(w));
}

std::pair<DirectedGraph, MixingMatrix> prune_and_reweight(const MixingMatrix& w_old, const RemovalSets& removals) {
  const std::size_t m = w_old.size();
  if (removals.size() != m) throw std::invalid_argument("prune_and_reweight: one removal set per node required");
  Matrix w = w_old.weights();
  for (std::size_t i = 0; i < m; ++i) {
    if (removals[i].empty()) continue;
    for (auto j : removals[i]) {
      check_node(m, j, "prune_and_reweight");
      if (j == i) throw std::invalid_argument("prune_and_reweight: node " + std::to_string(i) + " cannot remove itself");
      if (!(w_old(i, j) > 0.0))
        throw std::invalid_argument("prune_and_reweight: " + std::to_string(j) + " is not an in-neighbor of " +
                                    std::to_string(i));
      w(i, j) = 0.0;
    }
    double kept = 0.0;
    for (double x : w.row(i)) kept += x;
    if (!(kept > 0.0))
      throw std::invalid_argument("prune_and_reweight: node " + std::to_string(i) + " lost its whole in-neighborhood");
    simd::scale(1.0 / kept, w.row(i));
  }
  DirectedGraph g = DirectedGraph::from_support(w);
  return {std::move(g), MixingMatrix(std::move(w))};
}

// Iterative Tarjan.
std::vector<NodeSet> strongly_connected_components(const DirectedGraph& g) {
  const std::size_t m = g.size();
  constexpr std::size_t unvisited = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> index(m, unvisited), low(m, 0);
  std::vector<char> on_stack(m, 0);
  std::vector<std::size_t> stack;
  std::vector<NodeSet> comps;
  std::size_t counter = 0;

  struct Frame {
    std::size_t v;
    std::size_t next;
  };
  std::vector<Frame> call;

  for (std::size_t root = 0; root < m; ++root) {
    if (index[root] != unvisited) continue;
    call.push_back({root, 0});
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!call.empty()) {
      auto& f = call.back();
      const auto& succ = g.out_neighbors(f.v);
      if (f.next < succ.size()) {
        const auto w = succ[f.next++];
        if (index[w] == unvisited) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = 1;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
        continue;
      }
      const auto v = f.v;
      call.pop_back();
      if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
      if (low[v] == index[v]) {
        NodeSet comp;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comp.push_back(w);
        } while (w != v);
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
      }
    }
  }
  std::sort(comps.begin(), comps.end(), [](const NodeSet& a, const NodeSet& b) { return a.front() < b.front(); });
  return comps;
}

std::optional<NodeSet> largest_closed_scc(const DirectedGraph& g) {
  auto comps = strongly_connected_components(g);
  if (comps.empty()) return std::nullopt;
  // Components are ordered by smallest member, so the first maximum wins ties.
  std::size_t best = 0;
  for (std::size_t c = 1; c < comps.size(); ++c)
    if (comps[c].size() > comps[best].size()) best = c;
  const NodeSet& scc = comps[best];
  std::vector<char> inside(g.size(), 0);
  for (auto v : scc) inside[v] = 1;
  for (auto v : scc)
    for (auto u : g.in_neighbors(v))
      if (!inside[u]) return std::nullopt;
  return scc;
}

namespace {

double perron_residual(const Matrix& a, const Vector& v) {
  double worst = 0.0;
  for (std::size_t j = 0; j < a.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) s += v[i] * a(i, j);
    worst = std::max(worst, std::abs(s - v[j]));
  }
  return worst;
}

// Null vector of (A^T - I) with the normalization row sum(v) = 1 replacing the last equation.
Vector perron_direct(const Matrix& a) {
  const auto n = static_cast<Eigen::Index>(a.rows());
  Eigen::MatrixXd sys = a.as_eigen().transpose() - Eigen::MatrixXd::Identity(n, n);
  sys.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  Eigen::VectorXd v = sys.fullPivLu().solve(rhs);
  return Vector(v.data(), v.data() + n);
}

}  // namespace

SpectralProfile spectral_profile(const MixingMatrix& mix) {
  const Matrix& a = mix.weights();
  const std::size_t m = a.rows();
  if (m == 0) throw std::invalid_argument("spectral_profile: empty matrix");
  if (!mix.row_stochastic(1e-10)) throw std::invalid_argument("spectral_profile: matrix is not row-stochastic");
  if (strongly_connected_components(DirectedGraph::from_support(a)).size() != 1)
    throw std::invalid_argument("spectral_profile: matrix is not irreducible; restrict to a closed SCC first");

  SpectralProfile prof;

  // Power iteration on A^T.
  Vector v(m, 1.0 / static_cast<double>(m));
  const std::size_t cap = 100 * m;
  double resid = perron_residual(a, v);
  std::size_t it = 0;
  while (resid > 1e-10 && it < cap) {
    Vector next(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) simd::axpy(v[i], a.row(i), next);
    double s = 0.0;
    for (double x : next) s += x;
    for (auto& x : next) x /= s;
    v = std::move(next);
    resid = perron_residual(a, v);
    ++it;
  }
  prof.power_iterations = it;

  // Polish to machine precision; the weighted-average recursion of the optimizer
  // is only exact when v1 is.
  Vector direct = perron_direct(a);
  double dsum = 0.0;
  for (double x : direct) dsum += x;
  for (auto& x : direct) x /= dsum;
  const double dres = perron_residual(a, direct);
  if (dres < resid && *std::min_element(direct.begin(), direct.end()) > 0.0) {
    v = std::move(direct);
    resid = dres;
  }
  if (resid > 1e-10) throw std::runtime_error("spectral_profile: Perron vector did not converge");
  if (*std::min_element(v.begin(), v.end()) <= 0.0)
    throw std::runtime_error("spectral_profile: Perron vector has non-positive entries");
  prof.v1 = v;
  prof.v1_residual = resid;

  // Decay of ||A^k - 1 v1^T||_2 until it reaches the roundoff floor.
  Matrix limit(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) limit(i, j) = v[j];
  auto gap_norm = [&](const Matrix& ak) {
    Matrix d = ak;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) d(i, j) -= limit(i, j);
    return spectral_norm(d);
  };
  constexpr double floor = 1e-11;
  const std::size_t max_k = std::min<std::size_t>(cap, 2000);
  Matrix ak = Matrix::identity(m);
  double w_sup = 1.0;
  prof.decay.push_back(gap_norm(ak));
  for (std::size_t k = 1; k <= max_k; ++k) {
    ak = multiply(ak, a);
    for (std::size_t i = 0; i < m; ++i) w_sup = std::max(w_sup, 1.0 / ak(i, i));
    const double e = gap_norm(ak);
    prof.decay.push_back(e);
    if (e < floor) break;
  }
  w_sup = std::max(w_sup, 1.0 / *std::min_element(v.begin(), v.end()));
  prof.w_const = w_sup;

  // Geometric mean of the last (up to 10) ratios taken above the floor.
  std::vector<double> ratios;
  for (std::size_t k = 1; k < prof.decay.size(); ++k)
    if (prof.decay[k] >= floor && prof.decay[k - 1] >= floor) ratios.push_back(prof.decay[k] / prof.decay[k - 1]);
  double rho = 1e-12;
  if (!ratios.empty()) {
    const std::size_t take = std::min<std::size_t>(10, ratios.size());
    double lsum = 0.0;
    for (std::size_t r = ratios.size() - take; r < ratios.size(); ++r) lsum += std::log(ratios[r]);
    rho = std::exp(lsum / static_cast<double>(take));
  }
  prof.rho = std::clamp(rho, 1e-12, 1.0 - 1e-12);

  double c = 0.0;
  for (std::size_t k = 0; k < prof.decay.size(); ++k)
    if (prof.decay[k] >= floor) c = std::max(c, prof.decay[k] / std::pow(prof.rho, static_cast<double>(k)));
  prof.c_const = std::max(c, prof.decay.front());

  Eigen::EigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(a.as_eigen()), false);
  std::vector<double> mods;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) mods.push_back(std::abs(es.eigenvalues()(i)));
  std::sort(mods.rbegin(), mods.rend());
  prof.lambda2 = mods.size() > 1 ? mods[1] : 0.0;
  return prof;
}

double connectivity_constant(double m, double p, double beta0, double delta) {
  if (!(beta0 + delta < 1.0)) throw std::invalid_argument("connectivity_constant: need beta0 + delta < 1");
  return m * p * (1.0 - beta0 - delta) - std::log(m);
}

double isolation_constant(double m, double p) { return m * p - std::log(m); }

}  // namespace byzsim::topology
