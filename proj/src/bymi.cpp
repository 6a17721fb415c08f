#include "byzsim/bymi.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "byzsim/csv.hpp"
#include "byzsim/simd.hpp"

namespace byzsim::bymi {

namespace {

// Attack round tag for the detection exchange, disjoint from warm-up rounds.
constexpr std::uint64_t kDetectionRound = 1ULL << 40;

bool contains(const NodeSet& s, std::size_t v) { return std::binary_search(s.begin(), s.end(), v); }

}  // namespace

std::string omega_name(const OmegaSpec& s) {
  return std::holds_alternative<IdentityOmega>(s) ? "identity" : "pca";
}

Matrix build_omega(const OmegaSpec& spec, std::span<const Vector> grads, std::vector<std::string>* warnings) {
  if (grads.empty()) throw std::invalid_argument("build_omega: no gradients");
  const std::size_t d = grads.front().size();
  const auto* pca = std::get_if<PcaProjection>(&spec);
  if (pca == nullptr) return Matrix::identity(d);
  if (!(pca->variance_fraction > 0.0 && pca->variance_fraction <= 1.0))
    throw std::invalid_argument("build_omega: variance fraction must be in (0, 1]");
  if (grads.size() < 2) throw std::invalid_argument("build_omega: PCA projection needs at least two gradients");

  const auto dd = static_cast<Eigen::Index>(d);
  const Vector mean = mean_of(grads);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dd, dd);
  Eigen::VectorXd diff(dd);
  for (const auto& g : grads) {
    for (std::size_t k = 0; k < d; ++k) diff(static_cast<Eigen::Index>(k)) = g[k] - mean[k];
    cov.noalias() += diff * diff.transpose();
  }
  cov /= static_cast<double>(grads.size());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd& ev = es.eigenvalues();  // ascending
  const double top = ev(dd - 1);
  double scale = 0.0;
  for (const auto& g : grads) scale = std::max(scale, simd::squared_norm(g));
  if (!(top > 1e-14 * std::max(scale, 1e-300))) {
    if (warnings) warnings->push_back("build_omega: degenerate gradient spread, using identity");
    return Matrix::identity(d);
  }
  const double floor = 1e-12 * top;
  double total = 0.0;
  for (Eigen::Index k = 0; k < dd; ++k)
    if (ev(k) > floor) total += ev(k);
  Matrix p(d, d);
  double captured = 0.0;
  for (Eigen::Index k = dd - 1; k >= 0; --k) {
    if (ev(k) <= floor) break;
    const Eigen::VectorXd v = es.eigenvectors().col(k);
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < d; ++c)
        p(r, c) += v(static_cast<Eigen::Index>(r)) * v(static_cast<Eigen::Index>(c));
    captured += ev(k);
    if (captured >= pca->variance_fraction * total * (1.0 - 1e-12)) break;
  }
  return p;
}

double score(std::span<const double> g1, std::span<const double> g2, std::span<const double> g_hat,
             const Matrix& omega) {
  const std::size_t d = g_hat.size();
  if (g1.size() != d || g2.size() != d || omega.rows() != d || omega.cols() != d)
    throw std::invalid_argument("score: dimension mismatch");
  Vector a(d), b(d);
  for (std::size_t k = 0; k < d; ++k) {
    a[k] = g1[k] - g_hat[k];
    b[k] = g2[k] - g_hat[k];
  }
  double s = 0.0;
  for (std::size_t r = 0; r < d; ++r) s += a[r] * simd::dot(omega.row(r), b);
  return s;
}

Threshold threshold(std::span<const double> scores, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("threshold: alpha must be in (0, 1)");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> cand;
  for (double s : scores)
    if (std::abs(s) > 0.0) cand.push_back(std::abs(s));
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

  Threshold t;
  for (double r : cand) {
    const auto neg = static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), -r) - sorted.begin());
    const auto pos = static_cast<double>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), r));
    if (neg / std::max(pos, 1.0) <= alpha) {
      t.r = r;
      break;
    }
  }
  // Past the largest |S| the ratio is 0 and nothing is detected: r stays +inf.
  for (std::size_t j = 0; j < scores.size(); ++j)
    if (scores[j] >= t.r) t.detected.push_back(j);
  if (t.detected.empty()) t.r = std::numeric_limits<double>::infinity();
  return t;
}

double false_discovery_proportion(const NodeSet& detected, const NodeSet& byz_ids) {
  std::size_t false_hits = 0;
  for (auto j : detected)
    if (!contains(byz_ids, j)) ++false_hits;
  return static_cast<double>(false_hits) / static_cast<double>(std::max<std::size_t>(detected.size(), 1));
}

bool sure_detection(const NodeSet& detected, const NodeSet& true_byz_neighbors) {
  return std::includes(detected.begin(), detected.end(), true_byz_neighbors.begin(), true_byz_neighbors.end());
}

GradientPair identification_gradients(std::span<const double> theta, const problem::NodeDataset& data,
                                      std::uint64_t seed) {
  const auto halves = problem::split_identification(data, seed);
  return {problem::minibatch_gradient(theta, data, halves.first).vector,
          problem::minibatch_gradient(theta, data, halves.second).vector};
}

std::vector<GradientPair> transmitted_gradients(const DetectionSetup& setup) {
  const std::size_t m = setup.data.size();
  if (setup.thetas.size() != m) throw std::invalid_argument("detect: one parameter vector per node required");
  std::vector<GradientPair> pairs(m);
  for (std::size_t i = 0; i < m; ++i) pairs[i] = identification_gradients(setup.thetas[i], setup.data[i], setup.seed);
  if (problem::is_message_level(setup.attack) && !setup.byz_ids.empty()) {
    std::vector<Vector> firsts(m);
    for (std::size_t i = 0; i < m; ++i) firsts[i] = pairs[i].first;
    const auto attacked =
        problem::apply_message_attack(setup.attack, firsts, setup.byz_ids, setup.seed, kDetectionRound);
    for (auto b : setup.byz_ids) pairs[b] = {attacked[b], attacked[b]};
  }
  return pairs;
}

DetectionReport detect(const DetectionSetup& setup) {
  if (setup.graph == nullptr) throw std::invalid_argument("detect: missing graph");
  const auto& g = *setup.graph;
  const std::size_t m = g.size();
  if (setup.data.size() != m) throw std::invalid_argument("detect: one dataset per node required");
  robust::validate(setup.estimator);
  if (!(setup.alpha > 0.0 && setup.alpha < 1.0)) throw std::invalid_argument("detect: alpha must be in (0, 1)");

  NodeSet byz = setup.byz_ids;
  std::sort(byz.begin(), byz.end());
  const auto pairs = transmitted_gradients(setup);

  DetectionReport rep;
  double fdp_sum = 0.0, pa_sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (contains(byz, i)) continue;
    NodeDetection nd;
    nd.node = i;
    nd.neighbors = g.neighbors(i);
    for (auto j : nd.neighbors)
      if (contains(byz, j)) nd.byzantine_neighbors.push_back(j);

    if (!nd.neighbors.empty()) {
      std::vector<Vector> firsts;
      if (setup.include_self) firsts.push_back(pairs[i].first);
      for (auto j : nd.neighbors) firsts.push_back(pairs[j].first);
      const Vector g_hat = robust::estimate_mean(setup.estimator, firsts);
      const Matrix omega = build_omega(setup.omega, firsts, &rep.warnings);
      for (auto j : nd.neighbors) nd.scores.push_back(score(pairs[j].first, pairs[j].second, g_hat, omega));
      const Threshold t = threshold(nd.scores, setup.alpha);
      nd.threshold = t.r;
      for (auto pos : t.detected) nd.detected.push_back(nd.neighbors[pos]);
    }
    nd.fdp = false_discovery_proportion(nd.detected, byz);
    nd.pa = sure_detection(nd.detected, nd.byzantine_neighbors);
    fdp_sum += nd.fdp;
    pa_sum += nd.pa ? 1.0 : 0.0;
    rep.nodes.push_back(std::move(nd));
  }
  if (!rep.nodes.empty()) {
    rep.avg_fdp = fdp_sum / static_cast<double>(rep.nodes.size());
    rep.avg_pa = pa_sum / static_cast<double>(rep.nodes.size());
  }
  return rep;
}

topology::RemovalSets prune_decisions(const DetectionReport& report, const topology::UndirectedGraph& graph,
                                      const NodeSet& byz_ids, ByzantinePolicy policy) {
  topology::RemovalSets rem(graph.size());
  for (const auto& nd : report.nodes) rem.at(nd.node) = nd.detected;
  if (policy == ByzantinePolicy::DropAll)
    for (auto b : byz_ids) rem.at(b) = graph.neighbors(b);
  return rem;
}

void write_detection_csv(std::ostream& os, const DetectionReport& report, const NodeSet& byz_ids) {
  NodeSet byz = byz_ids;
  std::sort(byz.begin(), byz.end());
  os << "kind,i,j,score,threshold,detected,truth,fdp,pa\n";
  for (const auto& nd : report.nodes) {
    for (std::size_t q = 0; q < nd.neighbors.size(); ++q) {
      const auto j = nd.neighbors[q];
      os << "pair," << nd.node << ',' << j << ',' << csv::format_double(nd.scores[q]) << ','
         << csv::format_double(nd.threshold) << ',' << (contains(nd.detected, j) ? 1 : 0) << ','
         << (contains(byz, j) ? 1 : 0) << ',' << csv::format_double(nd.fdp) << ',' << (nd.pa ? 1 : 0) << '\n';
    }
  }
  os << "summary,,,,,,," << csv::format_double(report.avg_fdp) << ',' << csv::format_double(report.avg_pa) << '\n';
}

}  // namespace byzsim::bymi
