#include "byzsim/robust.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "byzsim/simd.hpp"

namespace byzsim::robust {

namespace {

void require_nonempty(std::span<const Vector> vs, const char* what) {
  if (vs.empty()) throw std::invalid_argument(std::string(what) + ": empty input");
  const std::size_t d = vs.front().size();
  for (const auto& v : vs)
    if (v.size() != d) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

// Sorted copy of one coordinate across all vectors.
std::vector<double> column(std::span<const Vector> vs, std::size_t k) {
  std::vector<double> c(vs.size());
  for (std::size_t i = 0; i < vs.size(); ++i) c[i] = vs[i][k];
  std::sort(c.begin(), c.end());
  return c;
}

bool lex_less(std::span<const double> a, std::span<const double> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// Rescales w (nonnegative, sum 1) into {0 <= w <= cap, sum = 1} by w -> min(cap, t w).
// Returns false when the support is too small for the cap.
bool project_capped(std::vector<double>& w, double cap) {
  std::vector<std::size_t> order;
  for (std::size_t j = 0; j < w.size(); ++j)
    if (w[j] > 0.0) order.push_back(j);
  if (static_cast<double>(order.size()) * cap < 1.0 - 1e-15) return false;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
  double rest = 0.0;
  for (auto j : order) rest += w[j];
  for (std::size_t k = 0; k <= order.size(); ++k) {
    const double remaining = 1.0 - static_cast<double>(k) * cap;
    if (k == order.size()) break;
    const double t = remaining / rest;
    if (t * w[order[k]] <= cap) {
      for (std::size_t q = 0; q < order.size(); ++q) w[order[q]] = q < k ? cap : t * w[order[q]];
      return true;
    }
    rest -= w[order[k]];
  }
  for (auto j : order) w[j] = cap;
  return true;
}

}  // namespace

std::string estimator_name(const RobustMeanEstimator& e) {
  struct V {
    std::string operator()(const CoordinateMedian&) const { return "median"; }
    std::string operator()(const TrimmedMean&) const { return "trimmed_mean"; }
    std::string operator()(const Filtering&) const { return "filtering"; }
  };
  return std::visit(V{}, e);
}

std::string rule_name(const WarmupRule& r) {
  struct V {
    std::string operator()(const CenteredClip&) const { return "centered_clip"; }
    std::string operator()(const IosRemove&) const { return "ios"; }
    std::string operator()(const BalanceDecay&) const { return "balance"; }
    std::string operator()(const UbarSelect&) const { return "ubar"; }
  };
  return std::visit(V{}, r);
}

Vector coordinate_median(std::span<const Vector> vectors) {
  require_nonempty(vectors, "coordinate_median");
  const std::size_t d = vectors.front().size();
  const std::size_t n = vectors.size();
  Vector out(d);
  for (std::size_t k = 0; k < d; ++k) {
    const auto c = column(vectors, k);
    out[k] = n % 2 == 1 ? c[n / 2] : 0.5 * (c[n / 2 - 1] + c[n / 2]);
  }
  return out;
}

Vector trimmed_mean(std::span<const Vector> vectors, double fraction) {
  require_nonempty(vectors, "trimmed_mean");
  if (!(fraction >= 0.0 && fraction < 0.5)) throw std::invalid_argument("trimmed_mean: fraction must be in [0, 0.5)");
  const std::size_t d = vectors.front().size();
  const std::size_t n = vectors.size();
  const auto cut = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  Vector out(d);
  for (std::size_t k = 0; k < d; ++k) {
    const auto c = column(vectors, k);
    double s = 0.0;
    for (std::size_t i = cut; i < n - cut; ++i) s += c[i];
    out[k] = s / static_cast<double>(n - 2 * cut);
  }
  return out;
}

Vector filtering_mean(std::span<const Vector> input, double eps) {
  require_nonempty(input, "filtering_mean");
  if (!(eps >= 0.0 && eps < 0.5)) throw std::invalid_argument("filtering_mean: eps must be in [0, 0.5)");
  // Canonical order makes the result independent of input order.
  std::vector<Vector> xs(input.begin(), input.end());
  std::sort(xs.begin(), xs.end(), [](const Vector& a, const Vector& b) { return lex_less(a, b); });
  const std::size_t n = xs.size();
  const std::size_t d = xs.front().size();
  const auto dd = static_cast<Eigen::Index>(d);

  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  auto weighted_mean = [&] {
    Vector mu(d, 0.0);
    for (std::size_t j = 0; j < n; ++j)
      if (w[j] > 0.0) simd::axpy(w[j], xs[j], mu);
    return mu;
  };
  if (eps == 0.0 || n < 2) return weighted_mean();

  const double cap = 1.0 / ((1.0 - eps) * static_cast<double>(n));
  const auto max_rounds = static_cast<std::size_t>(std::ceil(eps * static_cast<double>(n))) + 1;
  double prev_lambda = std::numeric_limits<double>::infinity();
  for (std::size_t round = 0; round < max_rounds; ++round) {
    const Vector mu = weighted_mean();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dd, dd);
    Eigen::VectorXd diff(dd);
    for (std::size_t j = 0; j < n; ++j) {
      if (w[j] <= 0.0) continue;
      for (std::size_t k = 0; k < d; ++k) diff(static_cast<Eigen::Index>(k)) = xs[j][k] - mu[k];
      cov.selfadjointView<Eigen::Lower>().rankUpdate(diff, w[j]);
    }
    cov = cov.selfadjointView<Eigen::Lower>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const double lambda = es.eigenvalues()(dd - 1);
    if (!(lambda > 1e-300)) break;
    if (round > 0 && lambda > 0.99 * prev_lambda) break;
    prev_lambda = lambda;

    const Eigen::VectorXd top = es.eigenvectors().col(dd - 1);
    std::vector<double> tau(n, 0.0);
    double tau_max = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (w[j] <= 0.0) continue;
      double p = 0.0;
      for (std::size_t k = 0; k < d; ++k) p += top(static_cast<Eigen::Index>(k)) * (xs[j][k] - mu[k]);
      tau[j] = p * p;
      tau_max = std::max(tau_max, tau[j]);
    }
    if (!(tau_max > 0.0)) break;
    std::vector<double> next = w;
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      next[j] *= 1.0 - tau[j] / tau_max;
      total += next[j];
    }
    if (!(total > 0.0)) break;
    for (auto& x : next) x /= total;
    if (!project_capped(next, cap)) break;
    w = std::move(next);
  }
  return weighted_mean();
}

Vector estimate_mean(const RobustMeanEstimator& est, std::span<const Vector> vectors) {
  struct V {
    std::span<const Vector> vs;
    Vector operator()(const CoordinateMedian&) const { return coordinate_median(vs); }
    Vector operator()(const TrimmedMean& t) const { return trimmed_mean(vs, t.fraction); }
    Vector operator()(const Filtering& f) const { return filtering_mean(vs, f.eps); }
  };
  return std::visit(V{vectors}, est);
}

void validate(const RobustMeanEstimator& est) {
  if (const auto* t = std::get_if<TrimmedMean>(&est); t && !(t->fraction >= 0.0 && t->fraction < 0.5))
    throw std::invalid_argument("trimmed mean fraction must be in [0, 0.5)");
  if (const auto* f = std::get_if<Filtering>(&est); f && !(f->eps >= 0.0 && f->eps < 0.5))
    throw std::invalid_argument("filtering eps must be in [0, 0.5)");
}

void validate(const WarmupRule& rule) {
  if (const auto* c = std::get_if<CenteredClip>(&rule); c && (!(c->tau > 0.0) || c->rounds == 0))
    throw std::invalid_argument("centered_clip needs tau > 0 and rounds >= 1");
  if (const auto* i = std::get_if<IosRemove>(&rule); i && i->b == 0)
    throw std::invalid_argument("ios needs b >= 1");
  if (const auto* u = std::get_if<UbarSelect>(&rule); u && u->b == 0)
    throw std::invalid_argument("ubar needs b >= 1");
  if (const auto* b = std::get_if<BalanceDecay>(&rule);
      b && (!(b->gamma > 0.0) || !(b->lambda > 0.0 && b->lambda <= 1.0)))
    throw std::invalid_argument("balance needs gamma > 0 and lambda in (0, 1]");
}

namespace {

struct Member {
  std::span<const double> theta;
  double weight;
  double loss;
};

// Neighbors in canonical (lexicographic) order so every rule is order-independent.
std::vector<Member> canonical_neighbors(const Neighborhood& nb) {
  const std::size_t k = nb.neighbor_thetas.size();
  const std::size_t d = nb.self_theta.size();
  if (!nb.weights.empty() && nb.weights.size() != k + 1)
    throw std::invalid_argument("warmup_aggregate: weights must cover self and every neighbor");
  if (!nb.neighbor_losses.empty() && nb.neighbor_losses.size() != k)
    throw std::invalid_argument("warmup_aggregate: one loss per neighbor required");
  const double uniform = 1.0 / static_cast<double>(k + 1);
  std::vector<Member> out;
  out.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    if (nb.neighbor_thetas[j].size() != d) throw std::invalid_argument("warmup_aggregate: dimension mismatch");
    out.push_back({nb.neighbor_thetas[j], nb.weights.empty() ? uniform : nb.weights[j + 1],
                   nb.neighbor_losses.empty() ? 0.0 : nb.neighbor_losses[j]});
  }
  std::sort(out.begin(), out.end(), [](const Member& a, const Member& b) {
    if (lex_less(a.theta, b.theta)) return true;
    if (lex_less(b.theta, a.theta)) return false;
    if (a.weight != b.weight) return a.weight < b.weight;
    return a.loss < b.loss;
  });
  return out;
}

Vector average_with_self(std::span<const double> self, const std::vector<std::span<const double>>& kept) {
  Vector out(self.begin(), self.end());
  for (const auto& t : kept) simd::axpy(1.0, t, out);
  simd::scale(1.0 / static_cast<double>(kept.size() + 1), out);
  return out;
}

Vector centered_clip(const CenteredClip& rule, const Neighborhood& nb, const std::vector<Member>& members,
                     double self_weight) {
  const std::size_t d = nb.self_theta.size();
  Vector center(nb.self_theta.begin(), nb.self_theta.end());
  Vector diff(d);
  for (std::size_t r = 0; r < rule.rounds; ++r) {
    Vector step(d, 0.0);
    auto add = [&](std::span<const double> theta, double w) {
      for (std::size_t k = 0; k < d; ++k) diff[k] = theta[k] - center[k];
      const double len = norm(diff);
      const double f = (std::isinf(rule.tau) || len <= rule.tau) ? 1.0 : rule.tau / len;
      simd::axpy(w * f, diff, step);
    };
    add(nb.self_theta, self_weight);
    for (const auto& m : members) add(m.theta, m.weight);
    simd::axpy(1.0, step, center);
  }
  return center;
}

Vector ios_remove(const IosRemove& rule, const Neighborhood& nb, std::vector<Member> members, double self_weight) {
  const std::size_t d = nb.self_theta.size();
  auto mean = [&] {
    Vector mu(d, 0.0);
    double total = self_weight;
    simd::axpy(self_weight, nb.self_theta, mu);
    for (const auto& m : members) {
      simd::axpy(m.weight, m.theta, mu);
      total += m.weight;
    }
    simd::scale(1.0 / total, mu);
    return mu;
  };
  for (std::size_t removed = 0; removed < rule.b; ++removed) {
    const Vector mu = mean();
    std::size_t worst = 0;
    double worst_dist = -1.0;
    for (std::size_t j = 0; j < members.size(); ++j) {
      const double dist = simd::squared_distance(members[j].theta, mu);
      if (dist > worst_dist) {  // strict: first in canonical order wins ties
        worst_dist = dist;
        worst = j;
      }
    }
    members.erase(members.begin() + static_cast<std::ptrdiff_t>(worst));
  }
  return mean();
}

Vector balance_decay(const BalanceDecay& rule, const Neighborhood& nb, const std::vector<Member>& members) {
  const double radius =
      rule.gamma * std::pow(rule.lambda, static_cast<double>(nb.iteration)) * norm(nb.self_theta);
  const double r2 = radius * radius;
  std::vector<std::span<const double>> kept;
  for (const auto& m : members)
    if (simd::squared_distance(m.theta, nb.self_theta) <= r2) kept.push_back(m.theta);
  return average_with_self(nb.self_theta, kept);
}

Vector ubar_select(const UbarSelect& rule, const Neighborhood& nb, const std::vector<Member>& members) {
  std::vector<std::pair<double, std::size_t>> by_dist;
  for (std::size_t j = 0; j < members.size(); ++j)
    by_dist.emplace_back(simd::squared_distance(members[j].theta, nb.self_theta), j);
  std::stable_sort(by_dist.begin(), by_dist.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::span<const double>> kept;
  std::size_t best = by_dist.front().second;
  for (std::size_t q = 0; q < rule.b; ++q) {
    const auto j = by_dist[q].second;
    if (members[j].loss <= nb.self_loss) kept.push_back(members[j].theta);
    if (members[j].loss < members[best].loss) best = j;
  }
  if (kept.empty()) kept.push_back(members[best].theta);
  return average_with_self(nb.self_theta, kept);
}

}  // namespace

Vector warmup_aggregate(const WarmupRule& rule, const Neighborhood& nb) {
  if (nb.neighbor_thetas.empty()) throw std::invalid_argument("warmup_aggregate: empty neighborhood");
  validate(rule);
  const std::size_t count = nb.neighbor_thetas.size();
  auto members = canonical_neighbors(nb);
  const double self_weight = nb.weights.empty() ? 1.0 / static_cast<double>(count + 1) : nb.weights.front();

  if (const auto* c = std::get_if<CenteredClip>(&rule)) return centered_clip(*c, nb, members, self_weight);
  if (const auto* i = std::get_if<IosRemove>(&rule)) {
    if (i->b >= count) throw std::invalid_argument("warmup_aggregate: ios b must be below the neighbor count");
    return ios_remove(*i, nb, std::move(members), self_weight);
  }
  if (const auto* b = std::get_if<BalanceDecay>(&rule)) return balance_decay(*b, nb, members);
  const auto& u = std::get<UbarSelect>(rule);
  if (u.b >= count) throw std::invalid_argument("warmup_aggregate: ubar b must be below the neighbor count");
  return ubar_select(u, nb, members);
}

}  // namespace byzsim::robust
