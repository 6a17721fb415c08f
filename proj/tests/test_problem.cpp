#include <doctest.h>

#include <cmath>
#include <numeric>

#include "byzsim/problem.hpp"
#include "byzsim/simd.hpp"
#include "support.hpp"

using namespace byzsim;
using namespace byzsim::problem;

namespace {

Eigen::VectorXd least_squares(const NodeDataset& ds, std::span<const std::size_t> idx) {
  const auto d = Eigen::Index(ds.dim());
  Eigen::MatrixXd x(Eigen::Index(idx.size()), d);
  Eigen::VectorXd y(Eigen::Index(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    for (Eigen::Index c = 0; c < d; ++c) x(Eigen::Index(r), c) = ds.x(idx[r], std::size_t(c));
    y(Eigen::Index(r)) = ds.y[idx[r]];
  }
  return x.colPivHouseholderQr().solve(y);
}

std::vector<NodeDataset> normal_only(const std::vector<NodeDataset>& all) {
  std::vector<NodeDataset> out;
  for (const auto& ds : all)
    if (!ds.is_byzantine) out.push_back(ds);
  return out;
}

}  // namespace

TEST_CASE("linear task ground truth") {
  const auto t = LinearTask::make(30);
  CHECK(t.theta_star.size() == 30);
  CHECK(std::accumulate(t.theta_star.begin(), t.theta_star.end(), 0.0) == 3.0);
  CHECK(t.theta_star[2] == 1.0);
  CHECK(t.theta_star[3] == 0.0);
  const auto t9 = LinearTask::make(9);
  CHECK(std::accumulate(t9.theta_star.begin(), t9.theta_star.end(), 0.0) == 0.0);
  CHECK_THROWS(LinearTask::make(0));
}

TEST_CASE("parameter attack regresses Byzantine responses on the attack parameter") {
  const auto task = LinearTask::make(30);
  const auto data = generate_network_data(task, 4, 4000, {1}, ParamAttack{5.0, 0.1}, 17);
  const auto idx = all_indices(data[1]);
  const auto fit = least_squares(data[1], idx);
  for (int k = 0; k < 30; ++k) CHECK(std::abs(fit(k) - (k < 3 ? 5.0 : 0.0)) < 0.1);
  const auto fit0 = least_squares(data[0], idx);
  for (int k = 0; k < 30; ++k) CHECK(std::abs(fit0(k) - task.theta_star[std::size_t(k)]) < 0.1);
  CHECK(data[1].is_byzantine);
  CHECK_FALSE(data[0].is_byzantine);
}

TEST_CASE("no Byzantine ids means every node is clean") {
  const auto data = generate_network_data(LinearTask::make(10), 5, 20, {}, ParamAttack{}, 3);
  for (const auto& ds : data) CHECK_FALSE(ds.is_byzantine);
  CHECK_THROWS(generate_network_data(LinearTask::make(10), 4, 20, {0, 1}, NoAttack{}, 3));
}

TEST_CASE("data attack shifts covariates toward the shared direction") {
  const std::size_t d = 12;
  const std::size_t n = 10000;
  const auto data = generate_network_data(LinearTask::make(d), 3, n, {2}, DataAttack{}, 5);
  const auto vd = shared_shift_direction(d, 5);
  CHECK(norm(vd) == doctest::Approx(1.0));
  const double se = 0.8 / std::sqrt(double(n));
  for (std::size_t k = 0; k < d; ++k) {
    double mean = 0.0;
    for (std::size_t u = 0; u < n; ++u) mean += data[2].x(u, k);
    mean /= double(n);
    CHECK(std::abs(mean - 3.0 * vd[k]) < 5 * se);
  }
}

TEST_CASE("datasets are bitwise reproducible") {
  const auto a = generate_network_data(LinearTask::make(8), 6, 30, {1, 4}, DataAttack{}, 99);
  const auto b = generate_network_data(LinearTask::make(8), 6, 30, {1, 4}, DataAttack{}, 99);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(a[i].x == b[i].x);
    CHECK(a[i].y == b[i].y);
  }
  // adding nodes leaves existing nodes' draws untouched
  const auto c = generate_network_data(LinearTask::make(8), 9, 30, {1, 4}, DataAttack{}, 99);
  CHECK(c[3].x == a[3].x);
}

TEST_CASE("minibatch gradient oracles") {
  const auto data = generate_network_data(LinearTask::make(6), 2, 40, {}, NoAttack{}, 8);
  const auto& ds = data[0];

  SUBCASE("zero at the batch least-squares solution") {
    std::vector<std::size_t> idx{0, 3, 5, 7, 9, 11, 13, 17, 21, 30};
    const auto fit = least_squares(ds, idx);
    const Vector theta(fit.data(), fit.data() + fit.size());
    for (double g : minibatch_gradient(theta, ds, idx).vector) CHECK(std::abs(g) < 1e-10);
  }
  SUBCASE("single sample at the origin") {
    const Vector zero(6, 0.0);
    const std::vector<std::size_t> one{4};
    const auto g = minibatch_gradient(zero, ds, one);
    CHECK(g.batch_size == 1);
    for (std::size_t k = 0; k < 6; ++k) CHECK(g.vector[k] == doctest::Approx(-ds.y[4] * ds.x(4, k)));
  }
  SUBCASE("full batch is the mean of per-sample gradients") {
    Rng rng(2, Stream::Test);
    const auto theta = testing::random_vector(rng, 6);
    const auto full = minibatch_gradient(theta, ds, all_indices(ds)).vector;
    Vector acc(6, 0.0);
    for (std::size_t u = 0; u < ds.size(); ++u) {
      const std::vector<std::size_t> one{u};
      const auto g = minibatch_gradient(theta, ds, one).vector;
      for (std::size_t k = 0; k < 6; ++k) acc[k] += g[k] / double(ds.size());
    }
    CHECK(testing::max_abs_diff(full, acc) < 1e-12);
  }
  SUBCASE("empty and out-of-range batches throw") {
    const Vector zero(6, 0.0);
    CHECK_THROWS(minibatch_gradient(zero, ds, std::vector<std::size_t>{}));
    CHECK_THROWS(minibatch_gradient(zero, ds, std::vector<std::size_t>{40}));
  }
}

TEST_CASE("gradient matches central finite differences") {
  const auto data = generate_network_data(LinearTask::make(7), 1, 50, {}, NoAttack{}, 4);
  Rng rng(44, Stream::Test);
  for (int t = 0; t < 20; ++t) {
    const auto theta = testing::random_vector(rng, 7, 2.0);
    std::vector<std::size_t> idx;
    for (std::size_t u = 0; u < 50; ++u)
      if (rng.bernoulli(0.3)) idx.push_back(u);
    if (idx.empty()) idx.push_back(0);
    const auto g = minibatch_gradient(theta, data[0], idx).vector;
    Vector fd(7);
    const double h = 1e-5;
    for (std::size_t k = 0; k < 7; ++k) {
      auto tp = theta, tm = theta;
      tp[k] += h;
      tm[k] -= h;
      fd[k] = (minibatch_loss(tp, data[0], idx) - minibatch_loss(tm, data[0], idx)) / (2 * h);
    }
    Vector diff(7);
    for (std::size_t k = 0; k < 7; ++k) diff[k] = g[k] - fd[k];
    CHECK(norm(diff) <= 1e-6 * norm(g));
  }
}

TEST_CASE("dataset splits") {
  auto data = generate_network_data(LinearTask::make(4), 3, 100, {}, NoAttack{}, 1);
  const auto s = split_dataset(data[1], 50, 7);
  CHECK(s.identification_indices.size() == 50);
  CHECK(s.warmup_indices.size() == 50);
  std::vector<std::size_t> all = s.identification_indices;
  all.insert(all.end(), s.warmup_indices.begin(), s.warmup_indices.end());
  std::sort(all.begin(), all.end());
  CHECK(all == all_indices(s));

  const auto h = split_identification(s, 3);
  CHECK(h.first.size() == 25);
  CHECK(h.second.size() == 25);
  std::vector<std::size_t> both = h.first;
  both.insert(both.end(), h.second.begin(), h.second.end());
  std::sort(both.begin(), both.end());
  auto ident = s.identification_indices;
  std::sort(ident.begin(), ident.end());
  CHECK(both == ident);

  CHECK(split_dataset(data[1], 98, 7).warmup_indices.size() == 2);
  const auto again = split_dataset(data[1], 50, 7);
  CHECK(again.identification_indices == s.identification_indices);
  CHECK(again.warmup_indices == s.warmup_indices);
  CHECK_THROWS(split_dataset(data[1], 51, 7));
  CHECK_THROWS(split_dataset(data[1], 100, 7));
}

TEST_CASE("message attacks") {
  const std::vector<Vector> clean{{1, 0}, {3, 2}, {2, -2}, {10, 10}};
  SUBCASE("ipm a=1 sends the negated clean mean") {
    const auto out = apply_message_attack(IpmAttack{1.0}, clean, {3}, 1, 0);
    CHECK(out[3][0] == doctest::Approx(-2.0));
    CHECK(out[3][1] == doctest::Approx(0.0));
    CHECK(out[0] == clean[0]);
  }
  SUBCASE("ipm a=2 scales") {
    const std::vector<Vector> c2{{1, 0}, {1, 0}, {7, 7}};
    const auto out = apply_message_attack(IpmAttack{2.0}, c2, {2}, 1, 0);
    CHECK(out[2] == Vector{-2.0, -0.0});
  }
  SUBCASE("no Byzantine nodes leaves messages unchanged") {
    CHECK(apply_message_attack(IpmAttack{}, clean, {}, 1, 0) == clean);
    CHECK(apply_message_attack(GradAttack{}, clean, {}, 1, 0) == clean);
  }
  SUBCASE("data-level attacks are rejected") {
    CHECK_THROWS(apply_message_attack(ParamAttack{}, clean, {3}, 1, 0));
    CHECK_THROWS(apply_message_attack(DataAttack{}, clean, {3}, 1, 0));
  }
  SUBCASE("gradient attack is reproducible per round and fresh across rounds") {
    const auto a = apply_message_attack(GradAttack{}, clean, {3}, 5, 2);
    const auto b = apply_message_attack(GradAttack{}, clean, {3}, 5, 2);
    const auto c = apply_message_attack(GradAttack{}, clean, {3}, 5, 3);
    CHECK(a == b);
    CHECK(a[3] != c[3]);
    CHECK(a[0] == clean[0]);
  }
  SUBCASE("gradient attack centres on half the clean mean plus a fixed offset") {
    GradAttack ga;
    ga.offset_scale = 0.0;
    std::vector<Vector> many(41, Vector{0.0});
    for (std::size_t i = 0; i < 40; ++i) many[i][0] = (i % 2 == 0) ? 3.0 : 1.0;  // mean 2, std 1
    double s = 0.0, s2 = 0.0;
    const int rounds = 4000;
    for (int r = 0; r < rounds; ++r) {
      const double v = apply_message_attack(ga, many, {40}, 9, std::uint64_t(r))[40][0];
      s += v;
      s2 += v * v;
    }
    const double mean = s / rounds;
    const double var = s2 / rounds - mean * mean;
    CHECK(std::abs(mean - 1.0) < 5.0 / std::sqrt(double(rounds)));
    CHECK(var == doctest::Approx(1.0).epsilon(0.1));
  }
}

TEST_CASE("global objective and optimality gap") {
  SUBCASE("hand-checked two-dimensional quadratic") {
    NodeDataset ds;
    ds.x = testing::from_rows({{1, 0}, {0, 2}, {1, 1}});
    ds.y = {1, 2, 0};
    const std::vector<NodeDataset> one{ds};
    const GlobalObjective f(one);
    // f(0) = (1 + 4 + 0) / 6
    CHECK(f.value(Vector{0, 0}) == doctest::Approx(5.0 / 6.0));
    // H = X^T X / 3 = [[2,1],[1,5]] / 3, b = X^T y / 3 = [1, 4] / 3
    // minimizer solves [[2,1],[1,5]] t = [1,4] -> t = (1/9, 7/9)
    CHECK(f.minimizer()[0] == doctest::Approx(1.0 / 9));
    CHECK(f.minimizer()[1] == doctest::Approx(7.0 / 9));
    // f* = 0.5 c - 0.5 b^T t = 5/6 - 0.5 * (1/9 + 28/9) / 3
    const double fstar = 5.0 / 6.0 - 0.5 * (29.0 / 9.0) / 3.0;
    CHECK(f.optimality_gap(Vector{0, 0}) == doctest::Approx(5.0 / 6.0 - fstar));
    CHECK(f.value(f.minimizer()) == doctest::Approx(fstar));
  }
  SUBCASE("gap vanishes at the minimizer and is nonnegative elsewhere") {
    const auto all = generate_network_data(LinearTask::make(10), 8, 30, {2, 5}, ParamAttack{}, 12);
    const auto normal = normal_only(all);
    const GlobalObjective f(normal);
    CHECK(std::abs(f.optimality_gap(f.minimizer())) <= 1e-12);
    Rng rng(6, Stream::Test);
    for (int t = 0; t < 50; ++t) {
      const auto th = testing::random_vector(rng, 10);
      const double gap = f.optimality_gap(th);
      CHECK(gap >= 0.0);
      CHECK(gap == doctest::Approx(f.value(th) - f.value(f.minimizer())).epsilon(1e-8));
    }
    // gradient equals the average of the node full-batch gradients
    const auto th = testing::random_vector(rng, 10);
    Vector avg(10, 0.0);
    for (const auto& ds : normal) {
      const auto g = minibatch_gradient(th, ds, all_indices(ds)).vector;
      for (std::size_t k = 0; k < 10; ++k) avg[k] += g[k] / double(normal.size());
    }
    CHECK(testing::max_abs_diff(avg, f.gradient(th)) < 1e-12);
  }
  SUBCASE("singular pooled design is reported") {
    NodeDataset ds;
    ds.x = testing::from_rows({{1, 1}, {2, 2}});
    ds.y = {1, 2};
    const std::vector<NodeDataset> one{ds};
    CHECK_THROWS_AS(GlobalObjective{one}, std::runtime_error);
  }
}

TEST_CASE("gradient heterogeneity shrinks like one over the local sample size") {
  auto hetero = [](std::size_t n) {
    const auto task = LinearTask::make(10);
    const auto data = generate_network_data(task, 200, n, {}, NoAttack{}, 31);
    const GlobalObjective f(data);
    const auto gbar = f.gradient(task.theta_star);
    double acc = 0.0;
    for (const auto& ds : data) {
      const auto g = minibatch_gradient(task.theta_star, ds, all_indices(ds)).vector;
      acc += simd::squared_distance(g, gbar);
    }
    return acc / 200.0;
  };
  const double ratio = hetero(200) / hetero(100);
  CHECK(ratio > 0.3);
  CHECK(ratio < 0.7);
}
