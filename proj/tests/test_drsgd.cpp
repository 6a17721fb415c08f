#include <doctest.h>

#include <cmath>
#include <sstream>

#include "byzsim/drsgd.hpp"
#include "byzsim/simd.hpp"
#include "support.hpp"

using namespace byzsim;
using namespace byzsim::drsgd;

namespace {

topology::MixingMatrix a2x2() {
  Matrix m(2, 2);
  m(0, 0) = 0.9;
  m(0, 1) = 0.1;
  m(1, 0) = 0.2;
  m(1, 1) = 0.8;
  return topology::MixingMatrix(m);
}

NodeSet all_nodes(std::size_t m) {
  NodeSet s(m);
  for (std::size_t i = 0; i < m; ++i) s[i] = i;
  return s;
}

// Quadratic local losses 0.5 ||theta - c_i||^2 give gradient theta - c_i.
std::vector<Vector> quadratic_grads(const std::vector<Vector>& thetas, const std::vector<Vector>& centers) {
  std::vector<Vector> g(thetas.size());
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    g[i] = thetas[i];
    for (std::size_t k = 0; k < g[i].size(); ++k) g[i][k] -= centers[i][k];
  }
  return g;
}

problem::GlobalObjective small_objective(std::size_t d, std::uint64_t seed) {
  const auto data = problem::generate_network_data(problem::LinearTask::make(d), 3, 40, {}, problem::NoAttack{}, seed);
  return problem::GlobalObjective(data);
}

}  // namespace

TEST_CASE("initial tracking matrix") {
  const auto a = a2x2();
  CHECK(init_y(a, 1) == a.weights());
  const auto y2 = init_y(a, 2);
  CHECK(y2(0, 0) == doctest::Approx(0.83).epsilon(1e-14));
  CHECK(y2(0, 1) == doctest::Approx(0.17).epsilon(1e-14));
  CHECK(y2(1, 0) == doctest::Approx(0.34).epsilon(1e-14));
  CHECK(y2(1, 1) == doctest::Approx(0.66).epsilon(1e-14));
  CHECK_THROWS(init_y(a, 0));
  Matrix bad(2, 2, 0.7);
  CHECK_THROWS(init_y(topology::MixingMatrix(bad), 1));

  const auto w = topology::metropolis_weights(topology::gen_erdos_renyi(12, 0.5, 3));
  const auto y = init_y(w, 400);
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t j = 0; j < 12; ++j) CHECK(y(i, j) == doctest::Approx(1.0 / 12).epsilon(1e-9));
}

TEST_CASE("single node reduces to plain SGD") {
  OptimizerState s;
  s.thetas = {Vector{1.0, -2.0}};
  s.y = Matrix(1, 1, 1.0);
  const topology::MixingMatrix one(Matrix(1, 1, 1.0));
  const auto next = step(s, one, std::vector<Vector>{{0.5, 0.25}}, 0.1);
  CHECK(next.thetas[0][0] == doctest::Approx(0.95));
  CHECK(next.thetas[0][1] == doctest::Approx(-2.025));
  CHECK(next.k == 1);
}

TEST_CASE("zero gradients give a pure consensus step") {
  Rng rng(1, Stream::Test);
  const auto w = topology::MixingMatrix(testing::random_row_stochastic(5, rng));
  OptimizerState s;
  for (int i = 0; i < 5; ++i) s.thetas.push_back(testing::random_vector(rng, 3));
  s.y = init_y(w, 3);
  const auto next = step(s, w, std::vector<Vector>(5, Vector(3, 0.0)), 0.3);
  for (std::size_t i = 0; i < 5; ++i) {
    Vector mix(3, 0.0);
    for (std::size_t j = 0; j < 5; ++j)
      for (std::size_t k = 0; k < 3; ++k) mix[k] += w(i, j) * s.thetas[j][k];
    CHECK(testing::max_abs_diff(mix, next.thetas[i]) < 1e-15);
  }
}

TEST_CASE("the divisor uses the updated tracking vector") {
  const auto a = a2x2();
  OptimizerState s;
  s.thetas = {Vector{0.0}, Vector{0.0}};
  s.y = init_y(a, 1);
  const auto next = step(s, a, std::vector<Vector>{{1.0}, {1.0}}, 1.0);
  CHECK(next.thetas[0][0] == doctest::Approx(-1.0 / 0.83));
  CHECK(next.thetas[1][0] == doctest::Approx(-1.0 / 0.66));
}

TEST_CASE("a vanishing divisor is an error unless the node is outside the rescaled set") {
  Matrix m = Matrix::identity(2);
  const topology::MixingMatrix w(m);
  OptimizerState s;
  s.thetas = {Vector{0.0}, Vector{0.0}};
  s.y = Matrix(2, 2);
  s.y(0, 1) = 1.0;
  s.y(1, 1) = 1.0;
  CHECK_THROWS_AS(step(s, w, std::vector<Vector>{{1.0}, {1.0}}, 0.1), std::runtime_error);
  const auto ok = step(s, w, std::vector<Vector>{{1.0}, {1.0}}, 0.1, NodeSet{1});
  CHECK(ok.thetas[0][0] == doctest::Approx(-0.1));
}

TEST_CASE("weighted average follows the rescaled recursion exactly") {
  Rng rng(2, Stream::Test);
  for (int t = 0; t < 10; ++t) {
    const auto w = topology::MixingMatrix(testing::random_row_stochastic(5, rng));
    const auto prof = topology::spectral_profile(w);
    const auto scc = all_nodes(5);
    OptimizerState s;
    for (int i = 0; i < 5; ++i) s.thetas.push_back(testing::random_vector(rng, 4));
    s.y = init_y(w, 1 + rng.index(4));
    const double eta = 0.05;
    for (int k = 0; k < 50; ++k) {
      std::vector<Vector> g;
      for (int i = 0; i < 5; ++i) g.push_back(testing::random_vector(rng, 4));
      auto expect = weighted_average(s.thetas, scc, prof.v1);
      const auto next = step(s, w, g, eta);
      for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t q = 0; q < 4; ++q) expect[q] -= eta * prof.v1[i] / next.y(i, i) * g[i][q];
      CHECK(testing::max_abs_diff(weighted_average(next.thetas, scc, prof.v1), expect) <= 1e-12);
      s = next;
    }
  }
}

TEST_CASE("tracking vectors stay on the simplex") {
  Rng rng(3, Stream::Test);
  const auto w = topology::MixingMatrix(testing::random_row_stochastic(7, rng));
  OptimizerState s;
  s.thetas.assign(7, Vector(2, 0.0));
  s.y = init_y(w, 2);
  for (int k = 0; k < 200; ++k) {
    s = step(s, w, std::vector<Vector>(7, Vector{1.0, 1.0}), 0.01);
    for (std::size_t i = 0; i < 7; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < 7; ++j) {
        CHECK(s.y(i, j) >= 0.0);
        sum += s.y(i, j);
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("metrics on hand-sized states") {
  const auto f = small_objective(1, 1);
  SUBCASE("two nodes") {
    OptimizerState s;
    s.thetas = {Vector{0.0}, Vector{3.0}};
    s.y = init_y(a2x2(), 1);
    const std::vector<double> v1{2.0 / 3, 1.0 / 3};
    const auto row = compute_metrics(s, all_nodes(2), v1, f);
    CHECK(weighted_average(s.thetas, all_nodes(2), v1)[0] == doctest::Approx(1.0));
    CHECK(row.consensus_mk == doctest::Approx(2.5));
    CHECK(row.grad_norm_bar == doctest::Approx(std::abs(f.gradient(Vector{1.5})[0])));
    CHECK(row.grad_norm_tilde == doctest::Approx(std::abs(f.gradient(Vector{1.0})[0])));
    CHECK(row.gap == doctest::Approx(f.optimality_gap(Vector{1.0})));
  }
  SUBCASE("consensus") {
    OptimizerState s;
    s.thetas = {Vector{0.7}, Vector{0.7}};
    s.y = init_y(a2x2(), 1);
    const auto row = compute_metrics(s, all_nodes(2), std::vector<double>{2.0 / 3, 1.0 / 3}, f);
    CHECK(row.consensus_mk == 0.0);
    CHECK(row.grad_norm_bar == row.grad_norm_tilde);
  }
}

TEST_CASE("tracking residual equals the explicit power deviation") {
  Rng rng(4, Stream::Test);
  const auto w = topology::MixingMatrix(testing::random_row_stochastic(6, rng));
  const auto prof = topology::spectral_profile(w);
  const auto f = small_objective(2, 2);
  const std::size_t t0 = 3;
  OptimizerState s;
  s.thetas.assign(6, Vector(2, 0.0));
  s.y = init_y(w, t0);
  for (std::size_t k = 0; k < 30; ++k) {
    Matrix dev = power(w.weights(), k + t0);
    for (std::size_t r = 0; r < 6; ++r)
      for (std::size_t c = 0; c < 6; ++c) dev(r, c) -= prof.v1[c];
    const auto row = compute_metrics(s, all_nodes(6), prof.v1, f);
    CHECK(std::abs(row.tracking_residual - spectral_norm(dev)) <= 1e-10);
    s = step(s, w, std::vector<Vector>(6, Vector(2, 0.0)), 0.1);
  }
}

TEST_CASE("tracking residual decays geometrically at the spectral rate") {
  Rng rng(5, Stream::Test);
  for (int t = 0; t < 5; ++t) {
    const auto w = topology::MixingMatrix(testing::random_row_stochastic(10, rng));
    const auto prof = topology::spectral_profile(w);
    const auto f = small_objective(2, 3);
    OptimizerState s;
    s.thetas.assign(10, Vector(2, 0.0));
    s.y = init_y(w, 1);
    std::vector<double> logs;
    for (int k = 0; k < 200; ++k) {
      const double r = compute_metrics(s, all_nodes(10), prof.v1, f).tracking_residual;
      if (r < 1e-11) break;
      logs.push_back(std::log(r));
      s = step(s, w, std::vector<Vector>(10, Vector(2, 0.0)), 0.1);
    }
    REQUIRE(logs.size() > 10);
    // least-squares slope over the second half of the decay
    const std::size_t lo = logs.size() / 2;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = double(logs.size() - lo);
    for (std::size_t k = lo; k < logs.size(); ++k) {
      sx += double(k);
      sy += logs[k];
      sxx += double(k) * double(k);
      sxy += double(k) * logs[k];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    INFO("slope " << slope << " log rho " << std::log(prof.rho));
    CHECK(slope < 0.0);
    CHECK(slope == doctest::Approx(std::log(prof.rho)).epsilon(0.15));
    for (std::size_t k = lo + 1; k < logs.size(); ++k) CHECK(logs[k] <= logs[k - 1] + 1e-9);
  }
}

TEST_CASE("on a doubly stochastic block rescaled steps approach DSGD with step m_g eta") {
  const std::size_t m = 8;
  const auto w = topology::metropolis_weights(topology::gen_erdos_renyi(m, 0.5, 11));
  Rng rng(6, Stream::Test);
  std::vector<Vector> centers;
  for (std::size_t i = 0; i < m; ++i) centers.push_back(testing::random_vector(rng, 3, 5.0));
  const double eta = 0.01;
  OptimizerState s;
  s.thetas.assign(m, Vector(3, 0.0));
  s.y = init_y(w, 1);
  for (int k = 0; k < 300; ++k) s = step(s, w, quadratic_grads(s.thetas, centers), eta);

  const auto g = quadratic_grads(s.thetas, centers);
  const auto ours = step(s, w, g, eta);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t q = 0; q < 3; ++q) {
      double mix = 0.0;
      for (std::size_t j = 0; j < m; ++j) mix += w(i, j) * s.thetas[j][q];
      const double dsgd = mix - double(m) * eta * g[i][q] - s.thetas[i][q];
      const double upd = ours.thetas[i][q] - s.thetas[i][q];
      CHECK(std::abs(upd - dsgd) <= 0.01 * std::abs(dsgd) + 1e-15);
    }
    CHECK(ours.y(i, i) == doctest::Approx(1.0 / double(m)).epsilon(1e-9));
  }
}

TEST_CASE("step size and tracking power defaults") {
  CHECK(default_eta(25, 100) == doctest::Approx(0.02));
  topology::SpectralProfile p;
  p.v1 = {0.5, 0.5};
  p.rho = 0.5;
  p.c_const = 1e-6;  // tiny constants would call for a negative power
  p.w_const = 1.0;
  CHECK(default_t0(p, 2) == 1);
  p.c_const = 1e6;
  p.w_const = 1e6;
  CHECK(default_t0(p, 2) == 50);
  p.c_const = 2.0;
  p.w_const = 2.0;
  // m_g / (48 * 4 * 16 * 0.5) = 2 / 1536; log / (2 log 0.5) = 4.78.. -> 5
  CHECK(default_t0(p, 2) == 5);
}

namespace {

struct SingleNode {
  std::vector<problem::NodeDataset> data;
  topology::MixingMatrix w{Matrix(1, 1, 1.0)};
  topology::SpectralProfile prof;
  problem::GlobalObjective obj;
  Network net;
  SingleNode()
      : data(problem::generate_network_data(problem::LinearTask::make(8), 1, 30, {}, problem::NoAttack{}, 5)),
        prof(topology::spectral_profile(w)),
        obj(data) {
    net.weights = &w;
    net.scc = {0};
    net.profile = &prof;
    net.data = data;
    net.seed = 77;
    net.objective = &obj;
  }
};

}  // namespace

TEST_CASE("single-node optimization matches a scalar SGD trajectory bitwise") {
  SingleNode sn;
  Options opt;
  opt.iterations = 200;
  opt.batch = 4;
  opt.eta = 0.05;
  const auto res = run_optimization(sn.net, opt);

  Vector theta(8, 0.0);
  Rng rng(77, Stream::Optimization, 0);
  const bool fused = simd::active().isa == simd::Isa::Avx2;
  std::vector<std::size_t> batch(4);
  for (int k = 0; k < 200; ++k) {
    for (auto& u : batch) u = rng.index(30);
    const auto g = problem::minibatch_gradient(theta, sn.data[0], batch).vector;
    for (std::size_t q = 0; q < 8; ++q) theta[q] = fused ? std::fma(-0.05, g[q], theta[q]) : theta[q] + -0.05 * g[q];
  }
  CHECK(res.state.thetas[0] == theta);
}

TEST_CASE("zero iterations record only the starting point") {
  SingleNode sn;
  Options opt;
  opt.iterations = 0;
  const auto res = run_optimization(sn.net, opt);
  REQUIRE(res.metrics.size() == 1);
  CHECK(res.metrics[0].k == 0);
  CHECK(res.metrics[0].gap == doctest::Approx(sn.obj.optimality_gap(Vector(8, 0.0))));
}

TEST_CASE("an empty component is refused") {
  SingleNode sn;
  sn.net.scc.clear();
  CHECK_THROWS_AS(run_optimization(sn.net, Options{}), std::runtime_error);
}

TEST_CASE("metrics csv header") {
  std::ostringstream os;
  MetricsRow r;
  r.k = 3;
  r.eta = 0.5;
  write_metrics_csv(os, RunMetrics{r});
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "k,eta,gap,grad_norm_bar,grad_norm_tilde,consensus_Mk,tracking_residual");
  std::getline(is, line);
  CHECK(line.rfind("3,0.5,0,", 0) == 0);
}
