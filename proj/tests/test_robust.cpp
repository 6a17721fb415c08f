#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "byzsim/robust.hpp"
#include "byzsim/simd.hpp"
#include "support.hpp"

using namespace byzsim;
using namespace byzsim::robust;

namespace {

// Owns the parameters the Neighborhood's spans point into.
struct Hood : Neighborhood {
  Vector self_store;
  std::vector<Vector> nbr_store;
  Hood(Vector self, std::vector<Vector> nbrs) : self_store(std::move(self)), nbr_store(std::move(nbrs)) {
    self_theta = self_store;
    for (const auto& v : nbr_store) neighbor_thetas.emplace_back(v);
  }
  Hood(const Hood&) = delete;
};


std::vector<Vector> gaussian_cloud(Rng& rng, std::size_t n, std::size_t d, const Vector& mu) {
  std::vector<Vector> out(n);
  for (auto& v : out) {
    v = testing::random_vector(rng, d);
    for (std::size_t k = 0; k < d; ++k) v[k] += mu[k];
  }
  return out;
}

const std::vector<RobustMeanEstimator> kEstimators{CoordinateMedian{}, TrimmedMean{0.2}, Filtering{0.2}};

}  // namespace

TEST_CASE("coordinate median") {
  CHECK(coordinate_median(std::vector<Vector>{{1, 5}, {2, 4}, {3, 3}}) == Vector{2, 4});
  CHECK(coordinate_median(std::vector<Vector>{{0, 0}, {2, 2}}) == Vector{1, 1});
  CHECK_THROWS(coordinate_median(std::vector<Vector>{}));

  Rng rng(1, Stream::Test);
  for (int t = 0; t < 20; ++t) {
    auto pts = gaussian_cloud(rng, 99, 4, Vector(4, 0.0));
    Vector lo(4, std::numeric_limits<double>::infinity()), hi(4, -std::numeric_limits<double>::infinity());
    for (const auto& p : pts)
      for (std::size_t k = 0; k < 4; ++k) {
        lo[k] = std::min(lo[k], p[k]);
        hi[k] = std::max(hi[k], p[k]);
      }
    pts.push_back(Vector(4, 1e6));
    const auto med = coordinate_median(pts);
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(med[k] >= lo[k]);
      CHECK(med[k] <= hi[k]);
    }
  }
}

TEST_CASE("trimmed mean") {
  const std::vector<Vector> v{{1}, {2}, {3}, {4}, {100}};
  CHECK(trimmed_mean(v, 0.2)[0] == doctest::Approx(3.0));
  CHECK(trimmed_mean(v, 0.0)[0] == doctest::Approx(22.0));
  CHECK_THROWS(trimmed_mean(v, 0.5));
}

TEST_CASE("filtering mean") {
  SUBCASE("identical points") {
    const std::vector<Vector> same(7, Vector{1.5, -2.0, 3.0});
    for (double eps : {0.0, 0.1, 0.3}) CHECK(testing::max_abs_diff(filtering_mean(same, eps), same.front()) < 1e-14);
  }
  SUBCASE("eps zero is the sample mean") {
    Rng rng(2, Stream::Test);
    const auto pts = gaussian_cloud(rng, 30, 5, Vector(5, 1.0));
    CHECK(testing::max_abs_diff(filtering_mean(pts, 0.0), mean_of(pts)) < 1e-14);
  }
  SUBCASE("beats the naive mean against far outliers") {
    int wins = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
      Rng rng(s, Stream::Test, 3);
      const Vector mu = testing::random_vector(rng, 10);
      auto pts = gaussian_cloud(rng, 50, 10, mu);
      for (int o = 0; o < 5; ++o) {
        Vector out = mu;
        out[0] += 100.0;
        pts.push_back(out);
      }
      const double robust_err = std::sqrt(simd::squared_distance(filtering_mean(pts, 0.1), mu));
      const double naive_err = std::sqrt(simd::squared_distance(mean_of(pts), mu));
      if (robust_err < naive_err) ++wins;
    }
    CHECK(wins >= 95);
  }
  SUBCASE("stays near the clean mean with a bounded number of arbitrary outliers") {
    for (std::uint64_t s = 0; s < 30; ++s) {
      Rng rng(s, Stream::Test, 4);
      const std::size_t n = 60;
      const double eps = 0.1;
      const Vector mu(8, 0.0);
      auto pts = gaussian_cloud(rng, n - 6, 8, mu);
      for (int o = 0; o < 6; ++o) pts.push_back(testing::random_vector(rng, 8, 50.0));
      const auto est = filtering_mean(pts, eps);
      // robust std per coordinate is 1; ten of them in norm
      CHECK(norm(est) < 10.0);
    }
  }
  SUBCASE("parameter range") {
    CHECK_THROWS(filtering_mean(std::vector<Vector>{{1}, {2}}, 0.5));
  }
}

TEST_CASE("estimators are permutation invariant") {
  Rng rng(5, Stream::Test);
  for (int t = 0; t < 10; ++t) {
    auto pts = gaussian_cloud(rng, 21, 6, Vector(6, 0.0));
    pts[3][0] = 40.0;
    for (const auto& est : kEstimators) {
      const auto a = estimate_mean(est, pts);
      auto shuffled = pts;
      std::reverse(shuffled.begin(), shuffled.end());
      std::rotate(shuffled.begin(), shuffled.begin() + 7, shuffled.end());
      CHECK(estimate_mean(est, shuffled) == a);
    }
  }
}

TEST_CASE("estimators are translation equivariant") {
  Rng rng(6, Stream::Test);
  for (int t = 0; t < 10; ++t) {
    const auto pts = gaussian_cloud(rng, 25, 5, Vector(5, 0.0));
    const auto c = testing::random_vector(rng, 5, 3.0);
    auto moved = pts;
    for (auto& p : moved)
      for (std::size_t k = 0; k < 5; ++k) p[k] += c[k];
    for (const auto& est : kEstimators) {
      auto expect = estimate_mean(est, pts);
      for (std::size_t k = 0; k < 5; ++k) expect[k] += c[k];
      const double tol = std::holds_alternative<Filtering>(est) ? 1e-8 : 1e-12;
      CHECK(testing::max_abs_diff(estimate_mean(est, moved), expect) <= tol);
    }
  }
}

TEST_CASE("warm-up rules at a consensus point") {
  const Vector v{0.3, -1.2, 4.0};
  const std::vector<WarmupRule> rules{CenteredClip{0.5, 3}, IosRemove{2}, BalanceDecay{}, UbarSelect{2}};
  for (const auto& r : rules) {
    Hood nb(v, {v, v, v, v});
    nb.neighbor_losses = {0, 0, 0, 0};
    const auto out = warmup_aggregate(r, nb);
    CHECK(testing::max_abs_diff(out, v) < 1e-15);
  }
}

TEST_CASE("centered clipping with an infinite radius is the plain average") {
  Rng rng(8, Stream::Test);
  const auto self = testing::random_vector(rng, 4);
  std::vector<Vector> nbrs;
  for (int j = 0; j < 5; ++j) nbrs.push_back(testing::random_vector(rng, 4));
  const auto out = warmup_aggregate(CenteredClip{std::numeric_limits<double>::infinity(), 1}, Hood(self, nbrs));
  auto all = nbrs;
  all.push_back(self);
  CHECK(testing::max_abs_diff(out, mean_of(all)) < 1e-14);
}

TEST_CASE("centered clipping bounds the pull of a far neighbor") {
  const Vector self{0.0, 0.0};
  const auto out = warmup_aggregate(CenteredClip{1.0, 1}, Hood(self, {{1000.0, 0.0}}));
  CHECK(out[0] == doctest::Approx(0.5));
}

TEST_CASE("ios drops the farthest point first") {
  const Vector self{0.0};
  const auto out = warmup_aggregate(IosRemove{1}, Hood(self, {{0.0}, {0.1}, {0.2}, {100.0}}));
  CHECK(out[0] == doctest::Approx(0.075).epsilon(1e-14));
  CHECK_THROWS(warmup_aggregate(IosRemove{4}, Hood(self, {{0.0}, {0.1}, {0.2}, {100.0}})));
}

TEST_CASE("balance keeps neighbors inside a shrinking radius") {
  const Vector self{1.0, 0.0};
  Hood nb(self, {{1.5, 0.0}, {3.0, 0.0}});
  // radius 1 at k = 0 keeps the first neighbor only
  CHECK(warmup_aggregate(BalanceDecay{1.0, 0.5}, nb)[0] == doctest::Approx(1.25));
  // radius 0.25 at k = 2 keeps none
  nb.iteration = 2;
  CHECK(warmup_aggregate(BalanceDecay{1.0, 0.5}, nb)[0] == doctest::Approx(1.0));
}

TEST_CASE("ubar keeps near neighbors with small loss") {
  const Vector self{0.0};
  Hood nb(self, {{1.0}, {2.0}, {10.0}});
  nb.self_loss = 1.0;
  nb.neighbor_losses = {0.5, 5.0, 0.1};
  CHECK(warmup_aggregate(UbarSelect{2}, nb)[0] == doctest::Approx(0.5));
  nb.neighbor_losses = {3.0, 2.0, 0.1};
  // nobody among the two nearest qualifies; the lower-loss one is kept
  CHECK(warmup_aggregate(UbarSelect{2}, nb)[0] == doctest::Approx(1.0));
  CHECK_THROWS(warmup_aggregate(UbarSelect{3}, nb));
}

TEST_CASE("aggregation rules are permutation invariant") {
  Rng rng(9, Stream::Test);
  const std::vector<WarmupRule> rules{CenteredClip{0.7, 3}, IosRemove{2}, BalanceDecay{1.0, 0.9}, UbarSelect{3}};
  for (int t = 0; t < 10; ++t) {
    const auto self = testing::random_vector(rng, 3);
    std::vector<Vector> nbrs;
    std::vector<double> losses;
    for (int j = 0; j < 6; ++j) {
      nbrs.push_back(testing::random_vector(rng, 3));
      losses.push_back(rng.uniform());
    }
    for (const auto& r : rules) {
      Hood a(self, nbrs);
      a.self_loss = 0.5;
      a.neighbor_losses = losses;
      std::vector<Vector> rn(nbrs.rbegin(), nbrs.rend());
      Hood b(self, rn);
      b.self_loss = 0.5;
      b.neighbor_losses.assign(losses.rbegin(), losses.rend());
      CHECK(warmup_aggregate(r, a) == warmup_aggregate(r, b));
    }
  }
}

TEST_CASE("repeated aggregation contracts toward consensus") {
  Rng rng(10, Stream::Test);
  const std::size_t m = 6;
  std::vector<Vector> x;
  for (std::size_t i = 0; i < m; ++i) x.push_back(testing::random_vector(rng, 3, 4.0));
  auto spread = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) s = std::max(s, simd::squared_distance(x[i], x[j]));
    return s;
  };
  for (const WarmupRule& r : std::vector<WarmupRule>{CenteredClip{1.0, 2},
                                                     CenteredClip{std::numeric_limits<double>::infinity(), 1}}) {
    auto y = x;
    double prev = spread();
    for (int round = 0; round < 30; ++round) {
      std::vector<Vector> next(m);
      for (std::size_t i = 0; i < m; ++i) {
        // ring with both neighbors
        next[i] = warmup_aggregate(r, Hood(y[i], {y[(i + 1) % m], y[(i + m - 1) % m]}));
      }
      y = next;
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) s = std::max(s, simd::squared_distance(y[i], y[j]));
      CHECK(s <= prev * (1 + 1e-12));
      prev = s;
    }
  }
}

TEST_CASE("rule and estimator validation") {
  CHECK_THROWS(validate(RobustMeanEstimator{TrimmedMean{0.5}}));
  CHECK_THROWS(validate(RobustMeanEstimator{Filtering{-0.1}}));
  CHECK_THROWS(validate(WarmupRule{CenteredClip{0.0, 1}}));
  CHECK_THROWS(validate(WarmupRule{IosRemove{0}}));
  CHECK_THROWS(validate(WarmupRule{BalanceDecay{1.0, 1.5}}));
  CHECK_NOTHROW(validate(WarmupRule{BalanceDecay{}}));
  CHECK_THROWS(warmup_aggregate(CenteredClip{}, Hood(Vector{0.0}, {})));
}
