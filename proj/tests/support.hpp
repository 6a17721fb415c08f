#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "byzsim/bymi.hpp"
#include "byzsim/linalg.hpp"
#include "byzsim/rng.hpp"
#include "byzsim/topology.hpp"

namespace testing {

using byzsim::Matrix;
using byzsim::Vector;

inline Vector random_vector(byzsim::Rng& rng, std::size_t n, double scale = 1.0) {
  Vector v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

inline double max_abs_diff(const Vector& a, const Vector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline Matrix from_rows(const std::vector<Vector>& rows) {
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  return m;
}

// Reachability sets by BFS; used as the oracle for SCC computations.
inline std::vector<std::vector<char>> reachability(const byzsim::topology::DirectedGraph& g) {
  const std::size_t m = g.size();
  std::vector<std::vector<char>> reach(m, std::vector<char>(m, 0));
  for (std::size_t s = 0; s < m; ++s) {
    std::queue<std::size_t> q;
    q.push(s);
    reach[s][s] = 1;
    while (!q.empty()) {
      const auto u = q.front();
      q.pop();
      for (auto v : g.out_neighbors(u))
        if (!reach[s][v]) {
          reach[s][v] = 1;
          q.push(v);
        }
    }
  }
  return reach;
}

inline byzsim::topology::DirectedGraph random_digraph(std::size_t m, double p, byzsim::Rng& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> arcs;
  for (std::size_t u = 0; u < m; ++u)
    for (std::size_t v = 0; v < m; ++v)
      if (u != v && rng.bernoulli(p)) arcs.emplace_back(u, v);
  return byzsim::topology::DirectedGraph(m, arcs);
}

// Row-stochastic matrix with positive diagonal on a random strongly connected support.
inline Matrix random_row_stochastic(std::size_t m, byzsim::Rng& rng) {
  Matrix a(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    a(i, i) = 0.2 + rng.uniform();
    a(i, (i + 1) % m) = 0.2 + rng.uniform();
    for (std::size_t j = 0; j < m; ++j)
      if (j != i && rng.bernoulli(0.3)) a(i, j) += rng.uniform();
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += a(i, j);
    for (std::size_t j = 0; j < m; ++j) a(i, j) /= s;
  }
  return a;
}

// Smallest positive |S_j| whose ratio passes, by direct counting over every score.
inline byzsim::bymi::Threshold brute_threshold(const std::vector<double>& s, double alpha) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  double best = inf;
  for (double c : s) {
    const double r = std::abs(c);
    if (r == 0.0 || r >= best) continue;
    int neg = 0, pos = 0;
    for (double x : s) {
      neg += x <= -r;
      pos += x >= r;
    }
    if (double(neg) <= alpha * double(std::max(pos, 1))) best = r;
  }
  byzsim::bymi::Threshold t;
  for (std::size_t j = 0; j < s.size(); ++j)
    if (s[j] >= best) t.detected.push_back(j);
  t.r = t.detected.empty() ? inf : best;
  return t;
}

}  // namespace testing
