#include "byzsim/csv.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace byzsim::csv {

std::string format_double(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<std::string> split_line(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

void write_matrix(std::ostream& os, const Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) os << ',';
      os << format_double(m(r, c));
    }
    os << '\n';
  }
}

Matrix read_matrix(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    for (const auto& f : split_line(line)) row.push_back(std::stod(f));
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("read_matrix: ragged rows");
    rows.push_back(std::move(row));
  }
  Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  return m;
}

void write_graph(std::ostream& os, const topology::UndirectedGraph& g) {
  os << "# nodes=" << g.size() << "\nu,v\n";
  for (const auto& [u, v] : g.edges()) os << u << ',' << v << '\n';
}

topology::UndirectedGraph read_graph(std::istream& is) {
  std::string line;
  std::size_t m = 0;
  bool have_m = false;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  while (std::getline(is, line)) {
    if (line.rfind("# nodes=", 0) == 0) {
      m = std::stoul(line.substr(8));
      have_m = true;
      continue;
    }
    if (line.empty() || line[0] == '#' || line.rfind("u,v", 0) == 0) continue;
    const auto f = split_line(line);
    if (f.size() != 2) throw std::runtime_error("read_graph: expected two fields per edge");
    edges.emplace_back(std::stoul(f[0]), std::stoul(f[1]));
  }
  if (!have_m) throw std::runtime_error("read_graph: missing '# nodes=' line");
  return topology::UndirectedGraph(m, std::move(edges));
}

}  // namespace byzsim::csv
