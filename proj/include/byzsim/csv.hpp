#pragma once

// Plain CSV dumps for replay and audits. Reals are written with 17
// significant digits so a load reproduces every double bit-for-bit.

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "byzsim/linalg.hpp"
#include "byzsim/topology.hpp"

namespace byzsim::csv {

std::string format_double(double x);

std::vector<std::string> split_line(const std::string& line, char sep = ',');

void write_matrix(std::ostream& os, const Matrix& m);
Matrix read_matrix(std::istream& is);

// "# nodes=<m>" comment line, a "u,v" header, then one edge per line.
void write_graph(std::ostream& os, const topology::UndirectedGraph& g);
topology::UndirectedGraph read_graph(std::istream& is);

}  // namespace byzsim::csv
