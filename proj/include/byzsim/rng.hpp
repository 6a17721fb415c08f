#pragma once

// Seed splitting. Every random draw in a run comes from an engine keyed by
// (master seed, stream, node, sub-index); keys are mixed with splitmix64, so
// adding nodes or phases never shifts another stream's draws.

#include <cstdint>
#include <random>
#include <string_view>

namespace byzsim {

enum class Stream : std::uint64_t {
  Topology = 1,
  ByzantineSet = 2,
  Data = 3,
  SharedDirection = 4,
  Split = 5,
  Warmup = 6,
  DetectionSplit = 7,
  Attack = 8,
  Optimization = 9,
  Test = 100,
};

std::string_view stream_name(Stream s);

std::uint64_t splitmix64(std::uint64_t x);

std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t node = 0,
                          std::uint64_t sub = 0);

class Rng {
 public:
  Rng(std::uint64_t master, Stream stream, std::uint64_t node = 0, std::uint64_t sub = 0)
      : stream_(stream), engine_(derive_seed(master, stream, node, sub)) {}

  Stream stream() const { return stream_; }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  // Uniform in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  bool bernoulli(double p) { return uniform() < p; }

  std::mt19937_64& engine() { return engine_; }

 private:
  Stream stream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace byzsim
