#include "byzsim/rng.hpp"

namespace byzsim {

std::string_view stream_name(Stream s) {
  switch (s) {
    case Stream::Topology: return "topology";
    case Stream::ByzantineSet: return "byzantine_set";
    case Stream::Data: return "data";
    case Stream::SharedDirection: return "shared_direction";
    case Stream::Split: return "split";
    case Stream::Warmup: return "warmup";
    case Stream::DetectionSplit: return "detection_split";
    case Stream::Attack: return "attack";
    case Stream::Optimization: return "optimization";
    case Stream::Test: return "test";
  }
  return "unknown";
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t node, std::uint64_t sub) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
  h = splitmix64(h ^ (node + 0x632be59bd9b4e019ULL));
  h = splitmix64(h ^ (sub + 0x8cb92ba72f3d8dd7ULL));
  return h;
}

}  // namespace byzsim
