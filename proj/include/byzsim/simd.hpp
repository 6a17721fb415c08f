#pragma once

// Dense double-precision kernels behind the hot loops (gradients, gossip
// mixing, distances). A scalar reference table always exists; an AVX2+FMA
// table is compiled on x86-64 and picked at runtime when the CPU supports it.
//
// BYZSIM_SIMD=scalar|avx2|auto in the environment overrides the choice made
// on first use of active().

#include <cstddef>
#include <span>

namespace byzsim::simd {

enum class Isa { Scalar, Avx2 };

struct Kernels {
  Isa isa;
  const char* name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // x *= a
  void (*scale)(double a, double* x, std::size_t n);
};

const Kernels& scalar_kernels();

// Null when the build has no AVX2 table or the CPU lacks AVX2/FMA.
const Kernels* avx2_kernels();

const Kernels& active();

const char* isa_name(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  active().axpy(a, x.data(), y.data(), y.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}

inline double squared_norm(std::span<const double> a) {
  return active().dot(a.data(), a.data(), a.size());
}

inline void scale(double a, std::span<double> x) { active().scale(a, x.data(), x.size()); }

}  // namespace byzsim::simd
