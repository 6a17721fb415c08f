#include <cstdlib>
#include <cstring>

#include "byzsim/simd.hpp"

namespace byzsim::simd {

#if defined(BYZSIM_HAVE_AVX2)
const Kernels& avx2_table();
#endif

const Kernels* avx2_kernels() {
#if defined(BYZSIM_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const Kernels& choose() {
  const char* env = std::getenv("BYZSIM_SIMD");
  if (env != nullptr && std::strcmp(env, "scalar") == 0) return scalar_kernels();
  if (const Kernels* k = avx2_kernels()) return *k;
  return scalar_kernels();
}

}  // namespace

const Kernels& active() {
  static const Kernels& k = choose();
  return k;
}

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
  }
  return "unknown";
}

}  // namespace byzsim::simd
