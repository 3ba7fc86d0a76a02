#include <cstdlib>
#include <string>

#include "clot/kernels/kernels.hpp"

namespace clot::kernels {

#ifdef CLOT_HAVE_AVX2
const Ops& avx2_ops_impl();
#endif

bool avx2_available() {
#ifdef CLOT_HAVE_AVX2
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Ops& avx2_ops() {
#ifdef CLOT_HAVE_AVX2
  if (avx2_available()) return avx2_ops_impl();
#endif
  return scalar_ops();
}

namespace {

const Ops& select() {
  const char* env = std::getenv("CLOT_KERNELS");
  const std::string mode = env ? env : "auto";
  if (mode == "scalar") return scalar_ops();
  if (mode == "avx2") return avx2_ops();
  return avx2_available() ? avx2_ops() : scalar_ops();
}

}  // namespace

const Ops& ops() {
  static const Ops& chosen = select();
  return chosen;
}

const char* backend_name() { return ops().name; }

}  // namespace clot::kernels
