#pragma once

#include <cstddef>

// Runtime-dispatched numeric kernels over contiguous double buffers.
// The scalar implementations are the semantic reference; the AVX2 variants
// live in a translation unit compiled with -mavx2 -mfma and are selected at
// first use when the CPU supports them. Set CLOT_KERNELS=scalar|avx2|auto
// to override selection. Scalar and AVX2 results may differ by reduction
// order only; tests/test_kernels.cpp pins the agreement tolerance.

namespace clot::kernels {

struct Ops {
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);  // y += alpha * x
  double (*sum)(const double* x, std::size_t n);
  double (*max)(const double* x, std::size_t n);  // n >= 1
  double (*sq_dist)(const double* a, const double* b, std::size_t n);
  // sum_i exp(x[i] - shift). exp_shift_store additionally writes each term.
  // Full accuracy requires |x[i] - shift| <= 707 (always true after max-shift).
  double (*sum_exp_shift)(const double* x, std::size_t n, double shift);
  double (*exp_shift_store)(const double* x, double* out, std::size_t n, double shift);
  const char* name;
};

const Ops& scalar_ops();
bool avx2_available();
const Ops& avx2_ops();  // falls back to scalar_ops() when AVX2 is unavailable
const Ops& ops();       // cached runtime selection
const char* backend_name();

}  // namespace clot::kernels
