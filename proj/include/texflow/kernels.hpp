#pragma once

#include <cstddef>

namespace texflow::kernels {

// Data-parallel inner loops, provided as a scalar reference implementation
// and optional ISA-specific variants selected at runtime. Variants must be
// bit-identical to the reference: they use the same operation tree per
// element and no FMA contraction, so IEEE rounding matches lane for lane.
struct Kernels {
  const char* name;

  // Border-clamped bilinear gather. xy holds n (x, y) pixel-space pairs;
  // out receives n*c samples. Integer coordinates resolve to the cell on
  // their right/below (fraction 0), the last row/column clamps.
  void (*gather_bilinear)(const double* img, int h, int w, int c,
                          const double* xy, int n, double* out);

  // out[i] = a[i] * b[i]
  void (*mul)(const double* a, const double* b, double* out, size_t n);

  // p[i] -= lr * g[i]
  void (*sgd_update)(double* p, const double* g, double lr, size_t n);

  // One Adam step over a flat parameter block. c1 = 1/(1-beta1^t) and
  // c2 = 1/(1-beta2^t) are the bias corrections, precomputed by the caller
  // so every variant divides by exactly the same double.
  void (*adam_update)(double* p, double* m, double* v, const double* g, size_t n,
                      double lr, double beta1, double beta2, double eps,
                      double c1, double c2);
};

// Always available.
const Kernels& scalar();

// nullptr when the build or the CPU lacks AVX2.
const Kernels* avx2();

// Runtime selection: AVX2 when available, else scalar. The environment
// variable TEXFLOW_SIMD=scalar|avx2 forces a variant (read once).
const Kernels& active();

namespace detail {
// Reference implementations, reused by the vector variants for loop tails.
void gather_bilinear_scalar(const double* img, int h, int w, int c,
                            const double* xy, int n, double* out);
void mul_scalar(const double* a, const double* b, double* out, size_t n);
void sgd_update_scalar(double* p, const double* g, double lr, size_t n);
void adam_update_scalar(double* p, double* m, double* v, const double* g, size_t n,
                        double lr, double beta1, double beta2, double eps,
                        double c1, double c2);
}  // namespace detail

}  // namespace texflow::kernels
