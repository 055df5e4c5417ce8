// AVX2 variants of the data-parallel kernels. This is the only translation
// unit built with -mavx2; it must not be entered on CPUs without AVX2
// (the dispatcher checks). No FMA anywhere: each multiply and add rounds
// separately, exactly like the scalar reference, so results are bit-equal.

#include <immintrin.h>

#include <climits>
#include <cstddef>

#include "texflow/kernels.hpp"

namespace texflow::kernels {

namespace {

void gather_bilinear_avx2(const double* img, int h, int w, int c,
                          const double* xy, int n, double* out) {
  // Gather indices are 32-bit; huge images take the reference path.
  if (static_cast<size_t>(h) * w * c > static_cast<size_t>(INT_MAX)) {
    detail::gather_bilinear_scalar(img, h, w, c, xy, n, out);
    return;
  }
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d xmax = _mm256_set1_pd(static_cast<double>(w - 1));
  const __m256d ymax = _mm256_set1_pd(static_cast<double>(h - 1));
  const __m128i wi = _mm_set1_epi32(w);
  const __m128i ci = _mm_set1_epi32(c);
  const __m128i one_i = _mm_set1_epi32(1);
  const __m128i xlast = _mm_set1_epi32(w - 1);
  const __m128i ylast = _mm_set1_epi32(h - 1);
  const __m128i xsel = _mm_set_epi32(6, 4, 2, 0);
  const __m128i ysel = _mm_set_epi32(7, 5, 3, 1);

  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const double* base = xy + 2 * i;
    __m256d x = _mm256_i32gather_pd(base, xsel, 8);
    __m256d y = _mm256_i32gather_pd(base, ysel, 8);
    x = _mm256_min_pd(_mm256_max_pd(x, zero), xmax);
    y = _mm256_min_pd(_mm256_max_pd(y, zero), ymax);
    const __m256d x0f = _mm256_floor_pd(x);
    const __m256d y0f = _mm256_floor_pd(y);
    const __m256d fx = _mm256_sub_pd(x, x0f);
    const __m256d fy = _mm256_sub_pd(y, y0f);
    const __m128i x0 = _mm256_cvttpd_epi32(x0f);
    const __m128i y0 = _mm256_cvttpd_epi32(y0f);
    const __m128i x1 = _mm_min_epi32(_mm_add_epi32(x0, one_i), xlast);
    const __m128i y1 = _mm_min_epi32(_mm_add_epi32(y0, one_i), ylast);

    const __m256d gx = _mm256_sub_pd(one, fx);
    const __m256d gy = _mm256_sub_pd(one, fy);
    const __m256d l00 = _mm256_mul_pd(gx, gy);
    const __m256d l01 = _mm256_mul_pd(fx, gy);
    const __m256d l10 = _mm256_mul_pd(gx, fy);
    const __m256d l11 = _mm256_mul_pd(fx, fy);

    const __m128i r0 = _mm_mullo_epi32(y0, wi);
    const __m128i r1 = _mm_mullo_epi32(y1, wi);
    const __m128i p00 = _mm_mullo_epi32(_mm_add_epi32(r0, x0), ci);
    const __m128i p01 = _mm_mullo_epi32(_mm_add_epi32(r0, x1), ci);
    const __m128i p10 = _mm_mullo_epi32(_mm_add_epi32(r1, x0), ci);
    const __m128i p11 = _mm_mullo_epi32(_mm_add_epi32(r1, x1), ci);

    for (int ch = 0; ch < c; ++ch) {
      const __m128i off = _mm_set1_epi32(ch);
      const __m256d v00 = _mm256_i32gather_pd(img, _mm_add_epi32(p00, off), 8);
      const __m256d v01 = _mm256_i32gather_pd(img, _mm_add_epi32(p01, off), 8);
      const __m256d v10 = _mm256_i32gather_pd(img, _mm_add_epi32(p10, off), 8);
      const __m256d v11 = _mm256_i32gather_pd(img, _mm_add_epi32(p11, off), 8);
      const __m256d acc =
          _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(v00, l00), _mm256_mul_pd(v01, l01)),
                        _mm256_add_pd(_mm256_mul_pd(v10, l10), _mm256_mul_pd(v11, l11)));
      if (c == 1) {
        _mm256_storeu_pd(out + i, acc);
      } else {
        alignas(32) double tmp[4];
        _mm256_store_pd(tmp, acc);
        for (int k = 0; k < 4; ++k) out[static_cast<size_t>(i + k) * c + ch] = tmp[k];
      }
    }
  }
  if (i < n)
    detail::gather_bilinear_scalar(img, h, w, c, xy + 2 * i, n - i,
                                   out + static_cast<size_t>(i) * c);
}

void mul_avx2(const double* a, const double* b, double* out, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i,
                     _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  if (i < n) detail::mul_scalar(a + i, b + i, out + i, n - i);
}

void sgd_update_avx2(double* p, const double* g, double lr, size_t n) {
  const __m256d vlr = _mm256_set1_pd(lr);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d step = _mm256_mul_pd(vlr, _mm256_loadu_pd(g + i));
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
  }
  if (i < n) detail::sgd_update_scalar(p + i, g + i, lr, n - i);
}

void adam_update_avx2(double* p, double* m, double* v, const double* g, size_t n,
                      double lr, double beta1, double beta2, double eps,
                      double c1, double c2) {
  const __m256d vb1 = _mm256_set1_pd(beta1);
  const __m256d vb2 = _mm256_set1_pd(beta2);
  const __m256d vo1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d vo2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d vc1 = _mm256_set1_pd(c1);
  const __m256d vc2 = _mm256_set1_pd(c2);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gi = _mm256_loadu_pd(g + i);
    const __m256d mi =
        _mm256_add_pd(_mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(vo1, gi));
    const __m256d vi = _mm256_add_pd(_mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)),
                                     _mm256_mul_pd(vo2, _mm256_mul_pd(gi, gi)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d mhat = _mm256_mul_pd(mi, vc1);
    const __m256d vhat = _mm256_mul_pd(vi, vc2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
  }
  if (i < n)
    detail::adam_update_scalar(p + i, m + i, v + i, g + i, n - i, lr, beta1, beta2, eps,
                               c1, c2);
}

}  // namespace

const Kernels* avx2_table() {
  static const Kernels k = {
      "avx2", gather_bilinear_avx2, mul_avx2, sgd_update_avx2, adam_update_avx2,
  };
  return &k;
}

}  // namespace texflow::kernels
