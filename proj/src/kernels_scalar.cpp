#include <algorithm>
#include <cmath>

#include "texflow/kernels.hpp"

namespace texflow::kernels::detail {

void gather_bilinear_scalar(const double* img, int h, int w, int c,
                            const double* xy, int n, double* out) {
  const double xmax = static_cast<double>(w - 1);
  const double ymax = static_cast<double>(h - 1);
  for (int i = 0; i < n; ++i) {
    const double x = std::min(std::max(xy[2 * i + 0], 0.0), xmax);
    const double y = std::min(std::max(xy[2 * i + 1], 0.0), ymax);
    const double x0f = std::floor(x);
    const double y0f = std::floor(y);
    const double fx = x - x0f;
    const double fy = y - y0f;
    const int x0 = static_cast<int>(x0f);
    const int y0 = static_cast<int>(y0f);
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double l00 = (1.0 - fx) * (1.0 - fy);
    const double l01 = fx * (1.0 - fy);
    const double l10 = (1.0 - fx) * fy;
    const double l11 = fx * fy;
    const size_t r0 = static_cast<size_t>(y0) * w;
    const size_t r1 = static_cast<size_t>(y1) * w;
    for (int ch = 0; ch < c; ++ch) {
      const double v00 = img[(r0 + x0) * c + ch];
      const double v01 = img[(r0 + x1) * c + ch];
      const double v10 = img[(r1 + x0) * c + ch];
      const double v11 = img[(r1 + x1) * c + ch];
      out[static_cast<size_t>(i) * c + ch] =
          (v00 * l00 + v01 * l01) + (v10 * l10 + v11 * l11);
    }
  }
}

void mul_scalar(const double* a, const double* b, double* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void sgd_update_scalar(double* p, const double* g, double lr, size_t n) {
  for (size_t i = 0; i < n; ++i) p[i] = p[i] - lr * g[i];
}

void adam_update_scalar(double* p, double* m, double* v, const double* g, size_t n,
                        double lr, double beta1, double beta2, double eps,
                        double c1, double c2) {
  const double om1 = 1.0 - beta1;
  const double om2 = 1.0 - beta2;
  for (size_t i = 0; i < n; ++i) {
    const double gi = g[i];
    const double mi = beta1 * m[i] + om1 * gi;
    const double vi = beta2 * v[i] + om2 * (gi * gi);
    m[i] = mi;
    v[i] = vi;
    const double mhat = mi * c1;
    const double vhat = vi * c2;
    p[i] = p[i] - (lr * mhat) / (std::sqrt(vhat) + eps);
  }
}

}  // namespace texflow::kernels::detail

namespace texflow::kernels {

const Kernels& scalar() {
  static const Kernels k = {
      "scalar",
      detail::gather_bilinear_scalar,
      detail::mul_scalar,
      detail::sgd_update_scalar,
      detail::adam_update_scalar,
  };
  return k;
}

}  // namespace texflow::kernels
