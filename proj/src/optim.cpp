#include "texflow/optim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "texflow/error.hpp"
#include "texflow/kernels.hpp"

namespace texflow {

void sgd_step(std::span<double> params, std::span<const double> grads, double lr) {
  if (params.size() != grads.size())
    throw ShapeError("sgd_step: params/grads length mismatch");
  if (!(lr > 0.0)) throw ConfigError("sgd_step: lr must be positive");
  kernels::active().sgd_update(params.data(), grads.data(), lr, params.size());
}

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size())
    throw ShapeError("adam_step: params/grads length mismatch");
  if (!(cfg.lr > 0.0) || !(cfg.eps > 0.0) || !(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) ||
      !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0))
    throw ConfigError("adam_step: invalid hyperparameters");
  if (state.t == 0) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size())
    throw ShapeError("adam_step: state belongs to a different parameter block");
  state.t += 1;
  const double c1 = 1.0 / (1.0 - std::pow(cfg.beta1, static_cast<double>(state.t)));
  const double c2 = 1.0 / (1.0 - std::pow(cfg.beta2, static_cast<double>(state.t)));
  kernels::active().adam_update(params.data(), state.m.data(), state.v.data(),
                                grads.data(), params.size(), cfg.lr, cfg.beta1,
                                cfg.beta2, cfg.eps, c1, c2);
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double bound_variance(double raw, VarianceBounds b) {
  return b.lo + (b.hi - b.lo) * logistic(raw);
}

double bound_variance_grad(double raw, VarianceBounds b) {
  const double s = logistic(raw);
  return (b.hi - b.lo) * s * (1.0 - s);
}

VarianceMap bound_variance_map(std::span<const double> raw, int height, int width,
                               VarianceBounds b) {
  if (raw.size() != static_cast<size_t>(height) * width)
    throw ShapeError("bound_variance_map: raw length != height*width");
  VarianceMap var(height, width);
  for (size_t i = 0; i < raw.size(); ++i) var.data[i] = bound_variance(raw[i], b);
  return var;
}

double variance_regularizer(std::span<const double> raw, VarianceBounds b,
                            double lambda, std::span<double> d_raw) {
  if (raw.size() != d_raw.size())
    throw ShapeError("variance_regularizer: raw/d_raw length mismatch");
  if (raw.empty()) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(raw.size());
  double acc = 0.0;
  for (size_t i = 0; i < raw.size(); ++i) {
    const double v = bound_variance(raw[i], b);
    acc += (v - 1.0) * (v - 1.0);
    d_raw[i] += lambda * 2.0 * (v - 1.0) * inv_n * bound_variance_grad(raw[i], b);
  }
  return lambda * acc * inv_n;
}

double fd_check(const std::function<double(std::span<const double>)>& fn,
                std::span<const double> point, std::span<const double> analytic,
                double h) {
  if (point.size() != analytic.size())
    throw ShapeError("fd_check: point/analytic length mismatch");
  if (!(h > 0.0)) throw ConfigError("fd_check: h must be positive");
  std::vector<double> x(point.begin(), point.end());
  double worst = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double fp = fn(x);
    x[i] = saved - h;
    const double fm = fn(x);
    x[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("fd_check: function returned a non-finite value");
    const double numeric = (fp - fm) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-12});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace texflow
