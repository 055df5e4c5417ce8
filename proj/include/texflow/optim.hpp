#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "texflow/grid.hpp"

namespace texflow {

// In-place p -= lr * g.
void sgd_step(std::span<double> params, std::span<const double> grads, double lr);

// Adam with bias correction. State is created lazily on first use and is
// tied to one parameter block.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  int64_t t = 0;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, const AdamConfig& cfg);

// Bounded reparameterization keeping variance values in (lo, hi):
// v = lo + (hi - lo) * logistic(raw). raw = 0 sits at the midpoint.
struct VarianceBounds {
  double lo = 0.25;
  double hi = 4.0;
};

double logistic(double x);
double bound_variance(double raw, VarianceBounds b = {});
double bound_variance_grad(double raw, VarianceBounds b = {});  // dv/draw

VarianceMap bound_variance_map(std::span<const double> raw, int height, int width,
                               VarianceBounds b = {});

// R = lambda * mean((v_i - 1)^2) with v_i = bound_variance(raw_i). Returns R
// and accumulates dR/draw into d_raw (which must match raw's length).
double variance_regularizer(std::span<const double> raw, VarianceBounds b,
                            double lambda, std::span<double> d_raw);

// Central-difference gradient check. fn must be deterministic. Returns the
// maximum over coordinates of |analytic - numeric| / max(|analytic|,
// |numeric|, 1e-12). Throws NumericError if fn produces a non-finite value.
double fd_check(const std::function<double(std::span<const double>)>& fn,
                std::span<const double> point, std::span<const double> analytic,
                double h = 1e-5);

}  // namespace texflow
