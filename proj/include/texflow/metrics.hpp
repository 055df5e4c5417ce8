#pragma once

#include <span>
#include <vector>

#include "texflow/grid.hpp"

namespace texflow {

// Mean and population covariance (1/n, not 1/(n-1)) of a feature set.
struct FeatureStats {
  std::vector<double> mean;  // d entries
  std::vector<double> cov;   // d x d, row-major
  int dim() const { return static_cast<int>(mean.size()); }
};

// rows: n feature vectors of equal length d >= 1, n >= 1.
FeatureStats feature_stats(const std::vector<std::vector<double>>& rows);

// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)).
//
// The matrix square root goes through the symmetric route: with
// A = sqrt(S_a) (eigendecomposition, negative eigenvalues clamped to 0),
// Tr sqrt(S_a S_b) = Tr sqrt(A S_b A), and A S_b A is symmetrized before its
// own eigendecomposition. Both covariances get +1e-10 jitter on the diagonal
// first. Covariance asymmetry beyond 1e-6 throws NumericError; dimension
// mismatch throws ShapeError. The result is clamped to >= 0 after asserting
// it is no more negative than -1e-8.
double frechet_distance(const FeatureStats& a, const FeatureStats& b);

// Feature vector from a grid x grid partition of the image: per-cell,
// per-channel mean followed by per-cell, per-channel population standard
// deviation; cells in row-major order, channels innermost. Length is
// 2 * grid^2 * channels. Images smaller than the grid throw ShapeError.
std::vector<double> patch_stats_extractor(const Image& img, int grid);

// Mean local SSIM over all fully-valid 11x11 windows with a Gaussian weight
// window (sigma 1.5), C1 = 0.01^2, C2 = 0.03^2. RGB inputs are reduced to
// luma (0.299 R + 0.587 G + 0.114 B) first. Shapes must match and both dims
// must be >= 11, else ShapeError. ssim(a, a) == 1.0 exactly.
double ssim(const Image& a, const Image& b);

// IOU of value > threshold binarizations; an empty union counts as 1.0.
double mask_iou(const Image& a, const Image& b, double threshold = 0.5);

}  // namespace texflow
