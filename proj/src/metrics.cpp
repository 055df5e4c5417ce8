#include "texflow/metrics.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

#include "texflow/error.hpp"

namespace texflow {

FeatureStats feature_stats(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw DegenerateInputError("feature_stats: no feature vectors");
  const size_t d = rows[0].size();
  if (d == 0) throw ShapeError("feature_stats: zero-length features");
  for (const auto& r : rows)
    if (r.size() != d) throw ShapeError("feature_stats: inconsistent feature lengths");

  FeatureStats out;
  out.mean.assign(d, 0.0);
  out.cov.assign(d * d, 0.0);
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  for (const auto& r : rows)
    for (size_t i = 0; i < d; ++i) out.mean[i] += r[i];
  for (size_t i = 0; i < d; ++i) out.mean[i] *= inv_n;
  for (const auto& r : rows)
    for (size_t i = 0; i < d; ++i) {
      const double ci = r[i] - out.mean[i];
      for (size_t j = 0; j < d; ++j) out.cov[i * d + j] += ci * (r[j] - out.mean[j]);
    }
  for (double& c : out.cov) c *= inv_n;
  return out;
}

namespace {

constexpr double kJitter = 1e-10;
constexpr double kAsymmetryTol = 1e-6;
constexpr double kNegativeResultTol = -1e-8;

Eigen::MatrixXd to_matrix(const FeatureStats& s, const char* which) {
  const int d = s.dim();
  if (s.cov.size() != static_cast<size_t>(d) * d)
    throw ShapeError("frechet_distance: covariance is not dim x dim");
  Eigen::MatrixXd m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = s.cov[static_cast<size_t>(i) * d + j];
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > kAsymmetryTol)
    throw NumericError(std::string("frechet_distance: ") + which +
                       " covariance asymmetry " + std::to_string(asym));
  m.diagonal().array() += kJitter;
  return m;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success)
    throw NumericError("frechet_distance: eigendecomposition failed");
  Eigen::VectorXd lam = eig.eigenvalues();
  for (int i = 0; i < lam.size(); ++i) lam(i) = std::sqrt(std::max(lam(i), 0.0));
  return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const FeatureStats& a, const FeatureStats& b) {
  if (a.dim() != b.dim())
    throw ShapeError("frechet_distance: dims differ (" + std::to_string(a.dim()) +
                     " vs " + std::to_string(b.dim()) + ")");
  const Eigen::MatrixXd sa = to_matrix(a, "first");
  const Eigen::MatrixXd sb = to_matrix(b, "second");

  double mean_term = 0.0;
  for (int i = 0; i < a.dim(); ++i) {
    const double diff = a.mean[i] - b.mean[i];
    mean_term += diff * diff;
  }

  const Eigen::MatrixXd root_a = psd_sqrt(sa);
  Eigen::MatrixXd inner = root_a * sb * root_a;
  inner = 0.5 * (inner + inner.transpose().eval());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(inner);
  if (eig.info() != Eigen::Success)
    throw NumericError("frechet_distance: eigendecomposition failed");
  double trace_sqrt = 0.0;
  for (int i = 0; i < eig.eigenvalues().size(); ++i)
    trace_sqrt += std::sqrt(std::max(eig.eigenvalues()(i), 0.0));

  const double result = mean_term + sa.trace() + sb.trace() - 2.0 * trace_sqrt;
  if (result < kNegativeResultTol)
    throw NumericError("frechet_distance: result " + std::to_string(result) +
                       " is negative beyond tolerance");
  return std::max(result, 0.0);
}

std::vector<double> patch_stats_extractor(const Image& img, int grid) {
  if (grid < 1) throw ConfigError("patch_stats_extractor: grid must be >= 1");
  if (img.height < grid || img.width < grid)
    throw ShapeError("patch_stats_extractor: image " + std::to_string(img.height) +
                     "x" + std::to_string(img.width) + " smaller than grid " +
                     std::to_string(grid));
  const int cells = grid * grid;
  std::vector<double> features(2 * static_cast<size_t>(cells) * img.channels, 0.0);
  for (int gy = 0; gy < grid; ++gy) {
    const int y0 = gy * img.height / grid;
    const int y1 = (gy + 1) * img.height / grid;
    for (int gx = 0; gx < grid; ++gx) {
      const int x0 = gx * img.width / grid;
      const int x1 = (gx + 1) * img.width / grid;
      const int cell = gy * grid + gx;
      const double inv_count = 1.0 / (static_cast<double>(y1 - y0) * (x1 - x0));
      for (int c = 0; c < img.channels; ++c) {
        double sum = 0.0, sum_sq = 0.0;
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) {
            const double v = img.at(y, x, c);
            sum += v;
            sum_sq += v * v;
          }
        const double mean = sum * inv_count;
        const double var = std::max(sum_sq * inv_count - mean * mean, 0.0);
        features[static_cast<size_t>(cell) * img.channels + c] = mean;
        features[static_cast<size_t>(cells) * img.channels +
                 static_cast<size_t>(cell) * img.channels + c] = std::sqrt(var);
      }
    }
  }
  return features;
}

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

std::vector<double> luma_plane(const Image& img) {
  std::vector<double> out(static_cast<size_t>(img.height) * img.width);
  if (img.channels == 1) {
    out = img.data;
  } else if (img.channels == 3) {
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        out[static_cast<size_t>(y) * img.width + x] = 0.299 * img.at(y, x, 0) +
                                                      0.587 * img.at(y, x, 1) +
                                                      0.114 * img.at(y, x, 2);
  } else {
    throw ShapeError("ssim: images must have 1 or 3 channels");
  }
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ShapeError("ssim: shape mismatch");
  if (a.height < kSsimWindow || a.width < kSsimWindow)
    throw ShapeError("ssim: images must be at least 11x11");
  const std::vector<double> pa = luma_plane(a);
  const std::vector<double> pb = luma_plane(b);

  double window[kSsimWindow][kSsimWindow];
  double wsum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i)
    for (int j = 0; j < kSsimWindow; ++j) {
      const double dy = i - (kSsimWindow - 1) / 2.0;
      const double dx = j - (kSsimWindow - 1) / 2.0;
      window[i][j] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSsimSigma * kSsimSigma));
      wsum += window[i][j];
    }
  for (int i = 0; i < kSsimWindow; ++i)
    for (int j = 0; j < kSsimWindow; ++j) window[i][j] /= wsum;

  const int rows = a.height - kSsimWindow + 1;
  const int cols = a.width - kSsimWindow + 1;
  double total = 0.0;
  for (int y = 0; y < rows; ++y)
    for (int x = 0; x < cols; ++x) {
      double mu_a = 0.0, mu_b = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
      for (int i = 0; i < kSsimWindow; ++i)
        for (int j = 0; j < kSsimWindow; ++j) {
          const double w = window[i][j];
          const double va = pa[static_cast<size_t>(y + i) * a.width + (x + j)];
          const double vb = pb[static_cast<size_t>(y + i) * a.width + (x + j)];
          mu_a += w * va;
          mu_b += w * vb;
          aa += w * va * va;
          bb += w * vb * vb;
          ab += w * va * vb;
        }
      const double var_a = aa - mu_a * mu_a;
      const double var_b = bb - mu_b * mu_b;
      const double cov = ab - mu_a * mu_b;
      const double num = (2.0 * mu_a * mu_b + kSsimC1) * (2.0 * cov + kSsimC2);
      const double den =
          (mu_a * mu_a + mu_b * mu_b + kSsimC1) * (var_a + var_b + kSsimC2);
      total += num / den;
    }
  return total / (static_cast<double>(rows) * cols);
}

double mask_iou(const Image& a, const Image& b, double threshold) {
  if (!a.same_shape(b)) throw ShapeError("mask_iou: shape mismatch");
  int64_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const bool pa = a.data[i] > threshold;
    const bool pb = b.data[i] > threshold;
    inter += (pa && pb) ? 1 : 0;
    uni += (pa || pb) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace texflow
