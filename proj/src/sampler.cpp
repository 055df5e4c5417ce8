#include "texflow/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "texflow/error.hpp"
#include "texflow/kernels.hpp"

namespace texflow {

namespace {

void check_var(const Image& src, const VarianceMap& var) {
  if (var.height != src.height || var.width != src.width)
    throw ShapeError("variance map " + std::to_string(var.height) + "x" +
                     std::to_string(var.width) + " does not cover source " +
                     std::to_string(src.height) + "x" + std::to_string(src.width));
  for (double v : var.data)
    if (!(v > 0.0) || !std::isfinite(v))
      throw NumericError("variance map must be positive and finite");
}

// U'(y,x,c) = U(y,x,c) * var(y,x)
Image modulate(const Image& src, const VarianceMap& var) {
  Image out(src.height, src.width, src.channels);
  if (src.channels == 1) {
    kernels::active().mul(src.data.data(), var.data.data(), out.data.data(),
                          src.data.size());
  } else {
    for (int y = 0; y < src.height; ++y)
      for (int x = 0; x < src.width; ++x) {
        const double v = var.at(y, x);
        for (int c = 0; c < src.channels; ++c) out.at(y, x, c) = src.at(y, x, c) * v;
      }
  }
  return out;
}

std::vector<double> flow_to_pixels(const FlowField& flow, int src_h, int src_w) {
  std::vector<double> xy(flow.size() * 2);
  for (size_t i = 0; i < flow.size(); ++i) {
    xy[2 * i + 0] = denormalize(flow.coords[i].x, src_w);
    xy[2 * i + 1] = denormalize(flow.coords[i].y, src_h);
  }
  return xy;
}

}  // namespace

SampleCell locate_cell(double xr, double yr, int h, int w) {
  SampleCell s;
  s.clamped_x = xr < 0.0 || xr > static_cast<double>(w - 1);
  s.clamped_y = yr < 0.0 || yr > static_cast<double>(h - 1);
  const double x = std::min(std::max(xr, 0.0), static_cast<double>(w - 1));
  const double y = std::min(std::max(yr, 0.0), static_cast<double>(h - 1));
  const double x0f = std::floor(x);
  const double y0f = std::floor(y);
  s.fx = x - x0f;
  s.fy = y - y0f;
  s.x0 = static_cast<int>(x0f);
  s.y0 = static_cast<int>(y0f);
  s.x1 = std::min(s.x0 + 1, w - 1);
  s.y1 = std::min(s.y0 + 1, h - 1);
  return s;
}

namespace {

// Shared scatter/coordinate-gradient core over a coordinate list.
// grad_img: image the coordinate derivative is taken on (mode-dependent).
// scatter_scale: nullptr for unit image-gradient weights, else per-pixel
// multiplier (the variance map in replace mode).
void backward_points(const Image& src, const Image& grad_img,
                     const VarianceMap* scatter_scale, std::span<const double> xy,
                     std::span<const double> upstream, Vec2* d_coords, Image* d_image) {
  const int h = src.height, w = src.width, c = src.channels;
  const size_t n = xy.size() / 2;
  for (size_t i = 0; i < n; ++i) {
    const SampleCell s = locate_cell(xy[2 * i + 0], xy[2 * i + 1], h, w);
    const double l00 = (1.0 - s.fx) * (1.0 - s.fy);
    const double l01 = s.fx * (1.0 - s.fy);
    const double l10 = (1.0 - s.fx) * s.fy;
    const double l11 = s.fx * s.fy;
    double gx = 0.0, gy = 0.0;
    for (int ch = 0; ch < c; ++ch) {
      const double up = upstream[i * c + ch];
      if (d_coords) {
        const double g00 = grad_img.at(s.y0, s.x0, ch);
        const double g01 = grad_img.at(s.y0, s.x1, ch);
        const double g10 = grad_img.at(s.y1, s.x0, ch);
        const double g11 = grad_img.at(s.y1, s.x1, ch);
        gx += up * ((1.0 - s.fy) * (g01 - g00) + s.fy * (g11 - g10));
        gy += up * ((1.0 - s.fx) * (g10 - g00) + s.fx * (g11 - g01));
      }
      if (d_image) {
        const double s00 = scatter_scale ? scatter_scale->at(s.y0, s.x0) : 1.0;
        const double s01 = scatter_scale ? scatter_scale->at(s.y0, s.x1) : 1.0;
        const double s10 = scatter_scale ? scatter_scale->at(s.y1, s.x0) : 1.0;
        const double s11 = scatter_scale ? scatter_scale->at(s.y1, s.x1) : 1.0;
        d_image->at(s.y0, s.x0, ch) += up * l00 * s00;
        d_image->at(s.y0, s.x1, ch) += up * l01 * s01;
        d_image->at(s.y1, s.x0, ch) += up * l10 * s10;
        d_image->at(s.y1, s.x1, ch) += up * l11 * s11;
      }
    }
    if (d_coords) {
      // A clamped coordinate pins the sample to the border: the forward is
      // locally constant along that axis, so its gradient is exactly zero.
      d_coords[i].x = s.clamped_x ? 0.0 : gx;
      d_coords[i].y = s.clamped_y ? 0.0 : gy;
    }
  }
}

void check_upstream(const Image& src, const FlowField& flow, const Image& upstream) {
  if (upstream.height != flow.height || upstream.width != flow.width ||
      upstream.channels != src.channels)
    throw ShapeError("upstream must be flow-shaped with source channels");
}

}  // namespace

double denormalize(double u, int extent) {
  return 0.5 * (u + 1.0) * static_cast<double>(extent - 1);
}

Image grid_sample(const Image& src, const FlowField& flow) {
  require_finite(flow, "grid_sample flow");
  Image out(flow.height, flow.width, src.channels);
  const std::vector<double> xy = flow_to_pixels(flow, src.height, src.width);
  kernels::active().gather_bilinear(src.data.data(), src.height, src.width,
                                    src.channels, xy.data(),
                                    static_cast<int>(flow.size()), out.data.data());
  return out;
}

Image grid_sample(const Image& src, const FlowField& flow, const VarianceMap& var,
                  SampleMode mode) {
  if (mode == SampleMode::kBaseline || mode == SampleMode::kGradientOnly)
    return grid_sample(src, flow);
  check_var(src, var);
  const Image modulated = modulate(src, var);
  return grid_sample(modulated, flow);
}

SampleGrad grid_sample_backward(const Image& src, const FlowField& flow,
                                const Image& upstream) {
  check_upstream(src, flow, upstream);
  require_finite(flow, "grid_sample_backward flow");
  SampleGrad grad;
  grad.d_coords_px.resize(flow.size());
  grad.d_image = Image(src.height, src.width, src.channels, 0.0);
  const std::vector<double> xy = flow_to_pixels(flow, src.height, src.width);
  backward_points(src, src, nullptr, xy, upstream.data, grad.d_coords_px.data(),
                  &grad.d_image);
  return grad;
}

SampleGrad grid_sample_backward(const Image& src, const FlowField& flow,
                                const Image& upstream, const VarianceMap& var,
                                SampleMode mode) {
  if (mode == SampleMode::kBaseline) return grid_sample_backward(src, flow, upstream);
  check_upstream(src, flow, upstream);
  require_finite(flow, "grid_sample_backward flow");
  check_var(src, var);
  const Image modulated = modulate(src, var);
  SampleGrad grad;
  grad.d_coords_px.resize(flow.size());
  grad.d_image = Image(src.height, src.width, src.channels, 0.0);
  const std::vector<double> xy = flow_to_pixels(flow, src.height, src.width);
  // Coordinate gradients always follow the modulated image here. The image
  // gradient depends on what the forward actually did with var: kReplace
  // sampled U*var, so dL/dU picks up var; kGradientOnly sampled plain U.
  const VarianceMap* scatter_scale = (mode == SampleMode::kReplace) ? &var : nullptr;
  backward_points(src, modulated, scatter_scale, xy, upstream.data,
                  grad.d_coords_px.data(), &grad.d_image);
  return grad;
}

Vec2 normalized_coord_grad(Vec2 d_px, int src_height, int src_width) {
  return {d_px.x * 0.5 * static_cast<double>(src_width - 1),
          d_px.y * 0.5 * static_cast<double>(src_height - 1)};
}

std::vector<double> coord_grad_norm_map(const Image& src, const FlowField& flow,
                                        const VarianceMap* var, SampleMode mode) {
  const Image ones(flow.height, flow.width, src.channels, 1.0);
  const SampleGrad grad = (mode == SampleMode::kBaseline || var == nullptr)
                              ? grid_sample_backward(src, flow, ones)
                              : grid_sample_backward(src, flow, ones, *var, mode);
  std::vector<double> norms(flow.size());
  for (size_t i = 0; i < flow.size(); ++i) norms[i] = norm(grad.d_coords_px[i]);
  return norms;
}

void sample_points(const Image& src, std::span<const double> xy,
                   std::span<double> out) {
  const size_t n = xy.size() / 2;
  if (xy.size() % 2 != 0 || out.size() != n * src.channels)
    throw ShapeError("sample_points: xy needs 2n entries and out n*channels");
  kernels::active().gather_bilinear(src.data.data(), src.height, src.width,
                                    src.channels, xy.data(), static_cast<int>(n),
                                    out.data());
}

void sample_points_backward(const Image& src, std::span<const double> xy,
                            std::span<const double> upstream, double* d_xy,
                            Image* d_image) {
  const size_t n = xy.size() / 2;
  if (xy.size() % 2 != 0 || upstream.size() != n * src.channels)
    throw ShapeError("sample_points_backward: shape mismatch");
  if (d_image && !d_image->same_shape(src))
    throw ShapeError("sample_points_backward: d_image must be source-shaped");
  std::vector<Vec2> tmp;
  Vec2* coords = nullptr;
  if (d_xy) {
    tmp.resize(n);
    coords = tmp.data();
  }
  backward_points(src, src, nullptr, xy, upstream, coords, d_image);
  if (d_xy)
    for (size_t i = 0; i < n; ++i) {
      d_xy[2 * i + 0] = tmp[i].x;
      d_xy[2 * i + 1] = tmp[i].y;
    }
}

}  // namespace texflow
