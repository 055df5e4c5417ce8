#pragma once

#include <cstddef>
#include <vector>

#include "texflow/geom.hpp"

namespace texflow {

// Dense H x W x C grid of float64 samples, row-major (y, x, c), origin at the
// top-left. Channel count is unconstrained here; PNG I/O accepts 1 or 3.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0);

  double& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }
  double at(int y, int x, int c) const { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }
  size_t size() const { return data.size(); }
  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

// Grid of normalized sampling coordinates, one (u, v) pair per cell, u along
// width and v along height, both nominally in [-1, 1]. Values drift outside
// that range while being optimized; that is allowed, the sampler clamps.
struct FlowField {
  int height = 0;
  int width = 0;
  std::vector<Vec2> coords;

  FlowField() = default;
  FlowField(int h, int w, Vec2 fill = {0.0, 0.0});

  Vec2& at(int y, int x) { return coords[static_cast<size_t>(y) * width + x]; }
  Vec2 at(int y, int x) const { return coords[static_cast<size_t>(y) * width + x]; }
  size_t size() const { return coords.size(); }
};

// Per-pixel positive multiplier aligned with a source image (one value per
// pixel, shared across channels).
struct VarianceMap {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  VarianceMap() = default;
  VarianceMap(int h, int w, double fill = 1.0);

  double& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
  double at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }
  size_t size() const { return data.size(); }
};

// Throws NumericError if any entry is non-finite.
void require_finite(const Image& img, const char* what);
void require_finite(const FlowField& flow, const char* what);

// Flow whose cells sample their own normalized centers: cell (ty, tx) of an
// h x w flow maps to (-1 + 2(tx+.5)/w, -1 + 2(ty+.5)/h).
FlowField identity_flow(int height, int width);

}  // namespace texflow
