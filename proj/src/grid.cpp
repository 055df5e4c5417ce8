#include "texflow/grid.hpp"

#include <cmath>
#include <string>

#include "texflow/error.hpp"

namespace texflow {

Image::Image(int h, int w, int c, double fill)
    : height(h), width(w), channels(c) {
  if (h < 1 || w < 1 || c < 1)
    throw ShapeError("Image dims must be positive, got " + std::to_string(h) + "x" +
                     std::to_string(w) + "x" + std::to_string(c));
  data.assign(static_cast<size_t>(h) * w * c, fill);
}

FlowField::FlowField(int h, int w, Vec2 fill) : height(h), width(w) {
  if (h < 1 || w < 1)
    throw ShapeError("FlowField dims must be positive, got " + std::to_string(h) + "x" +
                     std::to_string(w));
  coords.assign(static_cast<size_t>(h) * w, fill);
}

VarianceMap::VarianceMap(int h, int w, double fill) : height(h), width(w) {
  if (h < 1 || w < 1)
    throw ShapeError("VarianceMap dims must be positive, got " + std::to_string(h) + "x" +
                     std::to_string(w));
  data.assign(static_cast<size_t>(h) * w, fill);
}

void require_finite(const Image& img, const char* what) {
  for (double v : img.data)
    if (!std::isfinite(v)) throw NumericError(std::string(what) + ": non-finite value");
}

void require_finite(const FlowField& flow, const char* what) {
  for (const Vec2& c : flow.coords)
    if (!std::isfinite(c.x) || !std::isfinite(c.y))
      throw NumericError(std::string(what) + ": non-finite coordinate");
}

FlowField identity_flow(int height, int width) {
  FlowField flow(height, width);
  for (int ty = 0; ty < height; ++ty) {
    const double v = -1.0 + 2.0 * (ty + 0.5) / height;
    for (int tx = 0; tx < width; ++tx) {
      const double u = -1.0 + 2.0 * (tx + 0.5) / width;
      flow.at(ty, tx) = {u, v};
    }
  }
  return flow;
}

}  // namespace texflow
