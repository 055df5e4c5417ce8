#pragma once

#include <array>
#include <vector>

#include "texflow/geom.hpp"
#include "texflow/rng.hpp"

namespace texflow {

// Weak-perspective camera: p = scale * (R(q) v).xy + translation, with the
// rotated z kept for depth ordering. q is stored unnormalized and normalized
// at use, so plain gradient steps on all four components stay valid.
struct Camera {
  double scale = 1.0;
  Vec2 translation{};
  std::array<double, 4> quat{1.0, 0.0, 0.0, 0.0};  // (w, x, y, z)
};

struct Projected {
  Vec2 xy;
  double depth;  // rotated z; larger = nearer to the viewer
};

Projected project(const Camera& cam, Vec3 v);
std::vector<Projected> project_all(const Camera& cam, const std::vector<Vec3>& vs);

struct CameraGrad {
  double d_scale = 0.0;
  Vec2 d_translation{};
  std::array<double, 4> d_quat{0.0, 0.0, 0.0, 0.0};
};

// Accumulates gradients of L given dL/d(xy) for one vertex. Either output
// may be null. The quaternion gradient includes the normalization Jacobian
// (I - qq^T)/|q|, i.e. it is taken w.r.t. the raw stored components.
void project_backward(const Camera& cam, Vec3 v, Vec2 up_xy, CameraGrad* d_cam,
                      Vec3* d_vertex);

// Camera at a uniformly random azimuth in [0, 2pi), elevation fixed at 0
// (rotation about +y), centered, with the given scale.
Camera random_camera(Rng& rng, double scale);

}  // namespace texflow
