#include "texflow/camera.hpp"

#include <cmath>
#include <numbers>

#include "texflow/error.hpp"

namespace texflow {

namespace {

struct Mat3 {
  double m[3][3];
  Vec3 apply(Vec3 v) const {
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
  }
  Vec3 apply_transposed(Vec3 v) const {
    return {m[0][0] * v.x + m[1][0] * v.y + m[2][0] * v.z,
            m[0][1] * v.x + m[1][1] * v.y + m[2][1] * v.z,
            m[0][2] * v.x + m[1][2] * v.y + m[2][2] * v.z};
  }
};

Mat3 rotation(double w, double x, double y, double z) {
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
           {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
           {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
}

std::array<double, 4> normalized_quat(const Camera& cam, double* len_out) {
  const auto& q = cam.quat;
  const double len = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  if (len < 1e-12) throw NumericError("camera quaternion has zero length");
  if (len_out) *len_out = len;
  return {q[0] / len, q[1] / len, q[2] / len, q[3] / len};
}

}  // namespace

Projected project(const Camera& cam, Vec3 v) {
  const auto q = normalized_quat(cam, nullptr);
  const Vec3 r = rotation(q[0], q[1], q[2], q[3]).apply(v);
  return {{cam.scale * r.x + cam.translation.x, cam.scale * r.y + cam.translation.y},
          r.z};
}

std::vector<Projected> project_all(const Camera& cam, const std::vector<Vec3>& vs) {
  std::vector<Projected> out;
  out.reserve(vs.size());
  const auto q = normalized_quat(cam, nullptr);
  const Mat3 R = rotation(q[0], q[1], q[2], q[3]);
  for (const Vec3& v : vs) {
    const Vec3 r = R.apply(v);
    out.push_back({{cam.scale * r.x + cam.translation.x,
                    cam.scale * r.y + cam.translation.y},
                   r.z});
  }
  return out;
}

void project_backward(const Camera& cam, Vec3 v, Vec2 up_xy, CameraGrad* d_cam,
                      Vec3* d_vertex) {
  double len = 0.0;
  const auto q = normalized_quat(cam, &len);
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  const Mat3 R = rotation(w, x, y, z);
  const Vec3 r = R.apply(v);

  // dL/dr from p = scale * r.xy + t (depth carries no upstream here).
  const Vec3 d_r = {cam.scale * up_xy.x, cam.scale * up_xy.y, 0.0};
  if (d_vertex) *d_vertex += R.apply_transposed(d_r);
  if (!d_cam) return;

  d_cam->d_scale += up_xy.x * r.x + up_xy.y * r.y;
  d_cam->d_translation.x += up_xy.x;
  d_cam->d_translation.y += up_xy.y;

  // dR/d(q-hat) component matrices, each times v, dotted with dL/dr.
  const Mat3 dRw = {{{0, -2 * z, 2 * y}, {2 * z, 0, -2 * x}, {-2 * y, 2 * x, 0}}};
  const Mat3 dRx = {{{0, 2 * y, 2 * z}, {2 * y, -4 * x, -2 * w}, {2 * z, 2 * w, -4 * x}}};
  const Mat3 dRy = {{{-4 * y, 2 * x, 2 * w}, {2 * x, 0, 2 * z}, {-2 * w, 2 * z, -4 * y}}};
  const Mat3 dRz = {{{-4 * z, -2 * w, 2 * x}, {2 * w, -4 * z, 2 * y}, {2 * x, 2 * y, 0}}};
  const std::array<double, 4> d_qhat = {
      dot(d_r, dRw.apply(v)), dot(d_r, dRx.apply(v)), dot(d_r, dRy.apply(v)),
      dot(d_r, dRz.apply(v))};

  // Through the normalization: d_q = (d_qhat - qhat (qhat . d_qhat)) / |q|.
  const double proj = q[0] * d_qhat[0] + q[1] * d_qhat[1] + q[2] * d_qhat[2] +
                      q[3] * d_qhat[3];
  for (int k = 0; k < 4; ++k) d_cam->d_quat[k] += (d_qhat[k] - q[k] * proj) / len;
}

Camera random_camera(Rng& rng, double scale) {
  const double azimuth = rng.uniform(0.0, 2.0 * std::numbers::pi);
  Camera cam;
  cam.scale = scale;
  cam.quat = {std::cos(azimuth / 2.0), 0.0, std::sin(azimuth / 2.0), 0.0};
  return cam;
}

}  // namespace texflow
