#pragma once

#include <span>
#include <vector>

#include "texflow/camera.hpp"
#include "texflow/grid.hpp"
#include "texflow/mesh.hpp"

namespace texflow {

// The raster covers [-1, 1]^2; pixel (i, j) of an h x w grid has center
// (-1 + 2(j+.5)/w, -1 + 2(i+.5)/h). Rows map linearly onto [-1, 1] in y, so
// row 0 holds the smallest y. Callers that want a conventional "y up" image
// can flip rows on output; none of the losses depend on it.
Vec2 raster_center(int i, int j, int height, int width);

// Per-face soft coverage D = logistic(sign * d^2 / sigma), where d is the
// Euclidean distance from the pixel center to the projected triangle's
// boundary and sign is +1 inside / -1 outside. A degenerate (zero-area)
// projection counts as all-outside and still contributes through its edges.
// The silhouette composes faces independently: S = 1 - prod_f (1 - D_f).
Image soft_silhouette(const Mesh& mesh, const Camera& cam, int height, int width,
                      double sigma);

// Gradient of L = sum(upstream (.) soft_silhouette(...)) w.r.t. the 3D
// vertices, chained through the projection. upstream is height x width x 1.
std::vector<Vec3> soft_silhouette_backward(const Mesh& mesh, const Camera& cam,
                                           int height, int width, double sigma,
                                           const Image& upstream);

// Per-face soft coverage attenuated by everything in front:
// w_f(p) = D_f(p) * prod_{g before f} (1 - D_g(p)), with "before" meaning
// nearer by mean rotated depth, ties resolved toward the lower face index.
// The nearest face keeps its raw coverage. Forward-only.
struct RasterWeights {
  int n_faces = 0;
  int height = 0;
  int width = 0;
  std::vector<double> w;  // face-major: w[(f * height + i) * width + j]

  double at(int f, int i, int j) const {
    return w[(static_cast<size_t>(f) * height + i) * width + j];
  }
};

RasterWeights raster_weights(const Mesh& mesh, const Camera& cam, int height,
                             int width, double sigma);

// Hard-visibility textured render: each pixel takes the nearest covering
// face (painter's order on mean depth, ties toward the lower index) and
// interpolates its vertex colors barycentrically. Pixels covered by nothing
// stay 0. vertex_colors holds N * channels values.
Image render_texture(const Mesh& mesh, const Camera& cam,
                     std::span<const double> vertex_colors, int height, int width,
                     int channels);

// Gradient of L = sum(upstream (.) render_texture(...)) w.r.t. vertex_colors.
// The render is linear in the colors, so this is exact.
std::vector<double> render_texture_backward(const Mesh& mesh, const Camera& cam,
                                            int height, int width, int channels,
                                            const Image& upstream);

}  // namespace texflow
