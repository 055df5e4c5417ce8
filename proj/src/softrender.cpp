#include "texflow/softrender.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "texflow/error.hpp"
#include "texflow/optim.hpp"

namespace texflow {

namespace {

// Beyond this, logistic(-d^2/sigma) is below one ulp of 1.0's complement and
// (1 - D) rounds to exactly 1.0, so the face cannot influence the pixel.
constexpr double kCoverageCutoff = 38.0;

struct Tri2 {
  Vec2 a, b, c;
  double depth;  // mean rotated z of the face
  int face;
};

struct PixelRange {
  int i0, i1, j0, j1;  // half-open rows/cols; empty when i0 >= i1
};

void check_raster(int height, int width, double sigma) {
  if (height < 1 || width < 1) throw ShapeError("raster dims must be positive");
  if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
}

std::vector<Tri2> project_faces(const Mesh& mesh, const Camera& cam) {
  if (mesh.faces.empty()) throw DegenerateInputError("render: mesh has no faces");
  const std::vector<Projected> proj = project_all(cam, mesh.vertices);
  std::vector<Tri2> tris(mesh.faces.size());
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& face = mesh.faces[f];
    tris[f] = {proj[face[0]].xy, proj[face[1]].xy, proj[face[2]].xy,
               (proj[face[0]].depth + proj[face[1]].depth + proj[face[2]].depth) / 3.0,
               static_cast<int>(f)};
  }
  return tris;
}

// Pixels whose centers lie within `margin` of the triangle's bbox.
PixelRange clip_range(const Tri2& t, int height, int width, double margin) {
  const double xmin = std::min({t.a.x, t.b.x, t.c.x}) - margin;
  const double xmax = std::max({t.a.x, t.b.x, t.c.x}) + margin;
  const double ymin = std::min({t.a.y, t.b.y, t.c.y}) - margin;
  const double ymax = std::max({t.a.y, t.b.y, t.c.y}) + margin;
  // center_x(j) = -1 + 2(j+.5)/w  =>  j = (x + 1) w / 2 - 0.5
  PixelRange r;
  r.j0 = std::max(0, static_cast<int>(std::ceil((xmin + 1.0) * width / 2.0 - 0.5)));
  r.j1 = std::min(width, static_cast<int>(std::floor((xmax + 1.0) * width / 2.0 - 0.5)) + 1);
  r.i0 = std::max(0, static_cast<int>(std::ceil((ymin + 1.0) * height / 2.0 - 0.5)));
  r.i1 = std::min(height, static_cast<int>(std::floor((ymax + 1.0) * height / 2.0 - 0.5)) + 1);
  if (r.j0 >= r.j1 || r.i0 >= r.i1) r.i0 = r.i1 = r.j0 = r.j1 = 0;
  return r;
}

struct EdgeHit {
  double d2;      // squared distance to the closest boundary point
  int edge;       // 0: (a,b), 1: (b,c), 2: (c,a)
  double t;       // clamped projection parameter along that edge
  Vec2 diff;      // p - closest point
};

EdgeHit closest_edge(const Tri2& tri, Vec2 p) {
  const Vec2 v[3] = {tri.a, tri.b, tri.c};
  EdgeHit best{0.0, -1, 0.0, {}};
  for (int e = 0; e < 3; ++e) {
    const Vec2 s = v[e];
    const Vec2 d = v[(e + 1) % 3] - s;
    const double len2 = norm2(d);
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp(dot(p - s, d) / len2, 0.0, 1.0);
    const Vec2 diff = p - (s + t * d);
    const double d2 = norm2(diff);
    if (best.edge < 0 || d2 < best.d2) best = {d2, e, t, diff};
  }
  return best;
}

bool inside(const Tri2& tri, Vec2 p) {
  const double area = cross(tri.b - tri.a, tri.c - tri.a);
  if (area == 0.0) return false;
  const double s0 = cross(tri.b - tri.a, p - tri.a);
  const double s1 = cross(tri.c - tri.b, p - tri.b);
  const double s2 = cross(tri.a - tri.c, p - tri.c);
  if (area > 0.0) return s0 >= 0.0 && s1 >= 0.0 && s2 >= 0.0;
  return s0 <= 0.0 && s1 <= 0.0 && s2 <= 0.0;
}

double coverage(const Tri2& tri, Vec2 p, double sigma, EdgeHit* hit_out,
                bool* inside_out) {
  const EdgeHit hit = closest_edge(tri, p);
  const bool in = inside(tri, p);
  if (hit_out) *hit_out = hit;
  if (inside_out) *inside_out = in;
  return logistic((in ? hit.d2 : -hit.d2) / sigma);
}

// Faces sorted front to back: larger mean depth first, ties toward the lower
// face index (stable sort keeps the original ascending order).
void sort_front_to_back(std::vector<Tri2>& tris) {
  std::stable_sort(tris.begin(), tris.end(),
                   [](const Tri2& x, const Tri2& y) { return x.depth > y.depth; });
}

struct Bary {
  double l0, l1, l2;
};

bool barycentric(const Tri2& t, Vec2 p, Bary* out) {
  const double denom = cross(t.b - t.a, t.c - t.a);
  if (denom == 0.0) return false;
  const double l0 = cross(t.b - p, t.c - p) / denom;
  const double l1 = cross(t.c - p, t.a - p) / denom;
  const double l2 = cross(t.a - p, t.b - p) / denom;
  if (l0 < 0.0 || l1 < 0.0 || l2 < 0.0) return false;
  *out = {l0, l1, l2};
  return true;
}

}  // namespace

Vec2 raster_center(int i, int j, int height, int width) {
  return {-1.0 + 2.0 * (j + 0.5) / width, -1.0 + 2.0 * (i + 0.5) / height};
}

Image soft_silhouette(const Mesh& mesh, const Camera& cam, int height, int width,
                      double sigma) {
  check_raster(height, width, sigma);
  const std::vector<Tri2> tris = project_faces(mesh, cam);
  const double margin = std::sqrt(kCoverageCutoff * sigma);

  // survival[p] = prod_f (1 - D_f(p)); faces outside the margin contribute a
  // factor that rounds to exactly 1.0 and are skipped.
  Image survival(height, width, 1, 1.0);
  for (const Tri2& t : tris) {
    const PixelRange r = clip_range(t, height, width, margin);
    for (int i = r.i0; i < r.i1; ++i)
      for (int j = r.j0; j < r.j1; ++j) {
        const double d = coverage(t, raster_center(i, j, height, width), sigma,
                                  nullptr, nullptr);
        survival.at(i, j, 0) *= 1.0 - d;
      }
  }
  Image sil(height, width, 1);
  for (size_t k = 0; k < sil.data.size(); ++k) sil.data[k] = 1.0 - survival.data[k];
  return sil;
}

std::vector<Vec3> soft_silhouette_backward(const Mesh& mesh, const Camera& cam,
                                           int height, int width, double sigma,
                                           const Image& upstream) {
  check_raster(height, width, sigma);
  if (upstream.height != height || upstream.width != width || upstream.channels != 1)
    throw ShapeError("soft_silhouette_backward: upstream must be height x width x 1");
  const std::vector<Tri2> tris = project_faces(mesh, cam);
  const double margin = std::sqrt(kCoverageCutoff * sigma);

  // Pass 1: per pixel, product of the nonzero survival factors plus a count
  // of exactly-zero ones. d(silhouette)/dD_f needs the product of all other
  // factors, which this representation yields without re-multiplying F times.
  Image prod_nz(height, width, 1, 1.0);
  std::vector<int> zeros(static_cast<size_t>(height) * width, 0);
  for (const Tri2& t : tris) {
    const PixelRange r = clip_range(t, height, width, margin);
    for (int i = r.i0; i < r.i1; ++i)
      for (int j = r.j0; j < r.j1; ++j) {
        const double d = coverage(t, raster_center(i, j, height, width), sigma,
                                  nullptr, nullptr);
        const double factor = 1.0 - d;
        if (factor == 0.0)
          zeros[static_cast<size_t>(i) * width + j] += 1;
        else
          prod_nz.at(i, j, 0) *= factor;
      }
  }

  // Pass 2: same traversal; chain upstream -> D -> signed d^2 -> projected
  // vertices. Face loop order is fixed, so accumulation is reproducible.
  std::vector<Vec2> d_p2d(mesh.vertices.size(), Vec2{});
  for (const Tri2& t : tris) {
    const PixelRange r = clip_range(t, height, width, margin);
    const auto& face = mesh.faces[t.face];
    for (int i = r.i0; i < r.i1; ++i)
      for (int j = r.j0; j < r.j1; ++j) {
        const double up = upstream.at(i, j, 0);
        if (up == 0.0) continue;
        EdgeHit hit;
        bool in = false;
        const Vec2 p = raster_center(i, j, height, width);
        const double d = coverage(t, p, sigma, &hit, &in);
        const double factor = 1.0 - d;
        const int nz = zeros[static_cast<size_t>(i) * width + j];
        double dsil_dd;  // d(1 - prod)/dD_f = prod of the other factors
        if (nz == 0)
          dsil_dd = prod_nz.at(i, j, 0) / factor;
        else if (nz == 1 && factor == 0.0)
          dsil_dd = prod_nz.at(i, j, 0);
        else
          continue;  // another zero factor freezes this pixel w.r.t. face f
        // dD/d(d^2) = sign * D (1 - D) / sigma; dies off where D saturates.
        const double dd2 = up * dsil_dd * d * factor * (in ? 1.0 : -1.0) / sigma;
        if (dd2 == 0.0) continue;
        // Envelope: differentiate the squared distance of the active edge
        // holding its clamped parameter fixed.
        const int e0 = hit.edge;
        const int e1 = (hit.edge + 1) % 3;
        const Vec2 d_start = (-2.0 * (1.0 - hit.t) * dd2) * hit.diff;
        const Vec2 d_end = (-2.0 * hit.t * dd2) * hit.diff;
        const int verts[3] = {face[0], face[1], face[2]};
        d_p2d[verts[e0]] = d_p2d[verts[e0]] + d_start;
        d_p2d[verts[e1]] = d_p2d[verts[e1]] + d_end;
      }
  }

  std::vector<Vec3> d_vertices(mesh.vertices.size(), Vec3{});
  for (size_t v = 0; v < mesh.vertices.size(); ++v)
    if (d_p2d[v].x != 0.0 || d_p2d[v].y != 0.0)
      project_backward(cam, mesh.vertices[v], d_p2d[v], nullptr, &d_vertices[v]);
  return d_vertices;
}

RasterWeights raster_weights(const Mesh& mesh, const Camera& cam, int height,
                             int width, double sigma) {
  check_raster(height, width, sigma);
  std::vector<Tri2> tris = project_faces(mesh, cam);
  sort_front_to_back(tris);
  const double margin = std::sqrt(kCoverageCutoff * sigma);

  RasterWeights out;
  out.n_faces = static_cast<int>(tris.size());
  out.height = height;
  out.width = width;
  out.w.assign(static_cast<size_t>(tris.size()) * height * width, 0.0);

  // Front-to-back prefix product of survival factors per pixel.
  Image prefix(height, width, 1, 1.0);
  for (const Tri2& t : tris) {
    const PixelRange r = clip_range(t, height, width, margin);
    double* wf = out.w.data() + static_cast<size_t>(t.face) * height * width;
    for (int i = r.i0; i < r.i1; ++i)
      for (int j = r.j0; j < r.j1; ++j) {
        const double d = coverage(t, raster_center(i, j, height, width), sigma,
                                  nullptr, nullptr);
        wf[static_cast<size_t>(i) * width + j] = d * prefix.at(i, j, 0);
        prefix.at(i, j, 0) *= 1.0 - d;
      }
  }
  return out;
}

Image render_texture(const Mesh& mesh, const Camera& cam,
                     std::span<const double> vertex_colors, int height, int width,
                     int channels) {
  if (channels < 1) throw ShapeError("render_texture: channels must be positive");
  if (vertex_colors.size() != mesh.vertices.size() * channels)
    throw ShapeError("render_texture: need vertices*channels colors, got " +
                     std::to_string(vertex_colors.size()));
  check_raster(height, width, 1.0);
  std::vector<Tri2> tris = project_faces(mesh, cam);
  sort_front_to_back(tris);

  Image out(height, width, channels, 0.0);
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < width; ++j) {
      const Vec2 p = raster_center(i, j, height, width);
      for (const Tri2& t : tris) {
        Bary bc;
        if (!barycentric(t, p, &bc)) continue;
        const auto& face = mesh.faces[t.face];
        for (int ch = 0; ch < channels; ++ch)
          out.at(i, j, ch) = bc.l0 * vertex_colors[face[0] * channels + ch] +
                             bc.l1 * vertex_colors[face[1] * channels + ch] +
                             bc.l2 * vertex_colors[face[2] * channels + ch];
        break;  // nearest covering face wins
      }
    }
  return out;
}

std::vector<double> render_texture_backward(const Mesh& mesh, const Camera& cam,
                                            int height, int width, int channels,
                                            const Image& upstream) {
  if (upstream.height != height || upstream.width != width ||
      upstream.channels != channels)
    throw ShapeError("render_texture_backward: upstream shape mismatch");
  check_raster(height, width, 1.0);
  std::vector<Tri2> tris = project_faces(mesh, cam);
  sort_front_to_back(tris);

  std::vector<double> d_colors(mesh.vertices.size() * channels, 0.0);
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < width; ++j) {
      const Vec2 p = raster_center(i, j, height, width);
      for (const Tri2& t : tris) {
        Bary bc;
        if (!barycentric(t, p, &bc)) continue;
        const auto& face = mesh.faces[t.face];
        for (int ch = 0; ch < channels; ++ch) {
          const double up = upstream.at(i, j, ch);
          d_colors[face[0] * channels + ch] += bc.l0 * up;
          d_colors[face[1] * channels + ch] += bc.l1 * up;
          d_colors[face[2] * channels + ch] += bc.l2 * up;
        }
        break;
      }
    }
  return d_colors;
}

}  // namespace texflow
