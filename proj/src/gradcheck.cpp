#include "texflow/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>

#include "texflow/camera.hpp"
#include "texflow/error.hpp"
#include "texflow/experiments.hpp"
#include "texflow/losses.hpp"
#include "texflow/mesh.hpp"
#include "texflow/optim.hpp"
#include "texflow/rng.hpp"
#include "texflow/sampler.hpp"
#include "texflow/softrender.hpp"

namespace texflow {

namespace {

constexpr double kTolDefault = 1e-4;
// The silhouette's difference quotients are noisier: the active edge can
// switch between evaluations and the logistic saturates.
constexpr double kTolSilhouette = 1e-3;

Image rand_image(Rng& rng, int h, int w, int c, double lo = 0.0, double hi = 1.0) {
  Image img(h, w, c);
  for (double& v : img.data) v = rng.uniform(lo, hi);
  return img;
}

VarianceMap rand_var(Rng& rng, int h, int w) {
  VarianceMap var(h, w);
  for (double& v : var.data) v = rng.uniform(0.5, 2.0);
  return var;
}

// Normalized coordinate whose pixel position stays at least 0.05 cells away
// from every gridline, so absolutely no finite-difference step crosses a
// bilinear cell boundary.
double interior_coord(Rng& rng, int extent) {
  for (;;) {
    const double u = rng.uniform(-0.92, 0.92);
    const double px = denormalize(u, extent);
    const double frac = px - std::floor(px);
    if (frac > 0.05 && frac < 0.95) return u;
  }
}

FlowField rand_flow(Rng& rng, int fh, int fw, int src_h, int src_w) {
  FlowField f(fh, fw);
  for (Vec2& c : f.coords) c = {interior_coord(rng, src_w), interior_coord(rng, src_h)};
  return f;
}

std::vector<double> pack_flow(const FlowField& f) {
  std::vector<double> p(2 * f.size());
  for (size_t i = 0; i < f.size(); ++i) {
    p[2 * i] = f.coords[i].x;
    p[2 * i + 1] = f.coords[i].y;
  }
  return p;
}

FlowField unpack_flow(std::span<const double> p, int h, int w) {
  FlowField f(h, w);
  for (size_t i = 0; i < f.size(); ++i) f.coords[i] = {p[2 * i], p[2 * i + 1]};
  return f;
}

double dot_all(const Image& a, const Image& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) acc += a.data[i] * b.data[i];
  return acc;
}

// ---- sampler ---------------------------------------------------------------

// The mode's coordinate gradients differentiate the baseline forward in
// kBaseline and the modulated forward in kReplace and kGradientOnly; pair the
// oracle with whichever forward the gradient is defined against.
double sample_forward_for_coords(const Image& src, const FlowField& flow,
                                 const VarianceMap& var, SampleMode mode,
                                 const Image& up) {
  const SampleMode fwd =
      mode == SampleMode::kGradientOnly ? SampleMode::kReplace : mode;
  return dot_all(grid_sample(src, flow, var, fwd), up);
}

double run_sample_coords(uint64_t seed, SampleMode mode) {
  Rng rng(seed);
  const int h = 5, w = 6, c = seed % 2 ? 3 : 1;
  const Image src = rand_image(rng, h, w, c);
  const VarianceMap var = rand_var(rng, h, w);
  const FlowField flow = rand_flow(rng, 3, 4, h, w);
  const Image up = rand_image(rng, 3, 4, c, -1.0, 1.0);

  const SampleGrad g = grid_sample_backward(src, flow, up, var, mode);
  std::vector<double> analytic(2 * flow.size());
  for (size_t i = 0; i < flow.size(); ++i) {
    const Vec2 gn = normalized_coord_grad(g.d_coords_px[i], h, w);
    analytic[2 * i] = gn.x;
    analytic[2 * i + 1] = gn.y;
  }
  const std::vector<double> point = pack_flow(flow);
  return fd_check(
      [&](std::span<const double> p) {
        return sample_forward_for_coords(src, unpack_flow(p, 3, 4), var, mode, up);
      },
      point, analytic);
}

double run_sample_image(uint64_t seed, SampleMode mode) {
  Rng rng(seed);
  const int h = 5, w = 6, c = seed % 2 ? 3 : 1;
  const Image src = rand_image(rng, h, w, c);
  const VarianceMap var = rand_var(rng, h, w);
  const FlowField flow = rand_flow(rng, 3, 4, h, w);
  const Image up = rand_image(rng, 3, 4, c, -1.0, 1.0);

  // kGradientOnly leaves the forward unmodulated, so its image gradient is
  // checked against the baseline forward.
  const SampleMode fwd =
      mode == SampleMode::kGradientOnly ? SampleMode::kBaseline : mode;
  const SampleGrad g = grid_sample_backward(src, flow, up, var, mode);
  return fd_check(
      [&](std::span<const double> p) {
        Image s2 = src;
        std::copy(p.begin(), p.end(), s2.data.begin());
        return dot_all(grid_sample(s2, flow, var, fwd), up);
      },
      src.data, g.d_image.data);
}

double run_sample_points(uint64_t seed) {
  Rng rng(seed);
  const int h = 6, w = 5, c = 2;
  const Image src = rand_image(rng, h, w, c);
  const size_t n = 7;
  std::vector<double> xy(2 * n);
  for (size_t i = 0; i < n; ++i) {
    xy[2 * i] = denormalize(interior_coord(rng, w), w);
    xy[2 * i + 1] = denormalize(interior_coord(rng, h), h);
  }
  std::vector<double> up(n * c);
  for (double& v : up) v = rng.uniform(-1.0, 1.0);

  std::vector<double> analytic(2 * n);
  sample_points_backward(src, xy, up, analytic.data(), nullptr);
  return fd_check(
      [&](std::span<const double> p) {
        std::vector<double> out(n * c);
        sample_points(src, p, out);
        double acc = 0.0;
        for (size_t i = 0; i < out.size(); ++i) acc += out[i] * up[i];
        return acc;
      },
      xy, analytic);
}

double run_steer_var(uint64_t seed) {
  Rng rng(seed);
  const int h = 5, w = 6, c = 1;
  const int fh = 3, fw = 4;
  const Image src = rand_image(rng, h, w, c);
  const FlowField flow = rand_flow(rng, fh, fw, h, w);
  const Image up = rand_image(rng, fh, fw, c, -1.0, 1.0);
  const VarianceBounds bounds{0.25, 4.0};
  const double lr = 0.05;
  const size_t T = flow.size();

  FlowField pseudo = flow;
  for (Vec2& p : pseudo.coords) p = p + Vec2{rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)};

  std::vector<double> raw(static_cast<size_t>(h) * w);
  for (double& r : raw) r = rng.uniform(-1.0, 1.0);

  // J(raw) = mean over cells of || theta - lr g(var(raw)) - pseudo ||^2,
  // with g the normalized coordinate gradient of the modulated image.
  auto objective = [&](std::span<const double> rw) {
    const VarianceMap var = bound_variance_map(rw, h, w, bounds);
    const SampleGrad g = grid_sample_backward(src, flow, up, var, SampleMode::kGradientOnly);
    double acc = 0.0;
    for (size_t i = 0; i < T; ++i) {
      const Vec2 gn = normalized_coord_grad(g.d_coords_px[i], h, w);
      const double dx = flow.coords[i].x - lr * gn.x - pseudo.coords[i].x;
      const double dy = flow.coords[i].y - lr * gn.y - pseudo.coords[i].y;
      acc += dx * dx + dy * dy;
    }
    return acc / static_cast<double>(T);
  };

  const VarianceMap var = bound_variance_map(raw, h, w, bounds);
  const SampleGrad g = grid_sample_backward(src, flow, up, var, SampleMode::kGradientOnly);
  std::vector<Vec2> d_gpx(T);
  for (size_t i = 0; i < T; ++i) {
    const Vec2 gn = normalized_coord_grad(g.d_coords_px[i], h, w);
    const double tnx = flow.coords[i].x - lr * gn.x;
    const double tny = flow.coords[i].y - lr * gn.y;
    const double common = -lr * 2.0 / static_cast<double>(T);
    d_gpx[i].x = common * (tnx - pseudo.coords[i].x) * 0.5 * (w - 1);
    d_gpx[i].y = common * (tny - pseudo.coords[i].y) * 0.5 * (h - 1);
  }
  std::vector<double> d_var(raw.size(), 0.0);
  modulated_coord_grad_var_backward(src, flow, up, d_gpx, d_var);
  std::vector<double> analytic(raw.size());
  for (size_t i = 0; i < raw.size(); ++i)
    analytic[i] = d_var[i] * bound_variance_grad(raw[i], bounds);

  return fd_check(objective, raw, analytic);
}

// ---- mesh ------------------------------------------------------------------

Mesh jittered_icosphere(Rng& rng, int level, double amount) {
  Mesh m = icosphere(level);
  for (Vec3& v : m.vertices)
    v = v + Vec3{rng.uniform(-amount, amount), rng.uniform(-amount, amount),
                 rng.uniform(-amount, amount)};
  return m;
}

std::vector<double> pack_vertices(const std::vector<Vec3>& vs) {
  std::vector<double> p(3 * vs.size());
  for (size_t i = 0; i < vs.size(); ++i) {
    p[3 * i] = vs[i].x;
    p[3 * i + 1] = vs[i].y;
    p[3 * i + 2] = vs[i].z;
  }
  return p;
}

std::vector<Vec3> unpack_vertices(std::span<const double> p) {
  std::vector<Vec3> vs(p.size() / 3);
  for (size_t i = 0; i < vs.size(); ++i) vs[i] = {p[3 * i], p[3 * i + 1], p[3 * i + 2]};
  return vs;
}

double run_deform(uint64_t seed) {
  Rng rng(seed);
  Deformation delta(20);
  for (Vec3& d : delta)
    d = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
  std::vector<Vec3> analytic(delta.size());
  const double unused = deform_loss(delta, &analytic);
  (void)unused;
  return fd_check(
      [&](std::span<const double> p) { return deform_loss(unpack_vertices(p), nullptr); },
      pack_vertices(delta), pack_vertices(analytic));
}

double run_laplacian(uint64_t seed) {
  Rng rng(seed);
  Mesh m = jittered_icosphere(rng, 0, 0.1);
  std::vector<Vec3> analytic(m.vertices.size());
  laplacian_loss(m, &analytic);
  return fd_check(
      [&](std::span<const double> p) {
        Mesh m2 = m;
        m2.vertices = unpack_vertices(p);
        return laplacian_loss(m2, nullptr);
      },
      pack_vertices(m.vertices), pack_vertices(analytic));
}

double run_flatness(uint64_t seed) {
  Rng rng(seed);
  Mesh m = jittered_icosphere(rng, 0, 0.1);
  std::vector<Vec3> analytic(m.vertices.size());
  flatness_loss(m, &analytic);
  return fd_check(
      [&](std::span<const double> p) {
        Mesh m2 = m;
        m2.vertices = unpack_vertices(p);
        return flatness_loss(m2, nullptr);
      },
      pack_vertices(m.vertices), pack_vertices(analytic));
}

double run_texture_from_uv(uint64_t seed) {
  Rng rng(seed);
  const Image tex = rand_image(rng, 7, 6, 3);
  const Mesh m = icosphere(0);
  const UVMapping uv = sphere_uv(m);
  std::vector<double> up(m.vertices.size() * 3);
  for (double& v : up) v = rng.uniform(-1.0, 1.0);

  const Image analytic = texture_from_uv_backward(tex, uv, up);
  return fd_check(
      [&](std::span<const double> p) {
        Image t2 = tex;
        std::copy(p.begin(), p.end(), t2.data.begin());
        const std::vector<double> colors = texture_from_uv(t2, uv);
        double acc = 0.0;
        for (size_t i = 0; i < colors.size(); ++i) acc += colors[i] * up[i];
        return acc;
      },
      tex.data, analytic.data);
}

// ---- camera ----------------------------------------------------------------

Camera rand_camera(Rng& rng) {
  Camera cam;
  cam.scale = rng.uniform(0.6, 1.2);
  cam.translation = {rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)};
  for (double& q : cam.quat) q = rng.uniform(-1.0, 1.0);
  double n2 = 0.0;
  for (double q : cam.quat) n2 += q * q;
  if (n2 < 0.25) cam.quat = {1.0, 0.2, -0.3, 0.4};
  return cam;
}

std::vector<double> pack_camera(const Camera& c) {
  return {c.scale, c.translation.x, c.translation.y, c.quat[0], c.quat[1], c.quat[2],
          c.quat[3]};
}

Camera unpack_camera(std::span<const double> p) {
  Camera c;
  c.scale = p[0];
  c.translation = {p[1], p[2]};
  c.quat = {p[3], p[4], p[5], p[6]};
  return c;
}

std::vector<double> pack_camera_grad(const CameraGrad& g) {
  return {g.d_scale, g.d_translation.x, g.d_translation.y, g.d_quat[0], g.d_quat[1],
          g.d_quat[2], g.d_quat[3]};
}

double run_project_params(uint64_t seed) {
  Rng rng(seed);
  const Camera cam = rand_camera(rng);
  std::vector<Vec3> vs(6);
  for (Vec3& v : vs)
    v = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  std::vector<Vec2> up(vs.size());
  for (Vec2& u : up) u = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};

  CameraGrad grad;
  for (size_t i = 0; i < vs.size(); ++i)
    project_backward(cam, vs[i], up[i], &grad, nullptr);
  return fd_check(
      [&](std::span<const double> p) {
        const Camera c2 = unpack_camera(p);
        double acc = 0.0;
        for (size_t i = 0; i < vs.size(); ++i) {
          const Projected pr = project(c2, vs[i]);
          acc += pr.xy.x * up[i].x + pr.xy.y * up[i].y;
        }
        return acc;
      },
      pack_camera(cam), pack_camera_grad(grad));
}

double run_project_vertices(uint64_t seed) {
  Rng rng(seed);
  const Camera cam = rand_camera(rng);
  std::vector<Vec3> vs(6);
  for (Vec3& v : vs)
    v = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  std::vector<Vec2> up(vs.size());
  for (Vec2& u : up) u = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};

  std::vector<Vec3> analytic(vs.size());
  for (size_t i = 0; i < vs.size(); ++i)
    project_backward(cam, vs[i], up[i], nullptr, &analytic[i]);
  return fd_check(
      [&](std::span<const double> p) {
        const std::vector<Vec3> v2 = unpack_vertices(p);
        double acc = 0.0;
        for (size_t i = 0; i < v2.size(); ++i) {
          const Projected pr = project(cam, v2[i]);
          acc += pr.xy.x * up[i].x + pr.xy.y * up[i].y;
        }
        return acc;
      },
      pack_vertices(vs), pack_vertices(analytic));
}

// ---- soft rasterizer ---------------------------------------------------------

double run_silhouette(uint64_t seed) {
  Rng rng(seed);
  const double sigma = 0.01;
  const int hw = 12;
  const Camera cam = rand_camera(rng);
  Mesh m;
  // Keep both triangles clearly non-degenerate as the camera sees them; near
  // edge-on the inside region collapses and difference quotients get rough.
  for (;;) {
    m.vertices.clear();
    for (int i = 0; i < 6; ++i)
      m.vertices.push_back(
          {rng.uniform(-0.7, 0.7), rng.uniform(-0.7, 0.7), rng.uniform(-0.7, 0.7)});
    m.faces = {{0, 1, 2}, {3, 4, 5}};
    bool ok = true;
    for (const auto& f : m.faces) {
      const Vec2 a = project(cam, m.vertices[f[0]]).xy;
      const Vec2 b = project(cam, m.vertices[f[1]]).xy;
      const Vec2 c = project(cam, m.vertices[f[2]]).xy;
      if (std::abs(cross(b - a, c - a)) < 0.1) ok = false;
    }
    if (ok) break;
  }
  const Image up = rand_image(rng, hw, hw, 1, -1.0, 1.0);

  const std::vector<Vec3> analytic =
      soft_silhouette_backward(m, cam, hw, hw, sigma, up);
  return fd_check(
      [&](std::span<const double> p) {
        Mesh m2 = m;
        m2.vertices = unpack_vertices(p);
        return dot_all(soft_silhouette(m2, cam, hw, hw, sigma), up);
      },
      pack_vertices(m.vertices), pack_vertices(analytic), 1e-6);
}

double run_render_colors(uint64_t seed) {
  Rng rng(seed);
  const Mesh m = icosphere(0);
  const Camera cam = rand_camera(rng);
  const int hw = 10, c = 3;
  std::vector<double> colors(m.vertices.size() * c);
  for (double& v : colors) v = rng.uniform(0.0, 1.0);
  const Image up = rand_image(rng, hw, hw, c, -1.0, 1.0);

  const std::vector<double> analytic = render_texture_backward(m, cam, hw, hw, c, up);
  return fd_check(
      [&](std::span<const double> p) {
        return dot_all(render_texture(m, cam, std::vector<double>(p.begin(), p.end()),
                                      hw, hw, c),
                       up);
      },
      colors, analytic);
}

// ---- losses ------------------------------------------------------------------

double run_iou(uint64_t seed) {
  Rng rng(seed);
  const Image real = rand_image(rng, 6, 7, 1, 0.0, 1.0);
  const Image pred = rand_image(rng, 6, 7, 1, 0.05, 0.95);
  Image analytic;
  iou_loss(real, pred, &analytic);
  return fd_check(
      [&](std::span<const double> p) {
        Image p2 = pred;
        std::copy(p.begin(), p.end(), p2.data.begin());
        return iou_loss(real, p2, nullptr);
      },
      pred.data, analytic.data);
}

double run_rec(uint64_t seed, RecNorm norm) {
  Rng rng(seed);
  const Image target = rand_image(rng, 5, 6, 3, 0.0, 1.0);
  Image rendered = target;
  // Keep every entry well away from the L1 kink at rendered == target.
  for (double& v : rendered.data)
    v += (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 0.4);
  Image analytic;
  rec_loss(rendered, target, norm, &analytic);
  return fd_check(
      [&](std::span<const double> p) {
        Image r2 = rendered;
        std::copy(p.begin(), p.end(), r2.data.begin());
        return rec_loss(r2, target, norm, nullptr);
      },
      rendered.data, analytic.data);
}

std::vector<Vec2> rand_points(Rng& rng, int n) {
  std::vector<Vec2> pts(n);
  for (Vec2& p : pts) p = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  return pts;
}

// Every nearest-neighbor decision must be clear-cut, or the finite
// difference could flip an assignment.
bool nn_gaps_ok(std::span<const Vec2> a, std::span<const Vec2> b) {
  for (const Vec2& p : a) {
    double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
    for (const Vec2& q : b) {
      const double d = norm2(p - q);
      if (d < d1) {
        d2 = d1;
        d1 = d;
      } else if (d < d2) {
        d2 = d;
      }
    }
    if (b.size() >= 2 && d2 - d1 < 1e-3) return false;
  }
  return true;
}

std::vector<double> pack_points(std::span<const Vec2> pts) {
  std::vector<double> p(2 * pts.size());
  for (size_t i = 0; i < pts.size(); ++i) {
    p[2 * i] = pts[i].x;
    p[2 * i + 1] = pts[i].y;
  }
  return p;
}

std::vector<Vec2> unpack_points(std::span<const double> p) {
  std::vector<Vec2> pts(p.size() / 2);
  for (size_t i = 0; i < pts.size(); ++i) pts[i] = {p[2 * i], p[2 * i + 1]};
  return pts;
}

double run_chamfer(uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec2> a, b;
  do {
    a = rand_points(rng, 5);
    b = rand_points(rng, 7);
  } while (!nn_gaps_ok(a, b) || !nn_gaps_ok(b, a));

  std::vector<Vec2> d_a, d_b;
  chamfer_2d(a, b, &d_a, &d_b);
  std::vector<double> point = pack_points(a);
  const std::vector<double> pb = pack_points(b);
  point.insert(point.end(), pb.begin(), pb.end());
  std::vector<double> analytic = pack_points(d_a);
  const std::vector<double> ab = pack_points(d_b);
  analytic.insert(analytic.end(), ab.begin(), ab.end());

  return fd_check(
      [&](std::span<const double> p) {
        const std::vector<Vec2> a2 = unpack_points(p.subspan(0, 2 * a.size()));
        const std::vector<Vec2> b2 = unpack_points(p.subspan(2 * a.size()));
        return chamfer_2d(a2, b2, nullptr, nullptr);
      },
      point, analytic);
}

double run_align(uint64_t seed) {
  Rng rng(seed);
  const Mesh m = icosphere(0);
  const UVMapping uv = sphere_uv(m);
  const Camera cam = rand_camera(rng);
  const RasterWeights weights = raster_weights(m, cam, 16, 16, 0.01);
  const FlowField flow = rand_flow(rng, 8, 8, 16, 16);

  FlowField analytic(8, 8);
  align_loss(flow, weights, uv, m, &analytic);
  return fd_check(
      [&](std::span<const double> p) {
        return align_loss(unpack_flow(p, 8, 8), weights, uv, m, nullptr);
      },
      pack_flow(flow), pack_flow(analytic));
}

double run_part_chamfer(uint64_t seed) {
  Rng rng(seed);
  const Mesh m = icosphere(0);
  const std::vector<int> parts = octant_parts(m);

  for (;;) {
    const Camera ref = rand_camera(rng);
    const Camera cam = rand_camera(rng);
    PartPoints2D evidence;
    const std::vector<Projected> ref_proj = project_all(ref, m.vertices);
    for (size_t i = 0; i < m.vertices.size(); ++i)
      evidence[parts[i]].push_back(ref_proj[i].xy + Vec2{rng.uniform(-0.1, 0.1),
                                                         rng.uniform(-0.1, 0.1)});

    // Clear nearest-neighbor gaps within every part, in both directions.
    const std::vector<Projected> proj = project_all(cam, m.vertices);
    PartPoints2D projected;
    for (size_t i = 0; i < m.vertices.size(); ++i)
      projected[parts[i]].push_back(proj[i].xy);
    bool ok = true;
    for (const auto& [part, ev] : evidence)
      ok = ok && nn_gaps_ok(projected[part], ev) && nn_gaps_ok(ev, projected[part]);
    if (!ok) continue;

    CameraGrad grad;
    part_chamfer(m, parts, cam, evidence, &grad);
    return fd_check(
        [&](std::span<const double> p) {
          return part_chamfer(m, parts, unpack_camera(p), evidence, nullptr);
        },
        pack_camera(cam), pack_camera_grad(grad));
  }
}

double run_prob(uint64_t seed) {
  Rng rng(seed);
  const Image real_img = rand_image(rng, 6, 6, 2, 0.0, 1.0);
  Image rendered_img = real_img;
  for (double& v : rendered_img.data)
    v += (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 0.3);
  const ProbMap real = ProbMap::from_image(real_img);
  const ProbMap rendered = ProbMap::from_image(rendered_img);

  ProbMap analytic;
  prob_loss(real, rendered, &analytic);
  return fd_check(
      [&](std::span<const double> p) {
        ProbMap r2 = rendered;
        std::copy(p.begin(), p.end(), r2.data.begin());
        return prob_loss(real, r2, nullptr);
      },
      rendered.data, analytic.data);
}

// ---- variance reparameterization ---------------------------------------------

double run_bound_variance(uint64_t seed) {
  Rng rng(seed);
  const VarianceBounds bounds{0.25, 4.0};
  std::vector<double> raw(16), up(16);
  for (double& v : raw) v = rng.uniform(-3.0, 3.0);
  for (double& v : up) v = rng.uniform(-1.0, 1.0);
  std::vector<double> analytic(raw.size());
  for (size_t i = 0; i < raw.size(); ++i)
    analytic[i] = up[i] * bound_variance_grad(raw[i], bounds);
  return fd_check(
      [&](std::span<const double> p) {
        double acc = 0.0;
        for (size_t i = 0; i < p.size(); ++i) acc += up[i] * bound_variance(p[i], bounds);
        return acc;
      },
      raw, analytic);
}

double run_var_regularizer(uint64_t seed) {
  Rng rng(seed);
  const VarianceBounds bounds{0.25, 4.0};
  const double lambda = 0.01;
  std::vector<double> raw(16);
  for (double& v : raw) v = rng.uniform(-3.0, 3.0);
  std::vector<double> analytic(raw.size(), 0.0);
  variance_regularizer(raw, bounds, lambda, analytic);
  return fd_check(
      [&](std::span<const double> p) {
        std::vector<double> scratch(p.size(), 0.0);
        return variance_regularizer(p, bounds, lambda, scratch);
      },
      raw, analytic);
}

struct Case {
  const char* name;
  double tol;
  double (*run)(uint64_t seed);
};

const Case kCases[] = {
    {"sample_coords_baseline", kTolDefault,
     [](uint64_t s) { return run_sample_coords(s, SampleMode::kBaseline); }},
    {"sample_coords_replace", kTolDefault,
     [](uint64_t s) { return run_sample_coords(s, SampleMode::kReplace); }},
    {"sample_coords_gradient_only", kTolDefault,
     [](uint64_t s) { return run_sample_coords(s, SampleMode::kGradientOnly); }},
    {"sample_image_baseline", kTolDefault,
     [](uint64_t s) { return run_sample_image(s, SampleMode::kBaseline); }},
    {"sample_image_replace", kTolDefault,
     [](uint64_t s) { return run_sample_image(s, SampleMode::kReplace); }},
    {"sample_image_gradient_only", kTolDefault,
     [](uint64_t s) { return run_sample_image(s, SampleMode::kGradientOnly); }},
    {"sample_points_coords", kTolDefault, run_sample_points},
    {"steer_variance", kTolDefault, run_steer_var},
    {"deform_loss", kTolDefault, run_deform},
    {"laplacian_loss", kTolDefault, run_laplacian},
    {"flatness_loss", kTolDefault, run_flatness},
    {"texture_from_uv", kTolDefault, run_texture_from_uv},
    {"project_camera_params", kTolDefault, run_project_params},
    {"project_vertices", kTolDefault, run_project_vertices},
    {"soft_silhouette_vertices", kTolSilhouette, run_silhouette},
    {"render_texture_colors", kTolDefault, run_render_colors},
    {"iou_loss", kTolDefault, run_iou},
    {"rec_loss_l1", kTolDefault, [](uint64_t s) { return run_rec(s, RecNorm::kL1); }},
    {"rec_loss_l2", kTolDefault, [](uint64_t s) { return run_rec(s, RecNorm::kL2); }},
    {"chamfer_2d", kTolDefault, run_chamfer},
    {"align_loss", kTolDefault, run_align},
    {"part_chamfer_camera", kTolDefault, run_part_chamfer},
    {"prob_loss", kTolDefault, run_prob},
    {"bound_variance", kTolDefault, run_bound_variance},
    {"variance_regularizer", kTolDefault, run_var_regularizer},
};

}  // namespace

std::vector<GradCheckReport> gradient_check_suite(int seeds) {
  if (seeds < 1) throw ConfigError("gradient check needs at least one seed");
  std::vector<GradCheckReport> reports;
  for (const Case& c : kCases) {
    GradCheckReport r;
    r.name = c.name;
    r.tolerance = c.tol;
    for (int s = 0; s < seeds; ++s) r.max_rel_err = std::max(r.max_rel_err, c.run(s));
    r.pass = r.max_rel_err <= c.tol;
    reports.push_back(r);
  }
  return reports;
}

}  // namespace texflow
