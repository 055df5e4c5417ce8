#include "texflow/losses.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "texflow/error.hpp"

namespace texflow {

double iou_loss(const Image& real, const Image& pred, Image* d_pred) {
  if (!real.same_shape(pred)) throw ShapeError("iou_loss: shape mismatch");
  double inter = 0.0, uni = 0.0;
  for (size_t i = 0; i < real.data.size(); ++i) {
    const double a = real.data[i];
    const double b = pred.data[i];
    inter += a * b;
    uni += a + b - a * b;
  }
  if (d_pred) *d_pred = Image(pred.height, pred.width, pred.channels, 0.0);
  if (uni == 0.0) return 0.0;
  if (d_pred) {
    const double inv_u2 = 1.0 / (uni * uni);
    for (size_t i = 0; i < real.data.size(); ++i) {
      const double a = real.data[i];
      // d/db [1 - I/U] with dI/db = a, dU/db = 1 - a
      d_pred->data[i] = -(a * uni - inter * (1.0 - a)) * inv_u2;
    }
  }
  return 1.0 - inter / uni;
}

double rec_loss(const Image& rendered, const Image& target, RecNorm norm,
                Image* d_rendered) {
  if (!rendered.same_shape(target)) throw ShapeError("rec_loss: shape mismatch");
  if (d_rendered) *d_rendered = Image(rendered.height, rendered.width,
                                      rendered.channels, 0.0);
  const double inv_n = 1.0 / static_cast<double>(rendered.data.size());
  double acc = 0.0;
  for (size_t i = 0; i < rendered.data.size(); ++i) {
    const double diff = rendered.data[i] - target.data[i];
    if (norm == RecNorm::kL1) {
      acc += std::abs(diff);
      if (d_rendered)
        d_rendered->data[i] = (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) * inv_n;
    } else {
      acc += diff * diff;
      if (d_rendered) d_rendered->data[i] = 2.0 * diff * inv_n;
    }
  }
  return acc * inv_n;
}

namespace {

// Index of the nearest point in pts, ties toward the lowest index.
size_t nearest(std::span<const Vec2> pts, Vec2 p) {
  size_t best = 0;
  double best_d2 = norm2(pts[0] - p);
  for (size_t i = 1; i < pts.size(); ++i) {
    const double d2 = norm2(pts[i] - p);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return best;
}

}  // namespace

double chamfer_2d(std::span<const Vec2> a, std::span<const Vec2> b,
                  std::vector<Vec2>* d_a, std::vector<Vec2>* d_b) {
  if (a.empty() || b.empty())
    throw DegenerateInputError("chamfer_2d: point sets must be non-empty");
  if (d_a) d_a->assign(a.size(), Vec2{});
  if (d_b) d_b->assign(b.size(), Vec2{});
  const double inv_a = 1.0 / static_cast<double>(a.size());
  const double inv_b = 1.0 / static_cast<double>(b.size());
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const size_t j = nearest(b, a[i]);
    const Vec2 diff = a[i] - b[j];
    acc += norm2(diff) * inv_a;
    if (d_a) (*d_a)[i] = (*d_a)[i] + (2.0 * inv_a) * diff;
    if (d_b) (*d_b)[j] = (*d_b)[j] + (-2.0 * inv_a) * diff;
  }
  for (size_t j = 0; j < b.size(); ++j) {
    const size_t i = nearest(a, b[j]);
    const Vec2 diff = b[j] - a[i];
    acc += norm2(diff) * inv_b;
    if (d_b) (*d_b)[j] = (*d_b)[j] + (2.0 * inv_b) * diff;
    if (d_a) (*d_a)[i] = (*d_a)[i] + (-2.0 * inv_b) * diff;
  }
  return acc;
}

namespace {

bool uv_inside(Vec2 a, Vec2 b, Vec2 c, Vec2 p) {
  const double area = cross(b - a, c - a);
  if (area == 0.0) return false;
  const double s0 = cross(b - a, p - a);
  const double s1 = cross(c - b, p - b);
  const double s2 = cross(a - c, p - c);
  if (area > 0.0) return s0 >= 0.0 && s1 >= 0.0 && s2 >= 0.0;
  return s0 <= 0.0 && s1 <= 0.0 && s2 <= 0.0;
}

}  // namespace

double align_loss(const FlowField& flow, const RasterWeights& weights,
                  const UVMapping& uv, const Mesh& mesh, FlowField* d_flow) {
  if (uv.uv.size() != mesh.vertices.size())
    throw ShapeError("align_loss: uv count != vertex count");
  if (weights.n_faces != static_cast<int>(mesh.faces.size()))
    throw ShapeError("align_loss: weights cover a different face count");
  if (d_flow) *d_flow = FlowField(flow.height, flow.width, {0.0, 0.0});

  struct FaceTerm {
    std::vector<int> texels;  // flat indices into the flow grid
    Vec2 a, b;
  };
  std::vector<FaceTerm> included;
  included.reserve(mesh.faces.size());

  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const Vec2 ta = uv.uv[mesh.faces[f][0]];
    const Vec2 tb = uv.uv[mesh.faces[f][1]];
    const Vec2 tc = uv.uv[mesh.faces[f][2]];
    const double u_lo = std::min({ta.x, tb.x, tc.x});
    const double u_hi = std::max({ta.x, tb.x, tc.x});
    const double v_lo = std::min({ta.y, tb.y, tc.y});
    const double v_hi = std::max({ta.y, tb.y, tc.y});

    FaceTerm term;
    Vec2 coord_sum{};
    for (int ty = 0; ty < flow.height; ++ty) {
      const double tv = (ty + 0.5) / flow.height;
      if (tv < v_lo || tv > v_hi) continue;
      for (int tx = 0; tx < flow.width; ++tx) {
        const double tu = (tx + 0.5) / flow.width;
        if (tu < u_lo || tu > u_hi) continue;
        if (!uv_inside(ta, tb, tc, {tu, tv})) continue;
        term.texels.push_back(ty * flow.width + tx);
        coord_sum = coord_sum + flow.coords[ty * flow.width + tx];
      }
    }
    if (term.texels.empty()) continue;

    double mass = 0.0;
    Vec2 centroid{};
    for (int i = 0; i < weights.height; ++i)
      for (int j = 0; j < weights.width; ++j) {
        const double w = weights.at(static_cast<int>(f), i, j);
        mass += w;
        centroid = centroid + w * raster_center(i, j, weights.height, weights.width);
      }
    if (!(mass > 0.0)) continue;

    term.a = (1.0 / static_cast<double>(term.texels.size())) * coord_sum;
    term.b = (1.0 / mass) * centroid;
    included.push_back(std::move(term));
  }

  if (included.empty())
    throw DegenerateInputError("align_loss: no face has both texels and weight mass");

  const double inv_f = 1.0 / static_cast<double>(included.size());
  double acc = 0.0;
  for (const FaceTerm& term : included) {
    const Vec2 diff = term.a - term.b;
    acc += norm2(diff);
    if (d_flow) {
      const Vec2 g = (2.0 * inv_f / static_cast<double>(term.texels.size())) * diff;
      for (int idx : term.texels) d_flow->coords[idx] = d_flow->coords[idx] + g;
    }
  }
  return acc * inv_f;
}

double part_chamfer(const Mesh& mesh, const std::vector<int>& vertex_parts,
                    const Camera& cam, const PartPoints2D& evidence,
                    CameraGrad* d_cam) {
  if (vertex_parts.size() != mesh.vertices.size())
    throw ShapeError("part_chamfer: label count != vertex count");
  if (d_cam) *d_cam = CameraGrad{};

  std::map<int, std::vector<int>> part_vertices;
  for (size_t v = 0; v < mesh.vertices.size(); ++v)
    part_vertices[vertex_parts[v]].push_back(static_cast<int>(v));

  std::set<int> mesh_parts, evidence_parts;
  for (const auto& [id, _] : part_vertices) mesh_parts.insert(id);
  for (const auto& [id, _] : evidence) evidence_parts.insert(id);
  if (mesh_parts != evidence_parts)
    throw DegenerateInputError("part_chamfer: part ids differ between mesh and evidence");

  const std::vector<Projected> proj = project_all(cam, mesh.vertices);
  const double inv_parts = 1.0 / static_cast<double>(part_vertices.size());
  double acc = 0.0;
  for (const auto& [id, verts] : part_vertices) {
    const std::vector<Vec2>& pts = evidence.at(id);
    if (pts.empty())
      throw DegenerateInputError("part_chamfer: empty evidence for part " +
                                 std::to_string(id));
    std::vector<Vec2> projected;
    projected.reserve(verts.size());
    for (int v : verts) projected.push_back(proj[v].xy);

    std::vector<Vec2> d_projected;
    acc += inv_parts *
           chamfer_2d(projected, pts, d_cam ? &d_projected : nullptr, nullptr);
    if (d_cam)
      for (size_t k = 0; k < verts.size(); ++k)
        project_backward(cam, mesh.vertices[verts[k]], inv_parts * d_projected[k],
                         d_cam, nullptr);
  }
  return acc;
}

ProbMap::ProbMap(int k, int h, int w, double fill) : maps(k), height(h), width(w) {
  if (k < 1 || h < 1 || w < 1) throw ShapeError("ProbMap dims must be positive");
  data.assign(static_cast<size_t>(k) * h * w, fill);
}

ProbMap ProbMap::from_image(const Image& img) {
  ProbMap p(img.channels, img.height, img.width);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) p.at(c, y, x) = img.at(y, x, c);
  return p;
}

double prob_loss(const ProbMap& real, const ProbMap& rendered, ProbMap* d_rendered) {
  if (real.maps != rendered.maps || real.height != rendered.height ||
      real.width != rendered.width)
    throw ShapeError("prob_loss: shape mismatch");
  if (d_rendered) *d_rendered = ProbMap(real.maps, real.height, real.width, 0.0);
  const double inv_n = 1.0 / static_cast<double>(real.data.size());
  double acc = 0.0;
  for (size_t i = 0; i < real.data.size(); ++i) {
    const double diff = rendered.data[i] - real.data[i];
    acc += std::abs(diff);
    if (d_rendered)
      d_rendered->data[i] = (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) * inv_n;
  }
  return acc * inv_n;
}

}  // namespace texflow
