#include "texflow/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <string>

#include "texflow/error.hpp"
#include "texflow/io.hpp"
#include "texflow/sampler.hpp"

namespace texflow {

namespace {

constexpr double kMinNormalLength = 1e-12;

Vec3 normalized(Vec3 v) {
  const double len = norm(v);
  if (len < kMinNormalLength) throw GeometryError("cannot normalize zero-length vector");
  return (1.0 / len) * v;
}

uint64_t edge_key(int a, int b) {
  const uint64_t lo = static_cast<uint64_t>(std::min(a, b));
  const uint64_t hi = static_cast<uint64_t>(std::max(a, b));
  return (hi << 32) | lo;
}

}  // namespace

Mesh icosphere(int level) {
  if (level < 0 || level > 6)
    throw CapacityError("icosphere level must be in [0, 6], got " + std::to_string(level));

  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  Mesh mesh;
  mesh.vertices = {
      {-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1},
  };
  for (Vec3& v : mesh.vertices) v = normalized(v);
  mesh.faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
  };

  for (int l = 0; l < level; ++l) {
    std::map<uint64_t, int> midpoint;
    auto mid = [&](int a, int b) {
      const uint64_t key = edge_key(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const int idx = static_cast<int>(mesh.vertices.size());
      mesh.vertices.push_back(
          normalized(0.5 * (mesh.vertices[a] + mesh.vertices[b])));
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(mesh.faces.size() * 4);
    for (const auto& f : mesh.faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    mesh.faces = std::move(next);
  }
  return mesh;
}

UVMapping sphere_uv(const Mesh& mesh) {
  UVMapping out;
  out.uv.reserve(mesh.vertices.size());
  for (const Vec3& v : mesh.vertices) {
    const double len = norm(v);
    if (len < kMinNormalLength) throw GeometryError("sphere_uv: zero-length vertex");
    double u = (std::atan2(v.z, v.x) + std::numbers::pi) / (2.0 * std::numbers::pi);
    if (u >= 1.0) u = 0.0;  // atan2 == +pi lands on the seam; wrap it
    const double vv = (std::asin(std::clamp(v.y / len, -1.0, 1.0)) +
                       std::numbers::pi / 2.0) / std::numbers::pi;
    out.uv.push_back({u, vv});
  }
  return out;
}

Mesh apply_deform(const Mesh& mesh, const Deformation& delta) {
  if (delta.size() != mesh.vertices.size())
    throw ShapeError("apply_deform: offset count != vertex count");
  Mesh out = mesh;
  for (size_t i = 0; i < delta.size(); ++i) out.vertices[i] += delta[i];
  return out;
}

void save_obj(const std::string& path, const Mesh& mesh, const UVMapping* uv) {
  if (uv && uv->uv.size() != mesh.vertices.size())
    throw ShapeError("save_obj: uv count != vertex count");
  std::string out;
  char line[160];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(line, sizeof(line), "v %.9g %.9g %.9g\n", v.x, v.y, v.z);
    out += line;
  }
  if (uv) {
    for (const Vec2& t : uv->uv) {
      std::snprintf(line, sizeof(line), "vt %.9g %.9g\n", t.x, t.y);
      out += line;
    }
  }
  for (const auto& f : mesh.faces) {
    if (uv) {
      std::snprintf(line, sizeof(line), "f %d/%d %d/%d %d/%d\n", f[0] + 1, f[0] + 1,
                    f[1] + 1, f[1] + 1, f[2] + 1, f[2] + 1);
    } else {
      std::snprintf(line, sizeof(line), "f %d %d %d\n", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out += line;
  }
  write_file_atomic(path, out);
}

std::vector<std::array<int, 2>> unique_edges(const Mesh& mesh) {
  std::vector<std::array<int, 2>> edges;
  edges.reserve(mesh.faces.size() * 3);
  for (const auto& f : mesh.faces)
    for (int k = 0; k < 3; ++k) {
      const int a = f[k];
      const int b = f[(k + 1) % 3];
      edges.push_back({std::min(a, b), std::max(a, b)});
    }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

bool is_edge_manifold(const Mesh& mesh) {
  std::map<uint64_t, int> count;
  for (const auto& f : mesh.faces)
    for (int k = 0; k < 3; ++k) count[edge_key(f[k], f[(k + 1) % 3])] += 1;
  for (const auto& [key, n] : count)
    if (n != 2) return false;
  return !count.empty();
}

double deform_loss(const Deformation& delta, std::vector<Vec3>* d_offsets) {
  if (delta.empty()) throw DegenerateInputError("deform_loss: empty deformation");
  if (d_offsets) d_offsets->assign(delta.size(), Vec3{});
  const double inv_n = 1.0 / static_cast<double>(delta.size());
  double acc = 0.0;
  for (size_t i = 0; i < delta.size(); ++i) {
    acc += norm2(delta[i]);
    if (d_offsets) (*d_offsets)[i] = (2.0 * inv_n) * delta[i];
  }
  return acc * inv_n;
}

double laplacian_loss(const Mesh& mesh, std::vector<Vec3>* d_vertices) {
  const size_t n = mesh.vertices.size();
  if (n == 0) throw DegenerateInputError("laplacian_loss: empty mesh");
  std::vector<std::vector<int>> nbr(n);
  for (const auto& e : unique_edges(mesh)) {
    nbr[e[0]].push_back(e[1]);
    nbr[e[1]].push_back(e[0]);
  }
  if (d_vertices) d_vertices->assign(n, Vec3{});
  const double inv_n = 1.0 / static_cast<double>(n);
  double acc = 0.0;
  for (size_t p = 0; p < n; ++p) {
    if (nbr[p].empty()) continue;
    const double inv_k = 1.0 / static_cast<double>(nbr[p].size());
    Vec3 centroid{};
    for (int q : nbr[p]) centroid += mesh.vertices[q];
    const Vec3 delta = mesh.vertices[p] - inv_k * centroid;
    acc += norm2(delta);
    if (d_vertices) {
      (*d_vertices)[p] += (2.0 * inv_n) * delta;
      for (int q : nbr[p]) (*d_vertices)[q] += (-2.0 * inv_n * inv_k) * delta;
    }
  }
  return acc * inv_n;
}

namespace {

struct FaceFrame {
  Vec3 n;        // unit normal
  double inv_len;  // 1 / ||cross||
};

FaceFrame face_frame(const Mesh& mesh, int f) {
  const Vec3 a = mesh.vertices[mesh.faces[f][0]];
  const Vec3 b = mesh.vertices[mesh.faces[f][1]];
  const Vec3 c = mesh.vertices[mesh.faces[f][2]];
  const Vec3 m = cross(b - a, c - a);
  const double len = norm(m);
  if (len < kMinNormalLength)
    throw GeometryError("flatness_loss: zero-area face " + std::to_string(f));
  return {(1.0 / len) * m, 1.0 / len};
}

// Scatter dL/dn of one face to its vertices. With m the unnormalized normal,
// dL/dm = (dL/dn - n (n . dL/dn)) / ||m||, and for m = (b-a) x (c-a):
// dL/da = (b-c) x dL/dm, dL/db = (c-a) x dL/dm, dL/dc = (a-b) x dL/dm.
void scatter_normal_grad(const Mesh& mesh, int f, const FaceFrame& fr, Vec3 d_n,
                         std::vector<Vec3>& d_vertices) {
  const Vec3 a = mesh.vertices[mesh.faces[f][0]];
  const Vec3 b = mesh.vertices[mesh.faces[f][1]];
  const Vec3 c = mesh.vertices[mesh.faces[f][2]];
  const Vec3 d_m = fr.inv_len * (d_n - dot(fr.n, d_n) * fr.n);
  d_vertices[mesh.faces[f][0]] += cross(b - c, d_m);
  d_vertices[mesh.faces[f][1]] += cross(c - a, d_m);
  d_vertices[mesh.faces[f][2]] += cross(a - b, d_m);
}

}  // namespace

double flatness_loss(const Mesh& mesh, std::vector<Vec3>* d_vertices) {
  std::map<uint64_t, std::vector<int>> edge_faces;
  for (size_t f = 0; f < mesh.faces.size(); ++f)
    for (int k = 0; k < 3; ++k) {
      const auto& face = mesh.faces[f];
      edge_faces[edge_key(face[k], face[(k + 1) % 3])].push_back(static_cast<int>(f));
    }

  std::vector<std::array<int, 2>> interior;
  for (const auto& [key, faces] : edge_faces) {
    if (faces.size() > 2)
      throw GeometryError("flatness_loss: edge shared by more than two faces");
    if (faces.size() == 2) interior.push_back({faces[0], faces[1]});
  }
  if (interior.empty())
    throw DegenerateInputError("flatness_loss: mesh has no interior edges");

  std::vector<FaceFrame> frames(mesh.faces.size());
  std::vector<bool> have(mesh.faces.size(), false);
  auto frame = [&](int f) -> const FaceFrame& {
    if (!have[f]) {
      frames[f] = face_frame(mesh, f);
      have[f] = true;
    }
    return frames[f];
  };

  if (d_vertices) d_vertices->assign(mesh.vertices.size(), Vec3{});
  const double inv_e = 1.0 / static_cast<double>(interior.size());
  double acc = 0.0;
  for (const auto& [f1, f2] : interior) {
    const FaceFrame& a = frame(f1);
    const FaceFrame& b = frame(f2);
    acc += 1.0 - dot(a.n, b.n);
    if (d_vertices) {
      scatter_normal_grad(mesh, f1, a, (-inv_e) * b.n, *d_vertices);
      scatter_normal_grad(mesh, f2, b, (-inv_e) * a.n, *d_vertices);
    }
  }
  return acc * inv_e;
}

std::vector<double> texture_from_uv(const Image& texture, const UVMapping& uv) {
  std::vector<double> xy(uv.uv.size() * 2);
  for (size_t i = 0; i < uv.uv.size(); ++i) {
    xy[2 * i + 0] = uv.uv[i].x * (texture.width - 1);
    xy[2 * i + 1] = uv.uv[i].y * (texture.height - 1);
  }
  std::vector<double> out(uv.uv.size() * texture.channels);
  sample_points(texture, xy, out);
  return out;
}

Image texture_from_uv_backward(const Image& texture, const UVMapping& uv,
                               std::span<const double> upstream) {
  if (upstream.size() != uv.uv.size() * texture.channels)
    throw ShapeError("texture_from_uv_backward: upstream length mismatch");
  std::vector<double> xy(uv.uv.size() * 2);
  for (size_t i = 0; i < uv.uv.size(); ++i) {
    xy[2 * i + 0] = uv.uv[i].x * (texture.width - 1);
    xy[2 * i + 1] = uv.uv[i].y * (texture.height - 1);
  }
  Image d_texture(texture.height, texture.width, texture.channels, 0.0);
  sample_points_backward(texture, xy, upstream, nullptr, &d_texture);
  return d_texture;
}

std::vector<int> octant_parts(const Mesh& mesh) {
  std::vector<int> labels;
  labels.reserve(mesh.vertices.size());
  for (const Vec3& v : mesh.vertices)
    labels.push_back((v.x >= 0.0 ? 1 : 0) | (v.y >= 0.0 ? 2 : 0) | (v.z >= 0.0 ? 4 : 0));
  return labels;
}

}  // namespace texflow
