#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "texflow/grid.hpp"

namespace texflow {

// Triangle mesh. Faces are CCW when viewed from outside.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
};

// Per-vertex offsets applied on top of a template's vertices.
using Deformation = std::vector<Vec3>;

// Per-vertex texture coordinates in [0, 1]^2.
struct UVMapping {
  std::vector<Vec2> uv;
};

// Unit icosphere by recursive 4-way subdivision of an icosahedron;
// level L has 10*4^L + 2 vertices and 20*4^L faces. Levels outside [0, 6]
// throw CapacityError.
Mesh icosphere(int level);

// Equirectangular coordinates for near-unit-sphere vertices:
//   u = (atan2(z, x) + pi) / (2 pi), with the u = 1 seam wrapped to 0
//   v = (asin(y / |v|) + pi/2) / pi
// A zero-length vertex throws GeometryError.
UVMapping sphere_uv(const Mesh& mesh);

Mesh apply_deform(const Mesh& mesh, const Deformation& delta);

// Wavefront OBJ with optional per-vertex texture coordinates. Atomic write.
void save_obj(const std::string& path, const Mesh& mesh, const UVMapping* uv);

// Undirected edge list, each edge once, endpoints ordered (lo, hi),
// lexicographically sorted.
std::vector<std::array<int, 2>> unique_edges(const Mesh& mesh);

// True when every edge borders exactly two faces (closed 2-manifold surface).
bool is_edge_manifold(const Mesh& mesh);

// mean_i ||delta_i||^2. d_offsets, when given, must have delta's size and is
// overwritten with the gradient.
double deform_loss(const Deformation& delta, std::vector<Vec3>* d_offsets);

// Uniform-graph Laplacian smoothness: mean_p ||v_p - centroid(neighbors(p))||^2.
// Vertices without neighbors contribute zero.
double laplacian_loss(const Mesh& mesh, std::vector<Vec3>* d_vertices);

// Fold energy over interior edges (exactly two incident faces):
// mean_e (1 - n1.n2), where n1, n2 are the unit normals of the two faces.
// Coplanar faces with consistent winding score 0, a 90-degree fold scores 1.
// Zero-area faces throw GeometryError; an edge on 3+ faces throws
// GeometryError; no interior edges throws DegenerateInputError.
double flatness_loss(const Mesh& mesh, std::vector<Vec3>* d_vertices);

// Bilinear lookup of per-vertex colors from a texture image; uv (0,0) reads
// the top-left pixel center, (1,1) the bottom-right. Returns N*channels
// values in vertex order.
std::vector<double> texture_from_uv(const Image& texture, const UVMapping& uv);

// Gradient of L = sum(upstream (.) texture_from_uv(...)) w.r.t. the texture.
Image texture_from_uv_backward(const Image& texture, const UVMapping& uv,
                               std::span<const double> upstream);

// Octant part labels (0..7) from vertex coordinate signs; the analytic part
// partition used by the part-level losses' tests and demos.
std::vector<int> octant_parts(const Mesh& mesh);

}  // namespace texflow
