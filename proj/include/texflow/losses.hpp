#pragma once

#include <map>
#include <span>
#include <vector>

#include "texflow/camera.hpp"
#include "texflow/grid.hpp"
#include "texflow/mesh.hpp"
#include "texflow/softrender.hpp"

namespace texflow {

// Soft-IOU silhouette loss: 1 - sum(a.b) / sum(a + b - a.b) for values in
// [0, 1]. An all-zero union yields loss 0 with zero gradient. d_pred, when
// non-null, is overwritten with dL/d(pred).
double iou_loss(const Image& real, const Image& pred, Image* d_pred);

enum class RecNorm { kL1, kL2 };

// Mean elementwise reconstruction error, L1 by default in the experiments
// with L2 as the config alternative. The L1 gradient at exact ties is 0.
double rec_loss(const Image& rendered, const Image& target, RecNorm norm,
                Image* d_rendered);

// Symmetric mean of squared nearest-neighbor distances between two point
// sets. Nearest neighbors tie toward the lowest index. Gradients flow to
// both sets. Empty inputs throw DegenerateInputError.
double chamfer_2d(std::span<const Vec2> a, std::span<const Vec2> b,
                  std::vector<Vec2>* d_a, std::vector<Vec2>* d_b);

// Consistency between where a face samples its texture from and where it
// renders to. For each face: a = mean flow coordinate over the texels whose
// UV centers fall inside the face's UV triangle (texel (ty,tx) of an
// H_t x W_t flow sits at ((tx+.5)/W_t, (ty+.5)/H_t)); b = the
// weight-averaged raster center sum_p w_f(p) c(p) / sum_p w_f(p). The loss
// is the mean of ||a - b||^2 over faces that have both texels and weight
// mass; faces with neither are skipped, and no includable face at all
// throws DegenerateInputError. Gradients w.r.t. the flow only (b is treated
// as the fixed render-side evidence).
double align_loss(const FlowField& flow, const RasterWeights& weights,
                  const UVMapping& uv, const Mesh& mesh, FlowField* d_flow);

// 2D evidence for each part id: image-space points in [-1, 1]^2.
using PartPoints2D = std::map<int, std::vector<Vec2>>;

// Mean over parts of chamfer_2d between the part's projected vertices and
// its 2D evidence; differentiates through the weak-perspective projection
// into the camera parameters. Parts present on only one side throw
// DegenerateInputError.
double part_chamfer(const Mesh& mesh, const std::vector<int>& vertex_parts,
                    const Camera& cam, const PartPoints2D& evidence,
                    CameraGrad* d_cam);

// K probability maps over the raster.
struct ProbMap {
  int maps = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;  // map-major

  ProbMap() = default;
  ProbMap(int k, int h, int w, double fill = 0.0);
  static ProbMap from_image(const Image& img);  // channel c becomes map c

  double& at(int k, int i, int j) {
    return data[(static_cast<size_t>(k) * height + i) * width + j];
  }
  double at(int k, int i, int j) const {
    return data[(static_cast<size_t>(k) * height + i) * width + j];
  }
};

// Mean absolute difference across all maps; d_rendered optional.
double prob_loss(const ProbMap& real, const ProbMap& rendered, ProbMap* d_rendered);

}  // namespace texflow
