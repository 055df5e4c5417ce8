#pragma once

#include <span>
#include <vector>

#include "texflow/grid.hpp"

namespace texflow {

// How a variance map participates in sampling:
//   kBaseline     var ignored entirely.
//   kReplace      samples and gradients both come from the modulated image
//                 U'(y,x,c) = U(y,x,c) * var(y,x).
//   kGradientOnly forward samples stay unmodulated; only the coordinate
//                 gradients are computed from the modulated image. This keeps
//                 output colors honest while reshaping the descent directions
//                 so flat neighborhoods stop producing zero gradients.
enum class SampleMode { kBaseline, kReplace, kGradientOnly };

struct SampleGrad {
  // dL/d(x,y) per flow cell, in PIXEL units of the source image. Multiply by
  // (extent-1)/2 (see normalized_coord_grad) to get dL/d(u,v) in the
  // normalized coordinates the flow field actually stores.
  std::vector<Vec2> d_coords_px;
  // dL/dU over the source image.
  Image d_image;
};

// Maps a normalized coordinate in [-1, 1] to pixel space: -1 -> 0 and
// +1 -> extent-1, i.e. the endpoints land on the outermost pixel centers.
double denormalize(double u, int extent);

// The 2x2 source cell a pixel-space coordinate samples, after border
// clamping. An exact integer coordinate gets fraction 0 and the cell to its
// right/below (one-sided derivative); x1/y1 saturate at the last pixel.
// clamped_* flag raw coordinates strictly outside [0, extent-1].
struct SampleCell {
  int x0, x1, y0, y1;
  double fx, fy;
  bool clamped_x, clamped_y;
};
SampleCell locate_cell(double x_px, double y_px, int height, int width);

// Bilinear sampling of src at the flow's coordinates; output has the flow's
// spatial dims and src's channels. Out-of-range coordinates clamp to the
// border. Baseline behaviour (no variance).
Image grid_sample(const Image& src, const FlowField& flow);

// Same with a variance map. var must cover src's pixels. kBaseline ignores
// var; kGradientOnly's forward equals baseline by design.
Image grid_sample(const Image& src, const FlowField& flow, const VarianceMap& var,
                  SampleMode mode);

// Gradients of L = sum(upstream (.) grid_sample(...)). upstream must be
// flow-shaped with src's channel count.
//
// d_coords_px per cell is sum_c upstream_c * d(sample_c)/d(x,y), evaluated on
// the unmodulated image in kBaseline and on the modulated image in kReplace
// and kGradientOnly. The derivative at an exact integer coordinate is
// one-sided, taken over the cell the (zero) fractional part selects; a
// coordinate that was clamped gets gradient 0 on that axis, matching the
// constant forward. d_image carries the bilinear weights, additionally
// scaled by var in kReplace (whose forward actually multiplies by var).
// Accumulation order is fixed (row-major cells), so results are reproducible.
SampleGrad grid_sample_backward(const Image& src, const FlowField& flow,
                                const Image& upstream);
SampleGrad grid_sample_backward(const Image& src, const FlowField& flow,
                                const Image& upstream, const VarianceMap& var,
                                SampleMode mode);

// Chain-rule helper: converts a pixel-unit coordinate gradient to the
// normalized units of the flow parameters.
Vec2 normalized_coord_grad(Vec2 d_px, int src_height, int src_width);

// Per-cell Euclidean norm of d_coords_px with upstream identically 1,
// row-major over the flow grid. The collapse diagnostic.
std::vector<double> coord_grad_norm_map(const Image& src, const FlowField& flow,
                                        const VarianceMap* var, SampleMode mode);

// Point-list variants used by mesh texturing: xy holds n (x, y) pixel-space
// pairs, out receives n*channels samples.
void sample_points(const Image& src, std::span<const double> xy,
                   std::span<double> out);

// upstream has n*channels entries; d_xy (2n, pixel units) and d_image may be
// null to skip that output. d_image must be zero-initialized src-shaped.
void sample_points_backward(const Image& src, std::span<const double> xy,
                            std::span<const double> upstream, double* d_xy,
                            Image* d_image);

}  // namespace texflow
