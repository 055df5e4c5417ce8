#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "texflow/losses.hpp"
#include "texflow/optim.hpp"
#include "texflow/sampler.hpp"

namespace texflow {

// One knob set shared by all experiment drivers; each driver reads the
// subset it cares about. Loaded from JSON by key (missing keys keep their
// defaults, unknown keys are rejected).
struct ExperimentConfig {
  uint64_t seed = 0;

  // flow recovery scene
  int image_height = 33;
  int image_width = 33;
  int flow_height = 24;
  int flow_width = 24;
  double shift_x_px = 3.2;    // ground-truth warp, pixels
  double shift_y_px = -2.4;
  double noise_amp = 0.02;    // per-pixel texture amplitude; makes matches unique
  int iterations = 2000;
  double lr_flow = 0.02;
  double lr_var = 0.08;
  std::string mode = "all";   // baseline | replace | gradient-only | all
  std::string rec_norm = "l2";
  std::string var_update = "steer";  // steer | recon
  double pseudo_quantum = 0.25;      // coarseness of the synthetic rough labels
  double var_lo = 0.25;
  double var_hi = 4.0;
  double lambda_var = 2e-5;
  bool init_with_gt = false;

  // silhouette fitting
  int render_height = 32;
  int render_width = 32;
  int icosphere_level = 2;
  int n_views = 4;
  int random_views = 2;
  double cam_scale = 0.55;
  double sigma = 0.01;
  double lr_shape = 0.01;
  bool self_target = false;  // fit the template against its own silhouettes

  // loss weights
  double w_iou = 1.0;
  double w_deform = 0.05;
  double w_lap = 0.1;
  double w_flat = 0.01;
  double w_rec = 1.0;
  double w_align = 0.0;
  double w_part = 0.0;
  double w_prob = 0.0;

  // image-set comparison
  int fid_grid = 4;
};

// Parses and validates; throws ConfigError (unknown key, bad value) or
// FormatError (not JSON). Sizes must be >= 2, iterations >= 1, rates and
// sigma positive, weights >= 0, bounds 0 < lo < hi.
ExperimentConfig load_config(const std::string& json_path);
ExperimentConfig parse_config(const std::string& json_text);
void validate_config(const ExperimentConfig& cfg);

// Canonical serialization (sorted keys) of every field; the FNV-1a 64 hash
// of it stamps each CSV so outputs are traceable to their exact settings.
std::string config_canonical(const ExperimentConfig& cfg);
uint64_t config_hash(const ExperimentConfig& cfg);

SampleMode parse_mode(const std::string& name);
const char* mode_name(SampleMode mode);

// ---- collapse demo -------------------------------------------------------
// Uniform 8x8 source sampled at exact interior cell centers. Writes
// metrics.csv with the mean/max coordinate-gradient norm (upstream == 1)
// for: baseline, gradient-only with a column-ramp variance, replace with the
// same ramp, and gradient-only with variance == 1.
struct CollapseResult {
  double baseline_mean = 0.0;
  double ramp_gradient_only_mean = 0.0;
  double ramp_replace_mean = 0.0;
  double identity_mean = 0.0;
};
CollapseResult exp_collapse(const ExperimentConfig& cfg, const std::string& out_dir);

// ---- flow recovery -------------------------------------------------------
// Synthetic scene: flat background with a few small landmarks; the target is
// the source warped by a known constant shift. Each arm optimizes its flow
// (and, in the adaptive modes, a bounded per-pixel variance) against the
// reconstruction loss. Writes metrics.csv (per-arm, per-iteration) and
// PNG snapshots. rec_plain is the reconstruction error of the unmodulated
// forward for every arm, so arms are directly comparable; epe_px is the mean
// pixel distance to the ground-truth sampling positions.
struct FlowArmResult {
  std::string mode;
  double init_rec_plain = 0.0;
  double init_epe_px = 0.0;
  double final_rec = 0.0;        // the loss the arm actually optimizes
  double final_rec_plain = 0.0;
  double final_epe_px = 0.0;
};
struct FlowRecoverResult {
  std::vector<FlowArmResult> arms;
  const FlowArmResult& arm(const std::string& mode) const;
};
FlowRecoverResult exp_flow_recover(const ExperimentConfig& cfg,
                                   const std::string& out_dir);

// ---- silhouette fitting --------------------------------------------------
// Deforms an icosphere template to match the soft silhouettes of an
// ellipsoid (axes 1.0, 0.7, 0.7) seen from n_views fixed azimuths, under the
// shape regularizers. Writes metrics.csv, per-view PNGs, and the
// final mesh as OBJ. view_iou holds the final hard-mask IOU per fixed view;
// random_view_iou the same for freshly sampled azimuths never optimized for.
struct SilhouetteFitResult {
  std::vector<double> view_iou;
  double mean_iou = 0.0;
  std::vector<double> random_view_iou;
  double final_total_loss = 0.0;
};
SilhouetteFitResult exp_silhouette_fit(const ExperimentConfig& cfg,
                                       const std::string& out_dir);

// ---- image-set comparison -------------------------------------------------
// Patch-statistics features -> Frechet distance between the two sets; when
// the sets pair up 1:1 (equal counts, sorted order) also mean pairwise SSIM.
// Each set needs at least two images.
struct FidResult {
  double fid = 0.0;
  int n_a = 0;
  int n_b = 0;
  int feature_dim = 0;
  bool has_ssim = false;
  double ssim_mean = 0.0;
  std::vector<double> pair_ssim;
};
FidResult exp_fid(const ExperimentConfig& cfg, const std::vector<std::string>& a_paths,
                  const std::vector<std::string>& b_paths, const std::string& out_dir);

// Sorted *.png paths directly inside dir; IoError if dir is unreadable.
std::vector<std::string> list_pngs(const std::string& dir);

// Backward of the modulated coordinate gradients w.r.t. the variance map:
// given dJ/d(g_px) per flow cell (g_px being the pixel-unit coordinate
// gradients grid_sample_backward computes from U * var), accumulates dJ/dvar.
// This is the inner step of the "steer" variance update; exposed so its
// finite-difference oracle can exercise exactly the shipped code path.
void modulated_coord_grad_var_backward(const Image& src, const FlowField& flow,
                                       const Image& upstream,
                                       const std::vector<Vec2>& d_gpx,
                                       std::vector<double>& d_var);

}  // namespace texflow
