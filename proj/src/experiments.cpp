#include "texflow/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "texflow/error.hpp"
#include "texflow/io.hpp"
#include "texflow/metrics.hpp"
#include "texflow/rng.hpp"

namespace texflow {

namespace {

using nlohmann::json;

constexpr char kVersion[] = TEXFLOW_VERSION_STRING;

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["image_height"] = c.image_height;
  j["image_width"] = c.image_width;
  j["flow_height"] = c.flow_height;
  j["flow_width"] = c.flow_width;
  j["shift_x_px"] = c.shift_x_px;
  j["shift_y_px"] = c.shift_y_px;
  j["noise_amp"] = c.noise_amp;
  j["iterations"] = c.iterations;
  j["lr_flow"] = c.lr_flow;
  j["lr_var"] = c.lr_var;
  j["mode"] = c.mode;
  j["rec_norm"] = c.rec_norm;
  j["var_update"] = c.var_update;
  j["pseudo_quantum"] = c.pseudo_quantum;
  j["var_lo"] = c.var_lo;
  j["var_hi"] = c.var_hi;
  j["lambda_var"] = c.lambda_var;
  j["init_with_gt"] = c.init_with_gt;
  j["render_height"] = c.render_height;
  j["render_width"] = c.render_width;
  j["icosphere_level"] = c.icosphere_level;
  j["n_views"] = c.n_views;
  j["random_views"] = c.random_views;
  j["cam_scale"] = c.cam_scale;
  j["sigma"] = c.sigma;
  j["lr_shape"] = c.lr_shape;
  j["self_target"] = c.self_target;
  j["w_iou"] = c.w_iou;
  j["w_deform"] = c.w_deform;
  j["w_lap"] = c.w_lap;
  j["w_flat"] = c.w_flat;
  j["w_rec"] = c.w_rec;
  j["w_align"] = c.w_align;
  j["w_part"] = c.w_part;
  j["w_prob"] = c.w_prob;
  j["fid_grid"] = c.fid_grid;
  return j;
}

double want_number(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  return v.get<double>();
}

int want_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
  return v.get<int>();
}

uint64_t want_u64(const json& v, const std::string& key) {
  if (!v.is_number_unsigned() && !v.is_number_integer())
    throw ConfigError("config key '" + key + "' must be a non-negative integer");
  if (v.is_number_integer() && v.get<int64_t>() < 0)
    throw ConfigError("config key '" + key + "' must be a non-negative integer");
  return v.get<uint64_t>();
}

bool want_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("config key '" + key + "' must be a boolean");
  return v.get<bool>();
}

std::string want_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
  return v.get<std::string>();
}

void require(bool ok, const char* msg) {
  if (!ok) throw ConfigError(msg);
}

RecNorm parse_rec_norm(const std::string& s) {
  if (s == "l1") return RecNorm::kL1;
  if (s == "l2") return RecNorm::kL2;
  throw ConfigError("rec_norm must be 'l1' or 'l2', got '" + s + "'");
}

// raw value whose bounded variance is exactly 1 (the neutral multiplier).
double neutral_raw(const VarianceBounds& b) {
  const double p = (1.0 - b.lo) / (b.hi - b.lo);
  return std::log(p / (1.0 - p));
}

std::vector<std::string> cells(std::initializer_list<std::string> v) { return v; }

}  // namespace

SampleMode parse_mode(const std::string& name) {
  if (name == "baseline") return SampleMode::kBaseline;
  if (name == "replace") return SampleMode::kReplace;
  if (name == "gradient-only") return SampleMode::kGradientOnly;
  throw ConfigError("mode must be baseline | replace | gradient-only, got '" + name + "'");
}

const char* mode_name(SampleMode mode) {
  switch (mode) {
    case SampleMode::kBaseline: return "baseline";
    case SampleMode::kReplace: return "replace";
    case SampleMode::kGradientOnly: return "gradient-only";
  }
  return "?";
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("config root must be a JSON object");

  ExperimentConfig c;
  for (const auto& [key, val] : j.items()) {
    if (key == "seed") c.seed = want_u64(val, key);
    else if (key == "image_height") c.image_height = want_int(val, key);
    else if (key == "image_width") c.image_width = want_int(val, key);
    else if (key == "flow_height") c.flow_height = want_int(val, key);
    else if (key == "flow_width") c.flow_width = want_int(val, key);
    else if (key == "shift_x_px") c.shift_x_px = want_number(val, key);
    else if (key == "shift_y_px") c.shift_y_px = want_number(val, key);
    else if (key == "noise_amp") c.noise_amp = want_number(val, key);
    else if (key == "iterations") c.iterations = want_int(val, key);
    else if (key == "lr_flow") c.lr_flow = want_number(val, key);
    else if (key == "lr_var") c.lr_var = want_number(val, key);
    else if (key == "mode") c.mode = want_string(val, key);
    else if (key == "rec_norm") c.rec_norm = want_string(val, key);
    else if (key == "var_update") c.var_update = want_string(val, key);
    else if (key == "pseudo_quantum") c.pseudo_quantum = want_number(val, key);
    else if (key == "var_lo") c.var_lo = want_number(val, key);
    else if (key == "var_hi") c.var_hi = want_number(val, key);
    else if (key == "lambda_var") c.lambda_var = want_number(val, key);
    else if (key == "init_with_gt") c.init_with_gt = want_bool(val, key);
    else if (key == "render_height") c.render_height = want_int(val, key);
    else if (key == "render_width") c.render_width = want_int(val, key);
    else if (key == "icosphere_level") c.icosphere_level = want_int(val, key);
    else if (key == "n_views") c.n_views = want_int(val, key);
    else if (key == "random_views") c.random_views = want_int(val, key);
    else if (key == "cam_scale") c.cam_scale = want_number(val, key);
    else if (key == "sigma") c.sigma = want_number(val, key);
    else if (key == "lr_shape") c.lr_shape = want_number(val, key);
    else if (key == "self_target") c.self_target = want_bool(val, key);
    else if (key == "w_iou") c.w_iou = want_number(val, key);
    else if (key == "w_deform") c.w_deform = want_number(val, key);
    else if (key == "w_lap") c.w_lap = want_number(val, key);
    else if (key == "w_flat") c.w_flat = want_number(val, key);
    else if (key == "w_rec") c.w_rec = want_number(val, key);
    else if (key == "w_align") c.w_align = want_number(val, key);
    else if (key == "w_part") c.w_part = want_number(val, key);
    else if (key == "w_prob") c.w_prob = want_number(val, key);
    else if (key == "fid_grid") c.fid_grid = want_int(val, key);
    else throw ConfigError("unknown config key '" + key + "'");
  }
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::string& json_path) {
  std::ifstream in(json_path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + json_path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

void validate_config(const ExperimentConfig& c) {
  require(c.image_height >= 2 && c.image_width >= 2, "image size must be >= 2");
  require(c.flow_height >= 2 && c.flow_width >= 2, "flow size must be >= 2");
  require(c.render_height >= 2 && c.render_width >= 2, "render size must be >= 2");
  require(c.iterations >= 1, "iterations must be >= 1");
  require(c.lr_flow > 0.0 && c.lr_var > 0.0 && c.lr_shape > 0.0,
          "learning rates must be positive");
  require(c.sigma > 0.0, "sigma must be positive");
  require(c.pseudo_quantum > 0.0, "pseudo_quantum must be positive");
  require(c.var_lo > 0.0 && c.var_lo < 1.0 && c.var_hi > 1.0,
          "variance bounds must satisfy 0 < lo < 1 < hi");
  require(c.lambda_var >= 0.0, "lambda_var must be >= 0");
  require(c.noise_amp >= 0.0, "noise_amp must be >= 0");
  for (double w : {c.w_iou, c.w_deform, c.w_lap, c.w_flat, c.w_rec, c.w_align, c.w_part,
                   c.w_prob})
    require(w >= 0.0, "loss weights must be >= 0");
  require(c.icosphere_level >= 0 && c.icosphere_level <= 6,
          "icosphere_level must be in [0, 6]");
  require(c.n_views >= 1, "n_views must be >= 1");
  require(c.random_views >= 0, "random_views must be >= 0");
  require(c.cam_scale > 0.0, "cam_scale must be positive");
  require(c.fid_grid >= 1, "fid_grid must be >= 1");
  if (c.mode != "all") parse_mode(c.mode);
  parse_rec_norm(c.rec_norm);
  require(c.var_update == "steer" || c.var_update == "recon",
          "var_update must be 'steer' or 'recon'");
}

std::string config_canonical(const ExperimentConfig& c) {
  // nlohmann keeps object keys sorted, so dump() is canonical.
  return config_to_json(c).dump(2);
}

uint64_t config_hash(const ExperimentConfig& c) {
  const std::string s = config_canonical(c);
  uint64_t h = 14695981039346656037ull;  // FNV-1a 64
  for (unsigned char b : s) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

// ---------------------------------------------------------------------------
// collapse demo

CollapseResult exp_collapse(const ExperimentConfig& cfg, const std::string& out_dir) {
  ensure_dir(out_dir);
  write_file_atomic(out_dir + "/config.json", config_canonical(cfg) + "\n");

  // 8x8 uniform source sampled at the exact centers of its interior cells:
  // identity_flow(7, 7) lands on x, y in {0.5, 1.5, ..., 6.5}.
  const int n = 8;
  Image src(n, n, 1, 0.5);
  const FlowField flow = identity_flow(n - 1, n - 1);

  VarianceMap ramp(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) ramp.at(y, x) = 1.0 + static_cast<double>(x) / (n - 1);
  VarianceMap ones(n, n, 1.0);

  struct Row {
    const char* variance;
    SampleMode mode;
    const VarianceMap* var;
  };
  const Row rows[] = {
      {"none", SampleMode::kBaseline, nullptr},
      {"column-ramp", SampleMode::kGradientOnly, &ramp},
      {"column-ramp", SampleMode::kReplace, &ramp},
      {"ones", SampleMode::kGradientOnly, &ones},
  };

  CollapseResult res;
  CsvWriter csv("variance,mode,mean_grad_norm,max_grad_norm", config_hash(cfg), kVersion);
  for (const Row& r : rows) {
    const std::vector<double> norms = coord_grad_norm_map(src, flow, r.var, r.mode);
    double mean = 0.0, mx = 0.0;
    for (double v : norms) {
      mean += v;
      mx = std::max(mx, v);
    }
    mean /= static_cast<double>(norms.size());
    csv.row(cells({r.variance, mode_name(r.mode), csv_cell(mean), csv_cell(mx)}));
    if (r.mode == SampleMode::kBaseline) res.baseline_mean = mean;
    else if (r.var == &ramp && r.mode == SampleMode::kGradientOnly)
      res.ramp_gradient_only_mean = mean;
    else if (r.var == &ramp) res.ramp_replace_mean = mean;
    else res.identity_mean = mean;
  }
  csv.write(out_dir + "/metrics.csv");
  return res;
}

// ---------------------------------------------------------------------------
// flow recovery

namespace {

// Flat background with a few Gaussian landmarks, jittered sub-pixel by the
// seed. Landmarks sit in the central window so both the initial and the
// shifted sampling positions see them.
Image make_scene(int h, int w, double noise_amp, Rng& rng) {
  Image img(h, w, 1, 0.3);
  const double frac[4][2] = {{0.32, 0.36}, {0.68, 0.30}, {0.36, 0.70}, {0.66, 0.66}};
  const double amp[4] = {0.65, -0.27, 0.5, -0.22};
  const double sigma_px = 1.8;
  for (int b = 0; b < 4; ++b) {
    const double cx = frac[b][0] * (w - 1) + rng.uniform(-0.5, 0.5);
    const double cy = frac[b][1] * (h - 1) + rng.uniform(-0.5, 0.5);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        img.at(y, x, 0) += amp[b] * std::exp(-d2 / (2.0 * sigma_px * sigma_px));
      }
  }
  // Faint texture: every source position matches the target uniquely, so a
  // misplaced cell keeps a nonzero residual instead of aliasing onto the
  // flat background. Its local slopes are sub-pixel traps for plain descent.
  for (double& v : img.data) v += noise_amp * rng.uniform(-1.0, 1.0);
  return img;
}

FlowField unpack_flow(std::span<const double> theta, int h, int w) {
  FlowField f(h, w);
  for (size_t i = 0; i < f.size(); ++i) f.coords[i] = {theta[2 * i], theta[2 * i + 1]};
  return f;
}

double mean_epe_px(const FlowField& flow, const FlowField& gt, int src_h, int src_w) {
  double acc = 0.0;
  for (size_t i = 0; i < flow.size(); ++i) {
    const double dx = (flow.coords[i].x - gt.coords[i].x) * 0.5 * (src_w - 1);
    const double dy = (flow.coords[i].y - gt.coords[i].y) * 0.5 * (src_h - 1);
    acc += std::sqrt(dx * dx + dy * dy);
  }
  return acc / static_cast<double>(flow.size());
}

}  // namespace

// Mirrors the sampler's corner geometry: a clamped axis has g identically
// zero, so it contributes nothing.
void modulated_coord_grad_var_backward(const Image& src, const FlowField& flow,
                                       const Image& upstream,
                                       const std::vector<Vec2>& d_gpx,
                                       std::vector<double>& d_var) {
  const int h = src.height, w = src.width, c = src.channels;
  for (size_t i = 0; i < flow.size(); ++i) {
    const double xr = denormalize(flow.coords[i].x, w);
    const double yr = denormalize(flow.coords[i].y, h);
    const SampleCell s = locate_cell(xr, yr, h, w);
    for (int ch = 0; ch < c; ++ch) {
      const double up = upstream.data[i * c + ch];
      const double s00 = src.at(s.y0, s.x0, ch), s01 = src.at(s.y0, s.x1, ch);
      const double s10 = src.at(s.y1, s.x0, ch), s11 = src.at(s.y1, s.x1, ch);
      if (!s.clamped_x) {
        const double gx = d_gpx[i].x * up;
        d_var[static_cast<size_t>(s.y0) * w + s.x0] -= gx * (1.0 - s.fy) * s00;
        d_var[static_cast<size_t>(s.y0) * w + s.x1] += gx * (1.0 - s.fy) * s01;
        d_var[static_cast<size_t>(s.y1) * w + s.x0] -= gx * s.fy * s10;
        d_var[static_cast<size_t>(s.y1) * w + s.x1] += gx * s.fy * s11;
      }
      if (!s.clamped_y) {
        const double gy = d_gpx[i].y * up;
        d_var[static_cast<size_t>(s.y0) * w + s.x0] -= gy * (1.0 - s.fx) * s00;
        d_var[static_cast<size_t>(s.y1) * w + s.x0] += gy * (1.0 - s.fx) * s10;
        d_var[static_cast<size_t>(s.y0) * w + s.x1] -= gy * s.fx * s01;
        d_var[static_cast<size_t>(s.y1) * w + s.x1] += gy * s.fx * s11;
      }
    }
  }
}

namespace {

Image variance_to_image(const VarianceMap& var, const VarianceBounds& b) {
  Image img(var.height, var.width, 1);
  for (size_t i = 0; i < var.data.size(); ++i)
    img.data[i] = (var.data[i] - b.lo) / (b.hi - b.lo);
  return img;
}

}  // namespace

const FlowArmResult& FlowRecoverResult::arm(const std::string& mode) const {
  for (const FlowArmResult& a : arms)
    if (a.mode == mode) return a;
  throw ConfigError("no arm ran with mode '" + mode + "'");
}

FlowRecoverResult exp_flow_recover(const ExperimentConfig& cfg, const std::string& out_dir) {
  ensure_dir(out_dir);
  write_file_atomic(out_dir + "/config.json", config_canonical(cfg) + "\n");

  const int H = cfg.image_height, W = cfg.image_width;
  const int FH = cfg.flow_height, FW = cfg.flow_width;
  const RecNorm norm = parse_rec_norm(cfg.rec_norm);
  const VarianceBounds bounds{cfg.var_lo, cfg.var_hi};

  // Keep every ground-truth sampling position strictly inside the image so
  // recovery is unambiguous (clamped samples would make whole coordinate
  // ranges equivalent).
  const double margin = std::max(std::abs(cfg.shift_x_px), std::abs(cfg.shift_y_px)) + 1.5;
  require(2.0 * margin + 2.0 < std::min(W, H) - 1,
          "shift too large for the image size");

  Rng scene_rng(cfg.seed);
  const Image src = make_scene(H, W, cfg.noise_amp, scene_rng);

  // Base flow: a windowed identity, pixel positions margin..extent-1-margin.
  FlowField base(FH, FW), gt(FH, FW);
  for (int ty = 0; ty < FH; ++ty)
    for (int tx = 0; tx < FW; ++tx) {
      const double px = margin + (tx + 0.5) * (W - 1 - 2.0 * margin) / FW;
      const double py = margin + (ty + 0.5) * (H - 1 - 2.0 * margin) / FH;
      base.at(ty, tx) = {2.0 * px / (W - 1) - 1.0, 2.0 * py / (H - 1) - 1.0};
      gt.at(ty, tx) = {base.at(ty, tx).x + 2.0 * cfg.shift_x_px / (W - 1),
                       base.at(ty, tx).y + 2.0 * cfg.shift_y_px / (H - 1)};
    }
  const Image target = grid_sample(src, gt);

  // Synthetic rough labels: the ground truth snapped to a coarse lattice.
  FlowField pseudo(FH, FW);
  for (size_t i = 0; i < gt.size(); ++i)
    pseudo.coords[i] = {std::round(gt.coords[i].x / cfg.pseudo_quantum) * cfg.pseudo_quantum,
                        std::round(gt.coords[i].y / cfg.pseudo_quantum) * cfg.pseudo_quantum};

  save_image(out_dir + "/source.png", src);
  save_image(out_dir + "/target.png", target);

  std::vector<SampleMode> arms;
  if (cfg.mode == "all")
    arms = {SampleMode::kBaseline, SampleMode::kReplace, SampleMode::kGradientOnly};
  else
    arms = {parse_mode(cfg.mode)};

  CsvWriter csv("mode,iteration,rec,rec_plain,epe_px,var_mean", config_hash(cfg), kVersion);
  FlowRecoverResult result;

  const size_t T = static_cast<size_t>(FH) * FW;
  for (SampleMode mode : arms) {
    std::vector<double> theta(2 * T);
    const FlowField& init = cfg.init_with_gt ? gt : base;
    for (size_t i = 0; i < T; ++i) {
      theta[2 * i] = init.coords[i].x;
      theta[2 * i + 1] = init.coords[i].y;
    }
    std::vector<double> raw(static_cast<size_t>(H) * W, neutral_raw(bounds));

    AdamState flow_state, var_state;
    const AdamConfig flow_opt{cfg.lr_flow, 0.9, 0.999, 1e-8};
    const AdamConfig var_opt{cfg.lr_var, 0.9, 0.999, 1e-8};

    FlowArmResult arm;
    arm.mode = mode_name(mode);
    Image final_recon;
    VarianceMap final_var;

    for (int t = 0; t <= cfg.iterations; ++t) {
      const FlowField flow = unpack_flow(theta, FH, FW);
      const VarianceMap var = bound_variance_map(raw, H, W, bounds);

      const Image out_plain = grid_sample(src, flow);
      Image d_out;
      double rec, rec_plain;
      if (mode == SampleMode::kReplace) {
        const Image out = grid_sample(src, flow, var, mode);
        rec = rec_loss(out, target, norm, &d_out);
        rec_plain = rec_loss(out_plain, target, norm, nullptr);
      } else {
        rec = rec_loss(out_plain, target, norm, &d_out);
        rec_plain = rec;
      }
      const double epe = mean_epe_px(flow, gt, H, W);
      double var_mean = 0.0;
      for (double v : var.data) var_mean += v;
      var_mean /= static_cast<double>(var.data.size());

      csv.row(cells({arm.mode, csv_cell(t), csv_cell(cfg.w_rec * rec),
                     csv_cell(cfg.w_rec * rec_plain), csv_cell(epe), csv_cell(var_mean)}));
      if (t == 0) {
        arm.init_rec_plain = cfg.w_rec * rec_plain;
        arm.init_epe_px = epe;
      }
      if (t == cfg.iterations) {
        arm.final_rec = cfg.w_rec * rec;
        arm.final_rec_plain = cfg.w_rec * rec_plain;
        arm.final_epe_px = epe;
        final_recon = out_plain;
        final_var = var;
        break;
      }

      // Flow step: reconstruction gradient through the sampler, chained to
      // the normalized flow parameters.
      const SampleGrad g = grid_sample_backward(src, flow, d_out, var, mode);
      std::vector<double> d_theta(2 * T);
      for (size_t i = 0; i < T; ++i) {
        const Vec2 gn = normalized_coord_grad(g.d_coords_px[i], H, W);
        d_theta[2 * i] = cfg.w_rec * gn.x;
        d_theta[2 * i + 1] = cfg.w_rec * gn.y;
      }

      // Variance step (adaptive modes only).
      if (mode != SampleMode::kBaseline) {
        std::vector<double> d_raw(raw.size(), 0.0);
        std::vector<double> d_var(raw.size(), 0.0);
        if (cfg.var_update == "recon") {
          // Variance minimizes the modulated reconstruction directly:
          // dL/dvar(p) = sum_c U(p,c) * dL/dU'(p,c).
          Image d_out_m;
          if (mode == SampleMode::kReplace) {
            d_out_m = d_out;
          } else {
            const Image out_m = grid_sample(src, flow, var, SampleMode::kReplace);
            rec_loss(out_m, target, norm, &d_out_m);
          }
          // Gradient-only scatter gives unscaled bilinear weights, i.e.
          // dL/dU' numerically.
          const SampleGrad gm =
              grid_sample_backward(src, flow, d_out_m, var, SampleMode::kGradientOnly);
          for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
              double acc = 0.0;
              for (int ch = 0; ch < src.channels; ++ch)
                acc += src.at(y, x, ch) * gm.d_image.at(y, x, ch);
              d_var[static_cast<size_t>(y) * W + x] = cfg.w_rec * acc;
            }
        } else {
          // Steer: shape the variance so the next flow step lands near the
          // rough labels. One-step surrogate theta' = theta - lr * g(var),
          // J = mean ||theta' - pseudo||^2, differentiated through g.
          std::vector<Vec2> d_gpx(T);
          for (size_t i = 0; i < T; ++i) {
            const double tnx = theta[2 * i] - cfg.lr_flow * d_theta[2 * i];
            const double tny = theta[2 * i + 1] - cfg.lr_flow * d_theta[2 * i + 1];
            // dJ/dg_px = dJ/dtheta' * dtheta'/dg_norm * dg_norm/dg_px
            const double common = -cfg.lr_flow * 2.0 / static_cast<double>(T) * cfg.w_rec;
            d_gpx[i].x = common * (tnx - pseudo.coords[i].x) * 0.5 * (W - 1);
            d_gpx[i].y = common * (tny - pseudo.coords[i].y) * 0.5 * (H - 1);
          }
          modulated_coord_grad_var_backward(src, flow, d_out, d_gpx, d_var);
        }
        for (size_t i = 0; i < raw.size(); ++i)
          d_raw[i] = d_var[i] * bound_variance_grad(raw[i], bounds);
        variance_regularizer(raw, bounds, cfg.lambda_var, d_raw);
        adam_step(raw, d_raw, var_state, var_opt);
      }

      adam_step(theta, d_theta, flow_state, flow_opt);
    }

    save_image(out_dir + "/recon_" + arm.mode + ".png", final_recon);
    if (mode != SampleMode::kBaseline)
      save_image(out_dir + "/var_" + arm.mode + ".png", variance_to_image(final_var, bounds));
    result.arms.push_back(arm);
  }

  csv.write(out_dir + "/metrics.csv");
  return result;
}

// ---------------------------------------------------------------------------
// silhouette fitting

namespace {

Mesh scaled_mesh(const Mesh& m, double ax, double ay, double az) {
  Mesh out = m;
  for (Vec3& v : out.vertices) {
    v.x *= ax;
    v.y *= ay;
    v.z *= az;
  }
  return out;
}

Camera azimuth_camera(double azimuth, double scale) {
  Camera cam;
  cam.scale = scale;
  cam.quat = {std::cos(azimuth / 2.0), 0.0, std::sin(azimuth / 2.0), 0.0};
  return cam;
}

}  // namespace

SilhouetteFitResult exp_silhouette_fit(const ExperimentConfig& cfg,
                                       const std::string& out_dir) {
  ensure_dir(out_dir);
  write_file_atomic(out_dir + "/config.json", config_canonical(cfg) + "\n");

  const int H = cfg.render_height, W = cfg.render_width;
  const Mesh tmpl = icosphere(cfg.icosphere_level);
  const Mesh target_mesh =
      cfg.self_target ? tmpl : scaled_mesh(tmpl, 1.0, 0.7, 0.7);
  const size_t N = tmpl.vertices.size();

  std::vector<Camera> cams;
  std::vector<Image> targets;
  for (int k = 0; k < cfg.n_views; ++k) {
    const double az = 2.0 * std::numbers::pi * k / cfg.n_views;
    cams.push_back(azimuth_camera(az, cfg.cam_scale));
    targets.push_back(soft_silhouette(target_mesh, cams.back(), H, W, cfg.sigma));
    save_image(out_dir + "/target_" + std::to_string(k) + ".png", targets.back());
  }

  std::vector<double> params(3 * N, 0.0);
  AdamState state;
  const AdamConfig opt{cfg.lr_shape, 0.9, 0.999, 1e-8};

  // Long format so the iteration traces and the final view scores share one
  // file: series in {total, iou_sum, deform, laplacian, flatness,
  // mask_iou_fixed, mask_iou_random}.
  CsvWriter csv("series,step,value", config_hash(cfg), kVersion);
  SilhouetteFitResult res;
  Mesh fitted = tmpl;

  for (int t = 0; t <= cfg.iterations; ++t) {
    Deformation delta(N);
    for (size_t i = 0; i < N; ++i)
      delta[i] = {params[3 * i], params[3 * i + 1], params[3 * i + 2]};
    fitted = apply_deform(tmpl, delta);

    const bool stepping = t < cfg.iterations;
    std::vector<double> grad(3 * N, 0.0);
    auto add_vertex_grad = [&](const std::vector<Vec3>& g, double w) {
      for (size_t i = 0; i < N; ++i) {
        grad[3 * i] += w * g[i].x;
        grad[3 * i + 1] += w * g[i].y;
        grad[3 * i + 2] += w * g[i].z;
      }
    };

    double iou_sum = 0.0;
    for (int k = 0; k < cfg.n_views; ++k) {
      const Image sil = soft_silhouette(fitted, cams[k], H, W, cfg.sigma);
      Image d_sil;
      iou_sum += iou_loss(targets[k], sil, stepping ? &d_sil : nullptr);
      if (stepping)
        add_vertex_grad(
            soft_silhouette_backward(fitted, cams[k], H, W, cfg.sigma, d_sil), cfg.w_iou);
    }

    std::vector<Vec3> d_def(N), d_lap(N), d_flat(N);
    const double deform = deform_loss(delta, stepping ? &d_def : nullptr);
    const double lap = laplacian_loss(fitted, stepping ? &d_lap : nullptr);
    const double flat = flatness_loss(fitted, stepping ? &d_flat : nullptr);
    const double total =
        cfg.w_iou * iou_sum + cfg.w_deform * deform + cfg.w_lap * lap + cfg.w_flat * flat;

    csv.row(cells({"total", csv_cell(t), csv_cell(total)}));
    csv.row(cells({"iou_sum", csv_cell(t), csv_cell(iou_sum)}));
    csv.row(cells({"deform", csv_cell(t), csv_cell(deform)}));
    csv.row(cells({"laplacian", csv_cell(t), csv_cell(lap)}));
    csv.row(cells({"flatness", csv_cell(t), csv_cell(flat)}));
    if (!stepping) {
      res.final_total_loss = total;
      break;
    }
    add_vertex_grad(d_def, cfg.w_deform);
    add_vertex_grad(d_lap, cfg.w_lap);
    add_vertex_grad(d_flat, cfg.w_flat);
    adam_step(params, grad, state, opt);
  }

  for (int k = 0; k < cfg.n_views; ++k) {
    const Image sil = soft_silhouette(fitted, cams[k], H, W, cfg.sigma);
    save_image(out_dir + "/final_" + std::to_string(k) + ".png", sil);
    const double iou = mask_iou(targets[k], sil);
    res.view_iou.push_back(iou);
    res.mean_iou += iou;
    csv.row(cells({"mask_iou_fixed", csv_cell(k), csv_cell(iou)}));
  }
  res.mean_iou /= static_cast<double>(cfg.n_views);

  Rng rng(cfg.seed);
  for (int r = 0; r < cfg.random_views; ++r) {
    const Camera cam = random_camera(rng, cfg.cam_scale);
    const Image want = soft_silhouette(target_mesh, cam, H, W, cfg.sigma);
    const Image got = soft_silhouette(fitted, cam, H, W, cfg.sigma);
    const double iou = mask_iou(want, got);
    res.random_view_iou.push_back(iou);
    csv.row(cells({"mask_iou_random", csv_cell(r), csv_cell(iou)}));
  }
  csv.write(out_dir + "/metrics.csv");

  const UVMapping uv = sphere_uv(tmpl);
  save_obj(out_dir + "/final_mesh.obj", fitted, &uv);
  return res;
}

// ---------------------------------------------------------------------------
// image-set comparison

std::vector<std::string> list_pngs(const std::string& dir) {
  std::error_code ec;
  std::filesystem::directory_iterator it(dir, ec);
  if (ec) throw IoError("cannot read directory " + dir + ": " + ec.message());
  std::vector<std::string> paths;
  for (const auto& entry : it)
    if (entry.is_regular_file() && entry.path().extension() == ".png")
      paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());
  return paths;
}

FidResult exp_fid(const ExperimentConfig& cfg, const std::vector<std::string>& a_paths,
                  const std::vector<std::string>& b_paths, const std::string& out_dir) {
  ensure_dir(out_dir);
  write_file_atomic(out_dir + "/config.json", config_canonical(cfg) + "\n");

  if (a_paths.size() < 2 || b_paths.size() < 2)
    throw DegenerateInputError("each image set needs at least two images");

  std::vector<Image> a_imgs, b_imgs;
  std::vector<std::vector<double>> a_feat, b_feat;
  for (const std::string& p : a_paths) {
    a_imgs.push_back(load_image(p));
    a_feat.push_back(patch_stats_extractor(a_imgs.back(), cfg.fid_grid));
  }
  for (const std::string& p : b_paths) {
    b_imgs.push_back(load_image(p));
    b_feat.push_back(patch_stats_extractor(b_imgs.back(), cfg.fid_grid));
  }
  if (a_feat[0].size() != b_feat[0].size())
    throw ShapeError("image sets produce different feature dimensions");

  FidResult res;
  res.n_a = static_cast<int>(a_paths.size());
  res.n_b = static_cast<int>(b_paths.size());
  res.feature_dim = static_cast<int>(a_feat[0].size());
  res.fid = frechet_distance(feature_stats(a_feat), feature_stats(b_feat));

  // Pairwise SSIM only when the sets pair 1:1 with matching shapes.
  if (a_imgs.size() == b_imgs.size()) {
    bool ok = true;
    for (size_t i = 0; i < a_imgs.size() && ok; ++i)
      ok = a_imgs[i].same_shape(b_imgs[i]) && a_imgs[i].height >= 11 &&
           a_imgs[i].width >= 11;
    if (ok) {
      res.has_ssim = true;
      for (size_t i = 0; i < a_imgs.size(); ++i) {
        res.pair_ssim.push_back(ssim(a_imgs[i], b_imgs[i]));
        res.ssim_mean += res.pair_ssim.back();
      }
      res.ssim_mean /= static_cast<double>(res.pair_ssim.size());
    }
  }

  CsvWriter csv("key,value", config_hash(cfg), kVersion);
  csv.row(cells({"n_a", csv_cell(res.n_a)}));
  csv.row(cells({"n_b", csv_cell(res.n_b)}));
  csv.row(cells({"grid", csv_cell(cfg.fid_grid)}));
  csv.row(cells({"feature_dim", csv_cell(res.feature_dim)}));
  csv.row(cells({"fid", csv_cell(res.fid)}));
  if (res.has_ssim) {
    csv.row(cells({"ssim_mean", csv_cell(res.ssim_mean)}));
    for (size_t i = 0; i < res.pair_ssim.size(); ++i)
      csv.row(cells({"ssim_pair_" + std::to_string(i), csv_cell(res.pair_ssim[i])}));
  }
  csv.write(out_dir + "/metrics.csv");
  return res;
}

}  // namespace texflow
