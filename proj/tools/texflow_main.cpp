#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "texflow/experiments.hpp"
#include "texflow/gradcheck.hpp"
#include "texflow/io.hpp"

namespace {

using namespace texflow;

struct CommonOpts {
  std::string config_path;
  uint64_t seed = 0;
  std::string out_dir;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonOpts& o, const std::string& default_out) {
  cmd->add_option("--config", o.config_path, "JSON config file")
      ->check(CLI::ExistingFile);
  o.seed_opt = cmd->add_option("--seed", o.seed, "Override the config seed");
  cmd->add_option("--out", o.out_dir, "Output directory")->default_val(default_out);
}

ExperimentConfig resolve_config(const CommonOpts& o) {
  ExperimentConfig cfg =
      o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
  if (o.seed_opt->count()) cfg.seed = o.seed;
  return cfg;
}

int run_gradcheck(int seeds) {
  const std::vector<GradCheckReport> reports = gradient_check_suite(seeds);
  bool all_pass = true;
  std::printf("%-32s %-14s %-10s %s\n", "case", "max_rel_err", "tolerance", "status");
  for (const GradCheckReport& r : reports) {
    std::printf("%-32s %-14.3e %-10.0e %s\n", r.name.c_str(), r.max_rel_err, r.tolerance,
                r.pass ? "ok" : "FAIL");
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "texflow: differentiable bilinear sampling, soft rasterization, and "
      "reconstruction losses"};
  app.require_subcommand(1);

  CLI::App* collapse = app.add_subcommand(
      "collapse", "Coordinate-gradient norms on a uniform image, with and "
                  "without variance modulation");
  CommonOpts collapse_opts;
  add_common(collapse, collapse_opts, "out/collapse");

  CLI::App* flow = app.add_subcommand(
      "flow-recover", "Recover a known warp by optimizing a flow field "
                      "against the reconstruction loss");
  CommonOpts flow_opts;
  add_common(flow, flow_opts, "out/flow-recover");
  std::string flow_mode;
  CLI::Option* mode_opt =
      flow->add_option("--mode", flow_mode,
                       "Arm to run: baseline | replace | gradient-only | all");

  CLI::App* silfit = app.add_subcommand(
      "silhouette-fit", "Deform a sphere template to match multi-view soft "
                        "silhouettes of an ellipsoid");
  CommonOpts silfit_opts;
  add_common(silfit, silfit_opts, "out/silhouette-fit");

  CLI::App* fid = app.add_subcommand(
      "fid", "Frechet distance (and pairwise SSIM when sets pair up) between "
             "two directories of PNGs");
  CommonOpts fid_opts;
  add_common(fid, fid_opts, "out/fid");
  std::string a_dir, b_dir;
  int grid = 0;
  fid->add_option("--a", a_dir, "First image directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  fid->add_option("--b", b_dir, "Second image directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  CLI::Option* grid_opt =
      fid->add_option("--grid", grid, "Patch grid for the feature extractor");

  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "Check every analytic gradient against central differences");
  int gc_seeds = 3;
  gradcheck->add_option("--seeds", gc_seeds, "Randomized inputs per case")
      ->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(collapse)) {
      const ExperimentConfig cfg = resolve_config(collapse_opts);
      const CollapseResult r = exp_collapse(cfg, collapse_opts.out_dir);
      std::printf("baseline mean grad norm:      %s\n",
                  format_real(r.baseline_mean).c_str());
      std::printf("ramp gradient-only mean norm: %s\n",
                  format_real(r.ramp_gradient_only_mean).c_str());
      std::printf("ramp replace mean norm:       %s\n",
                  format_real(r.ramp_replace_mean).c_str());
      std::printf("variance==1 mean norm:        %s\n",
                  format_real(r.identity_mean).c_str());
      std::printf("wrote %s/metrics.csv\n", collapse_opts.out_dir.c_str());
    } else if (app.got_subcommand(flow)) {
      ExperimentConfig cfg = resolve_config(flow_opts);
      if (mode_opt->count()) cfg.mode = flow_mode;
      validate_config(cfg);
      const FlowRecoverResult r = exp_flow_recover(cfg, flow_opts.out_dir);
      for (const FlowArmResult& a : r.arms)
        std::printf("%-14s rec %-12.6g epe_px %-12.6g (init rec %.6g, epe %.6g)\n",
                    a.mode.c_str(), a.final_rec_plain, a.final_epe_px, a.init_rec_plain,
                    a.init_epe_px);
      std::printf("wrote %s/metrics.csv\n", flow_opts.out_dir.c_str());
    } else if (app.got_subcommand(silfit)) {
      const ExperimentConfig cfg = resolve_config(silfit_opts);
      const SilhouetteFitResult r = exp_silhouette_fit(cfg, silfit_opts.out_dir);
      for (size_t k = 0; k < r.view_iou.size(); ++k)
        std::printf("view %zu mask IOU: %.4f\n", k, r.view_iou[k]);
      for (size_t k = 0; k < r.random_view_iou.size(); ++k)
        std::printf("random view %zu mask IOU: %.4f\n", k, r.random_view_iou[k]);
      std::printf("mean fixed-view mask IOU: %.4f\n", r.mean_iou);
      std::printf("wrote %s/metrics.csv\n", silfit_opts.out_dir.c_str());
    } else if (app.got_subcommand(fid)) {
      ExperimentConfig cfg = resolve_config(fid_opts);
      if (grid_opt->count()) cfg.fid_grid = grid;
      validate_config(cfg);
      const FidResult r =
          exp_fid(cfg, list_pngs(a_dir), list_pngs(b_dir), fid_opts.out_dir);
      std::printf("fid: %s  (n_a=%d, n_b=%d, feature_dim=%d)\n",
                  format_real(r.fid).c_str(), r.n_a, r.n_b, r.feature_dim);
      if (r.has_ssim) std::printf("mean pairwise ssim: %s\n", format_real(r.ssim_mean).c_str());
      std::printf("wrote %s/metrics.csv\n", fid_opts.out_dir.c_str());
    } else if (app.got_subcommand(gradcheck)) {
      return run_gradcheck(gc_seeds);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
