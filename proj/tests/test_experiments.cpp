#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "texflow/error.hpp"
#include "texflow/experiments.hpp"
#include "texflow/io.hpp"

#include "test_util.hpp"

using namespace texflow;
using testutil::slurp;
using testutil::test_dir;

namespace {

// Small scene so the iteration loops stay cheap in unit tests.
ExperimentConfig small_flow_config() {
  ExperimentConfig cfg;
  cfg.image_height = 21;
  cfg.image_width = 21;
  cfg.flow_height = 8;
  cfg.flow_width = 8;
  cfg.shift_x_px = 2.0;
  cfg.shift_y_px = -1.5;
  cfg.iterations = 25;
  return cfg;
}

}  // namespace

TEST_CASE("config round-trips through its canonical JSON") {
  ExperimentConfig cfg;
  cfg.seed = 7;
  cfg.lr_flow = 0.05;
  cfg.mode = "replace";
  const std::string text = config_canonical(cfg);
  const ExperimentConfig back = parse_config(text);
  CHECK(config_canonical(back) == text);
  CHECK(config_hash(back) == config_hash(cfg));
}

TEST_CASE("config parsing rejects junk") {
  CHECK_THROWS_AS(parse_config("not json at all"), FormatError);
  CHECK_THROWS_AS(parse_config("{\"no_such_knob\": 1}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"iterations\": \"many\"}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"iterations\": 0}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"mode\": \"fastest\"}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"var_lo\": 2.0, \"var_hi\": 1.0}"), ConfigError);
  CHECK(parse_config("{}").iterations == ExperimentConfig{}.iterations);
}

TEST_CASE("config hash tracks every knob") {
  ExperimentConfig a, b;
  b.seed = 1;
  CHECK(config_hash(a) != config_hash(b));
  ExperimentConfig c;
  c.w_rec = 2.0;
  CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("mode names round-trip") {
  CHECK(parse_mode("baseline") == SampleMode::kBaseline);
  CHECK(parse_mode("replace") == SampleMode::kReplace);
  CHECK(parse_mode("gradient-only") == SampleMode::kGradientOnly);
  CHECK(mode_name(SampleMode::kGradientOnly) == std::string("gradient-only"));
  CHECK_THROWS_AS(parse_mode("bogus"), ConfigError);
}

TEST_CASE("collapse demo: flat source kills baseline gradients, ramp revives them") {
  const std::string dir = test_dir("exp_collapse");
  const CollapseResult r = exp_collapse(ExperimentConfig{}, dir);
  CHECK(r.baseline_mean == 0.0);
  CHECK(r.identity_mean == 0.0);
  CHECK(r.ramp_gradient_only_mean >= 1e-3);
  // The modulated image drives d_coords identically in both adaptive modes.
  CHECK(r.ramp_replace_mean == r.ramp_gradient_only_mean);

  const std::string csv = slurp(dir + "/metrics.csv");
  CHECK(csv.find("# config_hash=") == 0);
  CHECK(csv.find("variance,mode,mean_grad_norm,max_grad_norm\n") != std::string::npos);
}

TEST_CASE("collapse demo output is byte-stable across runs") {
  const std::string d1 = test_dir("exp_collapse_a");
  const std::string d2 = test_dir("exp_collapse_b");
  exp_collapse(ExperimentConfig{}, d1);
  exp_collapse(ExperimentConfig{}, d2);
  CHECK(slurp(d1 + "/metrics.csv") == slurp(d2 + "/metrics.csv"));
  CHECK_FALSE(slurp(d1 + "/metrics.csv").empty());
}

TEST_CASE("flow recovery initialized at the answer stays there") {
  ExperimentConfig cfg = small_flow_config();
  cfg.iterations = 0;  // evaluate-only
  cfg.init_with_gt = true;
  cfg.mode = "gradient-only";
  const std::string dir = test_dir("exp_flow_gt");
  const FlowRecoverResult r = exp_flow_recover(cfg, dir);
  REQUIRE(r.arms.size() == 1);
  const FlowArmResult& arm = r.arm("gradient-only");
  CHECK(arm.final_epe_px == 0.0);
  CHECK(arm.final_rec_plain == 0.0);
  CHECK(arm.init_epe_px == 0.0);
}

TEST_CASE("flow recovery starts at the documented offset") {
  ExperimentConfig cfg = small_flow_config();
  cfg.shift_x_px = 3.0;
  cfg.shift_y_px = -4.0;
  cfg.iterations = 0;
  cfg.mode = "baseline";
  const std::string dir = test_dir("exp_flow_init");
  const FlowRecoverResult r = exp_flow_recover(cfg, dir);
  // Base flow == gt flow minus the constant shift, so EPE == |shift|.
  CHECK(r.arms[0].init_epe_px == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(r.arms[0].init_rec_plain > 0.0);
}

TEST_CASE("flow recovery improves all arms on a short run") {
  ExperimentConfig cfg = small_flow_config();
  const std::string dir = test_dir("exp_flow_short");
  const FlowRecoverResult r = exp_flow_recover(cfg, dir);
  REQUIRE(r.arms.size() == 3);  // mode == "all"
  for (const FlowArmResult& arm : r.arms) {
    CHECK(arm.final_rec_plain < arm.init_rec_plain);
    CHECK(arm.final_epe_px < arm.init_epe_px);
  }
  const std::string csv = slurp(dir + "/metrics.csv");
  CHECK(csv.find("mode,iteration,rec,rec_plain,epe_px,var_mean\n") != std::string::npos);
  CHECK(csv.find("gradient-only,0,") != std::string::npos);
  for (const char* f : {"source.png", "target.png", "recon_baseline.png",
                        "recon_gradient-only.png", "var_gradient-only.png"})
    CHECK(std::filesystem::exists(dir + "/" + f));
}

TEST_CASE("flow recovery rejects shifts that would leave the window") {
  ExperimentConfig cfg = small_flow_config();
  cfg.shift_x_px = 12.0;  // margin would exceed the image
  const std::string dir = test_dir("exp_flow_bad");
  CHECK_THROWS_AS(exp_flow_recover(cfg, dir), ConfigError);
}

TEST_CASE("variance scatter of the modulated coordinate gradient") {
  // Zero upstream shuts the path off entirely.
  Image src(4, 4, 1, 0.5);
  FlowField flow(2, 2, {0.1, -0.2});
  Image up(2, 2, 1, 0.0);
  std::vector<Vec2> d_gpx(4, Vec2{1.0, 1.0});
  std::vector<double> d_var(16, 0.0);
  modulated_coord_grad_var_backward(src, flow, up, d_gpx, d_var);
  for (double v : d_var) CHECK(v == 0.0);
}

TEST_CASE("silhouette fit smoke run writes its artifacts") {
  ExperimentConfig cfg;
  cfg.icosphere_level = 0;
  cfg.render_height = 12;
  cfg.render_width = 12;
  cfg.n_views = 2;
  cfg.random_views = 1;
  cfg.iterations = 2;
  cfg.sigma = 0.02;
  const std::string dir = test_dir("exp_sil_smoke");
  const SilhouetteFitResult r = exp_silhouette_fit(cfg, dir);
  REQUIRE(r.view_iou.size() == 2);
  REQUIRE(r.random_view_iou.size() == 1);
  for (double v : r.view_iou) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(r.mean_iou >= 0.0);
  for (const char* f : {"metrics.csv", "final_mesh.obj", "target_0.png", "final_0.png",
                        "target_1.png", "final_1.png"})
    CHECK(std::filesystem::exists(dir + "/" + f));
  const std::string csv = slurp(dir + "/metrics.csv");
  CHECK(csv.find("series,step,value\n") != std::string::npos);
  CHECK(csv.find("mask_iou_fixed") != std::string::npos);
  CHECK(csv.find("mask_iou_random") != std::string::npos);
}

TEST_CASE("self-target silhouette fit is near-perfect from step zero") {
  ExperimentConfig cfg;
  cfg.icosphere_level = 0;
  cfg.render_height = 16;
  cfg.render_width = 16;
  cfg.n_views = 1;
  cfg.random_views = 0;
  cfg.iterations = 1;
  cfg.sigma = 0.02;
  cfg.self_target = true;
  cfg.lr_shape = 1e-6;  // hold still
  const std::string dir = test_dir("exp_sil_self");
  const SilhouetteFitResult r = exp_silhouette_fit(cfg, dir);
  CHECK(r.mean_iou > 0.95);
}

TEST_CASE("image-set comparison end to end on generated PNG dirs") {
  Rng rng(61);
  const std::string da = test_dir("fid_a");
  const std::string db = test_dir("fid_b");
  const std::string dc = test_dir("fid_c");
  for (int i = 0; i < 3; ++i) {
    const Image img = testutil::rand_image(rng, 12, 12, 1);
    save_image(da + "/img_" + std::to_string(i) + ".png", img);
    save_image(db + "/img_" + std::to_string(i) + ".png", img);  // same bytes
    Image dimmed = img;
    for (double& v : dimmed.data) v *= 0.25;  // decisively different stats
    save_image(dc + "/img_" + std::to_string(i) + ".png", dimmed);
  }

  ExperimentConfig cfg;
  cfg.fid_grid = 3;
  const std::string out = test_dir("fid_out");
  const FidResult same = exp_fid(cfg, list_pngs(da), list_pngs(db), out);
  CHECK(same.n_a == 3);
  CHECK(same.n_b == 3);
  CHECK(same.feature_dim == 2 * 3 * 3);
  CHECK(same.fid < 1e-6);
  CHECK(same.has_ssim);
  CHECK(same.ssim_mean == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::filesystem::exists(out + "/metrics.csv"));

  const FidResult diff = exp_fid(cfg, list_pngs(da), list_pngs(dc), out);
  CHECK(diff.fid > 1e-4);

  CHECK_THROWS_AS(exp_fid(cfg, list_pngs(da), {da + "/img_0.png"}, out),
                  DegenerateInputError);
}

TEST_CASE("list_pngs returns sorted names and rejects missing dirs") {
  const std::string dir = test_dir("pngs");
  Image img(3, 3, 1, 0.5);
  save_image(dir + "/b.png", img);
  save_image(dir + "/a.png", img);
  write_file_atomic(dir + "/ignore.txt", "x");
  const std::vector<std::string> got = list_pngs(dir);
  REQUIRE(got.size() == 2);
  CHECK(got[0] < got[1]);
  CHECK(got[0].find("a.png") != std::string::npos);
  CHECK_THROWS_AS(list_pngs(dir + "/nope"), IoError);
}
