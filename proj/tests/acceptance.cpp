// Acceptance gate: one [PASS]/[FAIL] line per shipped guarantee, exit code 1
// if any line fails. The determinism check shells out to the command-line
// binary, passed as --cli <path>.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "texflow/experiments.hpp"
#include "texflow/gradcheck.hpp"
#include "texflow/io.hpp"
#include "texflow/losses.hpp"
#include "texflow/mesh.hpp"
#include "texflow/metrics.hpp"
#include "texflow/rng.hpp"
#include "texflow/sampler.hpp"

using namespace texflow;

namespace {

// --- pinned tolerances and budgets -----------------------------------------
constexpr double kGradRuntimeSec = 60.0;
constexpr int kGradSeeds = 10;

constexpr double kCollapseRuntimeSec = 1.0;
constexpr double kCollapseZeroTol = 1e-12;
constexpr double kCollapseAliveTol = 1e-3;

constexpr double kFlowRuntimeSec = 300.0;
// Regression pins: finals of the first converged seed-0 run of the shipped
// scene; reruns must stay within +-25% (and keep the strict orderings).
constexpr double kPinnedBaselineRec = 0.0010445368776241576;
constexpr double kPinnedBaselineEpe = 3.6758468519166048;
constexpr double kPinnedGradOnlyRec = 5.3138941699224578e-07;
constexpr double kPinnedGradOnlyEpe = 2.7607587940328302;
constexpr double kPinBand = 0.25;

constexpr int kEquivalenceCases = 100;

constexpr double kFidRuntimeSec = 30.0;
constexpr double kFidSelfTol = 1e-8;
constexpr double kFidPointMassTol = 1e-10;
constexpr int kFidCovPairs = 50;
constexpr double kFidEqualCovTol = 1e-6;
constexpr int kFidMcSamples = 10000;
constexpr double kFidMcTol = 0.1;

constexpr double kFitRuntimeSec = 600.0;
constexpr double kFitIouFloor = 0.95;
constexpr int kFitIterationCap = 2000;

constexpr int kMaskPairs = 100;
constexpr double kSsimConstTol = 1e-12;

struct Gate {
  bool all_ok = true;
  int passed = 0;
  int total = 0;

  void report(const char* name, bool ok, const std::string& detail) {
    std::printf("[%s] %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
    std::fflush(stdout);
    all_ok = all_ok && ok;
    passed += ok ? 1 : 0;
    total += 1;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string tmp_dir(const std::string& name) {
  const std::string dir = "texflow_acceptance_tmp/" + name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return std::string(buf);
}

bool bits_eq(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size() * 8) == 0);
}

bool bits_eq(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(Vec2)) == 0);
}

// --- 1. gradient oracles ----------------------------------------------------
void check_gradient_oracles(Gate& gate) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<GradCheckReport> reports = gradient_check_suite(kGradSeeds);
  const double elapsed = seconds_since(t0);
  bool ok = !reports.empty() && elapsed < kGradRuntimeSec;
  const GradCheckReport* worst = nullptr;
  for (const GradCheckReport& r : reports) {
    ok = ok && r.pass;
    if (!worst || r.max_rel_err / r.tolerance > worst->max_rel_err / worst->tolerance)
      worst = &r;
  }
  gate.report("gradient-oracles", ok,
              fmt("%zu ops x %d seeds, worst %s rel err %.3g (tol %.1g), %.1fs",
                  reports.size(), kGradSeeds, worst ? worst->name.c_str() : "-",
                  worst ? worst->max_rel_err : 0.0, worst ? worst->tolerance : 0.0,
                  elapsed));
}

// --- 2. gradient collapse and its rescue ------------------------------------
void check_collapse(Gate& gate) {
  const auto t0 = std::chrono::steady_clock::now();
  const CollapseResult r = exp_collapse(ExperimentConfig{}, tmp_dir("collapse"));
  const double elapsed = seconds_since(t0);
  const bool ok = r.baseline_mean <= kCollapseZeroTol &&
                  r.ramp_gradient_only_mean >= kCollapseAliveTol &&
                  elapsed < kCollapseRuntimeSec;
  gate.report(
      "collapse-reproduction", ok,
      fmt("flat-source grad norm %.3g (<= %.1g), modulated %.3g (>= %.1g), %.2fs",
          r.baseline_mean, kCollapseZeroTol, r.ramp_gradient_only_mean,
          kCollapseAliveTol, elapsed));
}

// --- 3. adaptive-gradient benefit on the shipped scene ----------------------
bool within_band(double value, double pin) {
  return std::abs(value - pin) <= kPinBand * std::abs(pin);
}

void check_flow_benefit(Gate& gate) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg;  // the shipped scene: seed 0, all arms
  const FlowRecoverResult r = exp_flow_recover(cfg, tmp_dir("flow"));
  const double elapsed = seconds_since(t0);
  const FlowArmResult& base = r.arm("baseline");
  const FlowArmResult& grad = r.arm("gradient-only");

  const bool pins_set = kPinnedBaselineRec > 0.0 && kPinnedGradOnlyRec > 0.0;
  const bool strict = grad.final_rec_plain < base.final_rec_plain &&
                      grad.final_epe_px < base.final_epe_px;
  const bool pinned = pins_set &&
                      within_band(base.final_rec_plain, kPinnedBaselineRec) &&
                      within_band(base.final_epe_px, kPinnedBaselineEpe) &&
                      within_band(grad.final_rec_plain, kPinnedGradOnlyRec) &&
                      within_band(grad.final_epe_px, kPinnedGradOnlyEpe);
  const bool ok = strict && pinned && elapsed < kFlowRuntimeSec;
  gate.report(
      "adaptive-gradient-benefit", ok,
      fmt("rec %.6g vs %.6g, epe %.4g vs %.4g px (gradient-only vs baseline), %.0fs%s",
          grad.final_rec_plain, base.final_rec_plain, grad.final_epe_px,
          base.final_epe_px, elapsed, pins_set ? "" : " [regression pins unset]"));
}

// --- 4. variance == 1 equivalence -------------------------------------------
void check_mode_equivalence(Gate& gate) {
  int failures = 0;
  for (int k = 0; k < kEquivalenceCases; ++k) {
    Rng rng(3000 + static_cast<uint64_t>(k));
    const int h = rng.uniform_int(3, 9);
    const int w = rng.uniform_int(3, 9);
    const int c = rng.uniform_int(0, 1) ? 3 : 1;
    Image src(h, w, c);
    for (double& v : src.data) v = rng.uniform(0.0, 1.0);
    FlowField flow(rng.uniform_int(1, 5), rng.uniform_int(1, 5));
    for (Vec2& p : flow.coords) p = {rng.uniform(-1.3, 1.3), rng.uniform(-1.3, 1.3)};
    Image up(flow.height, flow.width, c);
    for (double& v : up.data) v = rng.uniform(-1.0, 1.0);
    const VarianceMap ones(h, w, 1.0);

    const Image f_plain = grid_sample(src, flow);
    const Image f_b = grid_sample(src, flow, ones, SampleMode::kBaseline);
    const Image f_r = grid_sample(src, flow, ones, SampleMode::kReplace);
    const Image f_g = grid_sample(src, flow, ones, SampleMode::kGradientOnly);
    const SampleGrad g_plain = grid_sample_backward(src, flow, up);
    const SampleGrad g_b =
        grid_sample_backward(src, flow, up, ones, SampleMode::kBaseline);
    const SampleGrad g_r =
        grid_sample_backward(src, flow, up, ones, SampleMode::kReplace);
    const SampleGrad g_g =
        grid_sample_backward(src, flow, up, ones, SampleMode::kGradientOnly);

    const bool same =
        bits_eq(f_plain.data, f_b.data) && bits_eq(f_b.data, f_r.data) &&
        bits_eq(f_b.data, f_g.data) && bits_eq(g_plain.d_coords_px, g_b.d_coords_px) &&
        bits_eq(g_b.d_coords_px, g_r.d_coords_px) &&
        bits_eq(g_b.d_coords_px, g_g.d_coords_px) &&
        bits_eq(g_plain.d_image.data, g_b.d_image.data) &&
        bits_eq(g_b.d_image.data, g_r.d_image.data) &&
        bits_eq(g_b.d_image.data, g_g.d_image.data);
    failures += same ? 0 : 1;
  }
  gate.report("variance-one-equivalence", failures == 0,
              fmt("%d random cases, %d bitwise mismatches across the three modes",
                  kEquivalenceCases, failures));
}

// --- 5. distribution-distance correctness -----------------------------------
void check_fid(Gate& gate) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string why;

  {  // a set against itself
    Rng rng(404);
    std::vector<std::vector<double>> rows(30, std::vector<double>(6));
    for (auto& r : rows)
      for (double& v : r) v = rng.uniform(-2.0, 2.0);
    const FeatureStats s = feature_stats(rows);
    const double self = frechet_distance(s, s);
    ok = ok && self < kFidSelfTol;
    why += fmt("self %.2g", self);
  }
  {  // point masses at (0,0) and (3,4): squared mean gap 25
    const FeatureStats a = feature_stats({{0.0, 0.0}});
    const FeatureStats b = feature_stats({{3.0, 4.0}});
    const double d = frechet_distance(a, b);
    ok = ok && std::abs(d - 25.0) <= kFidPointMassTol;
    why += fmt(", point-mass |d-25| %.2g", std::abs(d - 25.0));
  }
  {  // equal covariances: distance reduces to the squared mean gap
    Rng rng(405);
    double worst = 0.0;
    for (int p = 0; p < kFidCovPairs; ++p) {
      const int d = 4;
      std::vector<double> a(d * d);
      for (double& v : a) v = rng.uniform(-1.0, 1.0);
      FeatureStats sa, sb;
      sa.cov.assign(d * d, 0.0);
      for (int i = 0; i < d; ++i)  // S = A A^T + 0.1 I, PSD by construction
        for (int j = 0; j < d; ++j) {
          double acc = i == j ? 0.1 : 0.0;
          for (int k = 0; k < d; ++k) acc += a[i * d + k] * a[j * d + k];
          sa.cov[i * d + j] = acc;
        }
      sb.cov = sa.cov;
      double gap = 0.0;
      for (int i = 0; i < d; ++i) {
        sa.mean.push_back(rng.uniform(-3.0, 3.0));
        sb.mean.push_back(rng.uniform(-3.0, 3.0));
        const double diff = sa.mean.back() - sb.mean.back();
        gap += diff * diff;
      }
      worst = std::max(worst, std::abs(frechet_distance(sa, sb) - gap));
    }
    ok = ok && worst <= kFidEqualCovTol;
    why += fmt(", equal-cov worst |d-gap| %.2g over %d pairs", worst, kFidCovPairs);
  }
  {  // Monte-Carlo: N((0,0), I) vs N((1,0), I) has distance 1
    Rng rng(406);
    std::vector<std::vector<double>> ra(kFidMcSamples), rb(kFidMcSamples);
    for (int i = 0; i < kFidMcSamples; ++i) {
      ra[i] = {rng.normal(), rng.normal()};
      rb[i] = {rng.normal() + 1.0, rng.normal()};
    }
    const double d = frechet_distance(feature_stats(ra), feature_stats(rb));
    ok = ok && std::abs(d - 1.0) <= kFidMcTol;
    why += fmt(", monte-carlo %.3f (1 +- %.1f)", d, kFidMcTol);
  }

  const double elapsed = seconds_since(t0);
  ok = ok && elapsed < kFidRuntimeSec;
  gate.report("fid-correctness", ok, why + fmt(", %.1fs", elapsed));
}

// --- 6. silhouette fitting convergence --------------------------------------
void check_shape_fit(Gate& gate) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg;  // the shipped fitting setup
  const bool budget_ok = cfg.iterations <= kFitIterationCap;
  const SilhouetteFitResult r = exp_silhouette_fit(cfg, tmp_dir("fit"));
  const double elapsed = seconds_since(t0);
  const bool ok =
      budget_ok && r.mean_iou > kFitIouFloor && elapsed < kFitRuntimeSec;
  gate.report("shape-fit-convergence", ok,
              fmt("mean mask IOU %.4f over %zu views (> %.2f) in %d iterations, %.0fs",
                  r.mean_iou, r.view_iou.size(), kFitIouFloor, cfg.iterations,
                  elapsed));
}

// --- 7. metric identities -----------------------------------------------------
void check_metric_identities(Gate& gate) {
  bool ok = true;
  std::string why;

  int mask_fails = 0;
  Rng rng(707);
  for (int k = 0; k < kMaskPairs; ++k) {
    const int h = rng.uniform_int(3, 12);
    const int w = rng.uniform_int(3, 12);
    Image a(h, w, 1), b(h, w, 1);
    for (double& v : a.data) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
    for (double& v : b.data) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
    // Complementarity, evaluated on the side that is exact in doubles.
    if (iou_loss(a, b, nullptr) != 1.0 - mask_iou(a, b)) mask_fails += 1;
  }
  ok = ok && mask_fails == 0;
  why += fmt("mask complement fails %d/%d", mask_fails, kMaskPairs);

  Rng rng2(708);
  Image img(16, 16, 1);
  for (double& v : img.data) v = rng2.uniform();
  const bool self_one = ssim(img, img) == 1.0;
  ok = ok && self_one;
  why += fmt(", ssim(a,a)==1 %s", self_one ? "exact" : "VIOLATED");

  const double x = 0.25, y = 0.5, c1 = 1e-4;
  Image ca(12, 12, 1, x), cb(12, 12, 1, y);
  const double want = (2.0 * x * y + c1) / (x * x + y * y + c1);
  const double got = ssim(ca, cb);
  ok = ok && std::abs(got - want) <= kSsimConstTol;
  why += fmt(", const-image |ssim-closed form| %.2g", std::abs(got - want));

  gate.report("metric-identities", ok, why);
}

// --- 8. icosphere structure ---------------------------------------------------
void check_icosphere(Gate& gate) {
  const Mesh m3 = icosphere(3);
  bool ok = m3.vertices.size() == 642 && m3.faces.size() == 1280;
  std::string why = fmt("level 3: %zu vertices, %zu faces", m3.vertices.size(),
                        m3.faces.size());
  for (int level = 0; level <= 4; ++level) {
    if (!is_edge_manifold(icosphere(level))) {
      ok = false;
      why += fmt(", level %d NOT manifold", level);
    }
  }
  gate.report("icosphere-structure", ok, why + ", levels 0-4 edge-manifold");
}

// --- 9. byte-identical reruns --------------------------------------------------
int run_cli(const std::string& cli, const std::string& args) {
  const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

void check_determinism(Gate& gate, const std::string& cli) {
  if (cli.empty()) {
    gate.report("determinism", false, "no --cli <path> given");
    return;
  }
  bool ok = true;
  std::string why;

  const std::string c1 = tmp_dir("det_collapse_1");
  const std::string c2 = tmp_dir("det_collapse_2");
  const bool collapse_ran = run_cli(cli, "collapse --seed 9 --out " + c1) == 0 &&
                            run_cli(cli, "collapse --seed 9 --out " + c2) == 0;
  const bool collapse_same =
      collapse_ran && !slurp(c1 + "/metrics.csv").empty() &&
      slurp(c1 + "/metrics.csv") == slurp(c2 + "/metrics.csv");
  ok = ok && collapse_same;
  why += fmt("collapse reruns %s",
             !collapse_ran ? "FAILED TO RUN" : collapse_same ? "byte-identical" : "DIFFER");

  const std::string cfg_dir = tmp_dir("det_cfg");
  const std::string cfg_path = cfg_dir + "/flow.json";
  write_file_atomic(cfg_path,
                    "{\"iterations\": 40, \"image_height\": 21, \"image_width\": 21,"
                    " \"flow_height\": 8, \"flow_width\": 8, \"seed\": 5}\n");
  const std::string f1 = tmp_dir("det_flow_1");
  const std::string f2 = tmp_dir("det_flow_2");
  const bool flow_ran =
      run_cli(cli, "flow-recover --config " + cfg_path + " --out " + f1) == 0 &&
      run_cli(cli, "flow-recover --config " + cfg_path + " --out " + f2) == 0;
  const bool flow_same = flow_ran && !slurp(f1 + "/metrics.csv").empty() &&
                         slurp(f1 + "/metrics.csv") == slurp(f2 + "/metrics.csv");
  ok = ok && flow_same;
  why += fmt(", flow-recover reruns %s",
             !flow_ran ? "FAILED TO RUN" : flow_same ? "byte-identical" : "DIFFER");

  gate.report("determinism", ok, why);
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--cli") cli = argv[i + 1];

  Gate gate;
  check_gradient_oracles(gate);
  check_collapse(gate);
  check_flow_benefit(gate);
  check_mode_equivalence(gate);
  check_fid(gate);
  check_shape_fit(gate);
  check_metric_identities(gate);
  check_icosphere(gate);
  check_determinism(gate, cli);
  std::printf("%d/%d criteria passed\n", gate.passed, gate.total);
  return gate.all_ok ? 0 : 1;
}
