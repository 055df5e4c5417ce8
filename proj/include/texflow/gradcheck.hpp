#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace texflow {

// One analytic-vs-central-difference comparison, maximized over randomized
// inputs. Tolerances are pinned per case: 1e-3 for the soft silhouette
// (logistic saturation makes its difference quotients noisier), 1e-4
// elsewhere.
struct GradCheckReport {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// Runs every differentiable operation against its finite-difference oracle
// on `seeds` randomized inputs each (seeds 0..seeds-1). Input generators
// keep sample coordinates away from cell boundaries and nearest-neighbor /
// L1 decisions away from ties, so the oracle only probes smooth regions.
std::vector<GradCheckReport> gradient_check_suite(int seeds);

}  // namespace texflow
