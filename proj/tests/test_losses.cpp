#include <doctest.h>

#include <cmath>
#include <vector>

#include "texflow/error.hpp"
#include "texflow/losses.hpp"
#include "texflow/mesh.hpp"

#include "test_util.hpp"

using namespace texflow;

TEST_CASE("iou_loss on a hand-computed pair") {
  Image real(1, 3, 1), pred(1, 3, 1);
  real.data = {1, 1, 0};
  pred.data = {1, 0, 1};
  Image d_pred;
  const double loss = iou_loss(real, pred, &d_pred);
  // intersection 1, union 3.
  CHECK(loss == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  REQUIRE(d_pred.same_shape(pred));
  CHECK(d_pred.data[0] == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
  CHECK(d_pred.data[1] == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
  CHECK(d_pred.data[2] == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("iou_loss: empty union scores 0 with zero gradient") {
  Image real(2, 2, 1), pred(2, 2, 1);
  Image d_pred;
  CHECK(iou_loss(real, pred, &d_pred) == 0.0);
  for (double v : d_pred.data) CHECK(v == 0.0);

  Image other(2, 3, 1);
  CHECK_THROWS_AS(iou_loss(real, other, nullptr), ShapeError);
}

TEST_CASE("rec_loss means, gradients, and the L1 tie rule") {
  Image rendered(1, 2, 1), target(1, 2, 1);
  rendered.data = {0.0, 1.0};
  target.data = {1.0, 3.0};
  Image d;
  CHECK(rec_loss(rendered, target, RecNorm::kL1, &d) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(d.data[0] == -0.5);
  CHECK(d.data[1] == -0.5);
  CHECK(rec_loss(rendered, target, RecNorm::kL2, &d) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(d.data[0] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(d.data[1] == doctest::Approx(-2.0).epsilon(1e-15));

  rendered.data = {1.0, 3.0};  // exact tie
  CHECK(rec_loss(rendered, target, RecNorm::kL1, &d) == 0.0);
  CHECK(d.data[0] == 0.0);
  CHECK(d.data[1] == 0.0);
}

TEST_CASE("chamfer_2d single-point oracle and empty rejection") {
  const std::vector<Vec2> a = {{0, 0}};
  const std::vector<Vec2> b = {{3, 4}};
  std::vector<Vec2> d_a, d_b;
  const double loss = chamfer_2d(a, b, &d_a, &d_b);
  CHECK(loss == doctest::Approx(50.0).epsilon(1e-15));  // 25 each direction
  CHECK(d_a[0].x == doctest::Approx(-12.0).epsilon(1e-15));
  CHECK(d_a[0].y == doctest::Approx(-16.0).epsilon(1e-15));
  CHECK(d_b[0].x == doctest::Approx(12.0).epsilon(1e-15));
  CHECK(d_b[0].y == doctest::Approx(16.0).epsilon(1e-15));

  CHECK_THROWS_AS(chamfer_2d(std::vector<Vec2>{}, b, nullptr, nullptr),
                  DegenerateInputError);
}

TEST_CASE("chamfer_2d identical sets score zero") {
  Rng rng(41);
  std::vector<Vec2> pts;
  for (int i = 0; i < 9; ++i) pts.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
  std::vector<Vec2> d_a;
  CHECK(chamfer_2d(pts, pts, &d_a, nullptr) == 0.0);
  for (const Vec2& g : d_a) {
    CHECK(g.x == 0.0);
    CHECK(g.y == 0.0);
  }
}

TEST_CASE("chamfer_2d nearest-neighbor ties pick the lowest index") {
  const std::vector<Vec2> a = {{0, 0}};
  const std::vector<Vec2> b = {{1, 0}, {-1, 0}};  // equidistant
  std::vector<Vec2> d_b;
  chamfer_2d(a, b, nullptr, &d_b);
  // a's term must have matched b[0]: its pull (+2) lands there on top of
  // b[0]'s own directed term (+1); b[1] keeps only its own term (-1).
  CHECK(d_b[0].x == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(d_b[1].x == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("align_loss hand-built face: flow centroid vs raster centroid") {
  Mesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.faces = {{0, 1, 2}};
  UVMapping uv;
  uv.uv = {{0, 0}, {1, 0}, {0, 1}};
  const FlowField flow(2, 2, {0.0, 0.0});  // a = (0, 0) whatever texels land inside

  RasterWeights w;
  w.n_faces = 1;
  w.height = 2;
  w.width = 2;
  w.w.assign(4, 0.0);
  w.w[0] = 0.5;  // pixel (0,0), center (-0.5,-0.5)
  w.w[2] = 0.5;  // pixel (1,0), center (-0.5, 0.5)
  // b = (-0.5, 0), so the loss is ||(0,0) - (-0.5,0)||^2 = 0.25.
  FlowField d_flow;
  const double loss = align_loss(flow, w, uv, m, &d_flow);
  CHECK(loss == doctest::Approx(0.25).epsilon(1e-12));
  Vec2 total{};
  for (const Vec2& g : d_flow.coords) total = total + g;
  CHECK(total.x == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(total.y == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("align_loss skips massless faces and rejects all-skipped input") {
  Mesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.faces = {{0, 1, 2}};
  UVMapping uv;
  uv.uv = {{0, 0}, {1, 0}, {0, 1}};
  const FlowField flow(2, 2, {0.0, 0.0});
  RasterWeights w;
  w.n_faces = 1;
  w.height = 2;
  w.width = 2;
  w.w.assign(4, 0.0);  // no mass anywhere
  CHECK_THROWS_AS(align_loss(flow, w, uv, m, nullptr), DegenerateInputError);

  UVMapping far_uv;
  far_uv.uv = {{0.9, 0.9}, {0.91, 0.9}, {0.9, 0.91}};  // no texel center inside
  w.w[0] = 1.0;
  CHECK_THROWS_AS(align_loss(flow, w, far_uv, m, nullptr), DegenerateInputError);
}

TEST_CASE("part_chamfer: exact evidence scores zero, perturbed does not") {
  const Mesh m = icosphere(0);
  const std::vector<int> parts = octant_parts(m);
  const Camera cam;
  PartPoints2D evidence;
  for (size_t v = 0; v < m.vertices.size(); ++v)
    evidence[parts[v]].push_back(project(cam, m.vertices[v]).xy);

  CameraGrad g;
  CHECK(part_chamfer(m, parts, cam, evidence, &g) == 0.0);
  CHECK(g.d_scale == 0.0);
  CHECK(g.d_translation.x == 0.0);

  PartPoints2D shifted = evidence;
  for (auto& [id, pts] : shifted)
    for (Vec2& p : pts) p.x += 0.1;
  CHECK(part_chamfer(m, parts, cam, shifted, nullptr) > 0.0);
}

TEST_CASE("part_chamfer rejects mismatched part sets") {
  const Mesh m = icosphere(0);
  const std::vector<int> parts = octant_parts(m);
  const Camera cam;
  PartPoints2D evidence;
  for (size_t v = 0; v < m.vertices.size(); ++v)
    evidence[parts[v]].push_back(project(cam, m.vertices[v]).xy);
  evidence.erase(evidence.begin()->first);
  CHECK_THROWS_AS(part_chamfer(m, parts, cam, evidence, nullptr),
                  DegenerateInputError);

  std::vector<int> short_parts(parts.begin(), parts.end() - 1);
  CHECK_THROWS_AS(part_chamfer(m, short_parts, cam, evidence, nullptr), ShapeError);
}

TEST_CASE("prob_loss is the mean absolute difference across maps") {
  ProbMap real(2, 1, 1), rendered(2, 1, 1);
  real.at(0, 0, 0) = 0.0;
  real.at(1, 0, 0) = 1.0;
  rendered.at(0, 0, 0) = 0.5;
  rendered.at(1, 0, 0) = 0.5;
  ProbMap d;
  CHECK(prob_loss(real, rendered, &d) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(d.at(0, 0, 0) == 0.5);
  CHECK(d.at(1, 0, 0) == -0.5);

  Image img(2, 2, 3);
  const ProbMap from = ProbMap::from_image(img);
  CHECK(from.maps == 3);
  CHECK(from.height == 2);
  CHECK(from.width == 2);
}
