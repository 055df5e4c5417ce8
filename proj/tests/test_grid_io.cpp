#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "texflow/error.hpp"
#include "texflow/grid.hpp"
#include "texflow/io.hpp"
#include "texflow/rng.hpp"

#include "test_util.hpp"

using namespace texflow;
using testutil::test_dir;

TEST_CASE("image and flow constructors validate dimensions") {
  CHECK_THROWS_AS(Image(0, 3, 1), ShapeError);
  CHECK_THROWS_AS(Image(3, 0, 1), ShapeError);
  CHECK_THROWS_AS(Image(3, 3, 0), ShapeError);
  CHECK_THROWS_AS(FlowField(0, 2), ShapeError);
  CHECK_THROWS_AS(VarianceMap(2, 0), ShapeError);
  const Image img(2, 3, 4, 0.5);
  CHECK(img.data.size() == 24);
  CHECK(img.at(1, 2, 3) == 0.5);
}

TEST_CASE("identity flow hits cell centers") {
  const FlowField f = identity_flow(2, 4);
  CHECK(f.at(0, 0).x == doctest::Approx(-1.0 + 2.0 * 0.5 / 4).epsilon(1e-15));
  CHECK(f.at(0, 0).y == doctest::Approx(-1.0 + 2.0 * 0.5 / 2).epsilon(1e-15));
  CHECK(f.at(1, 3).x == doctest::Approx(-1.0 + 2.0 * 3.5 / 4).epsilon(1e-15));
  CHECK(f.at(1, 3).y == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("require_finite flags NaN and infinity") {
  Image img(2, 2, 1, 0.0);
  CHECK_NOTHROW(require_finite(img, "img"));
  img.at(1, 1, 0) = std::nan("");
  CHECK_THROWS_AS(require_finite(img, "img"), NumericError);
  FlowField f(2, 2);
  f.at(0, 1).y = INFINITY;
  CHECK_THROWS_AS(require_finite(f, "flow"), NumericError);
}

TEST_CASE("tensor container round-trips bitwise") {
  const std::string dir = test_dir("tensor_roundtrip");
  Rng rng(7);
  std::vector<double> data(2 * 3 * 4);
  for (double& v : data) v = rng.uniform(-10.0, 10.0);
  write_tensor(dir + "/t.bin", {2, 3, 4}, data);
  const Tensor t = read_tensor(dir + "/t.bin");
  CHECK(t.dims == std::vector<uint32_t>{2, 3, 4});
  CHECK(testutil::bits_equal(t.data, data));
}

TEST_CASE("tensor file layout: rank-2 2x2 occupies exactly 48 bytes") {
  const std::string dir = test_dir("tensor_layout");
  write_tensor(dir + "/t.bin", {2, 2}, {1.0, 2.0, 3.0, 4.0});
  // magic(4) + rank(4) + dims(8) + payload(32)
  CHECK(std::filesystem::file_size(dir + "/t.bin") == 48);
  const std::string bytes = testutil::slurp(dir + "/t.bin");
  CHECK(bytes.substr(0, 4) == "TGR1");
  CHECK(static_cast<unsigned char>(bytes[4]) == 2);  // rank, little-endian
}

TEST_CASE("tensor reader rejects malformed files") {
  const std::string dir = test_dir("tensor_bad");
  CHECK_THROWS_AS(write_tensor(dir + "/t.bin", {2, 2}, {1.0}), ShapeError);

  write_file_atomic(dir + "/magic.bin", "NOPE0000");
  CHECK_THROWS_AS(read_tensor(dir + "/magic.bin"), FormatError);

  write_tensor(dir + "/ok.bin", {2, 2}, {1.0, 2.0, 3.0, 4.0});
  const std::string bytes = testutil::slurp(dir + "/ok.bin");
  write_file_atomic(dir + "/trunc.bin", bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(read_tensor(dir + "/trunc.bin"), FormatError);
  write_file_atomic(dir + "/extra.bin", bytes + "xx");
  CHECK_THROWS_AS(read_tensor(dir + "/extra.bin"), FormatError);

  CHECK_THROWS_AS(read_tensor(dir + "/missing.bin"), IoError);
}

TEST_CASE("png round-trip preserves 8-bit grayscale and rgb exactly") {
  const std::string dir = test_dir("png_roundtrip");
  Image gray(3, 5, 1);
  for (int i = 0; i < 15; ++i) gray.data[i] = static_cast<double>(i * 17 % 256) / 255.0;
  save_image(dir + "/g.png", gray);
  const Image gray2 = load_image(dir + "/g.png");
  CHECK(gray2.same_shape(gray));
  CHECK(testutil::bits_equal(gray2.data, gray.data));

  Image rgb(4, 2, 3);
  for (size_t i = 0; i < rgb.data.size(); ++i)
    rgb.data[i] = static_cast<double>((i * 31) % 256) / 255.0;
  save_image(dir + "/c.png", rgb);
  const Image rgb2 = load_image(dir + "/c.png");
  CHECK(testutil::bits_equal(rgb2.data, rgb.data));
}

TEST_CASE("png save quantizes round-half-up and clamps") {
  const std::string dir = test_dir("png_quant");
  Image img(1, 5, 1);
  img.data = {-0.5, 2.0, 0.5, 1.0 / 255.0 * 0.4999, std::nan("")};
  save_image(dir + "/q.png", img);
  const Image back = load_image(dir + "/q.png");
  CHECK(back.data[0] == 0.0);                       // clamped low
  CHECK(back.data[1] == 1.0);                       // clamped high
  CHECK(back.data[2] == doctest::Approx(128.0 / 255.0).epsilon(1e-12));  // 127.5 rounds up
  CHECK(back.data[3] == 0.0);                       // rounds down
  CHECK(back.data[4] == 0.0);                       // NaN treated as 0
}

TEST_CASE("png loader rejects unsupported channel counts") {
  const std::string dir = test_dir("png_bad");
  CHECK_THROWS_AS(load_image(dir + "/missing.png"), IoError);
  write_file_atomic(dir + "/not.png", "this is not a png");
  CHECK_THROWS_AS(load_image(dir + "/not.png"), FormatError);
  Image img(2, 2, 2);
  CHECK_THROWS_AS(save_image(dir + "/two.png", img), ShapeError);
}

TEST_CASE("csv writer stamps header and enforces column count") {
  CsvWriter csv("a,b,c", 0xdeadbeefcafef00dull, "1.2.3");
  csv.row({"1", "2", "3"});
  CHECK_THROWS_AS(csv.row({"1", "2"}), ShapeError);
  const std::string text = csv.text();
  CHECK(text.find("# config_hash=deadbeefcafef00d toolkit_version=1.2.3\n") == 0);
  CHECK(text.find("a,b,c\n1,2,3\n") != std::string::npos);
}

TEST_CASE("real formatting round-trips doubles") {
  for (double v : {1.0 / 3.0, 0.1, 12345.6789e-7, -2.0, 1e300}) {
    const std::string s = format_real(v);
    CHECK(std::stod(s) == v);
  }
}

TEST_CASE("atomic writes leave no temp files behind") {
  const std::string dir = test_dir("atomic");
  write_file_atomic(dir + "/f.txt", "hello");
  CHECK(testutil::slurp(dir + "/f.txt") == "hello");
  int entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++entries;
  CHECK(entries == 1);
}
