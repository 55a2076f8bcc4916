#include <cmath>
#include <numbers>
#include <string>

#include "doctest.h"
#include "ferns/dataset.hpp"
#include "ferns/errors.hpp"
#include "ferns/image.hpp"

using namespace ferns;

namespace {

Bytes bytes_of(const std::string& s) { return Bytes(s.begin(), s.end()); }

void check_matrix(const Mat2& m, double a, double b, double c, double d) {
  CHECK(m.a == doctest::Approx(a).epsilon(1e-12));
  CHECK(std::abs(m.b - b) < 1e-12);
  CHECK(std::abs(m.c - c) < 1e-12);
  CHECK(m.d == doctest::Approx(d).epsilon(1e-12));
}

}  // namespace

TEST_SUITE("img_core") {

TEST_CASE("read_pgm maps raster bytes row-major") {
  Bytes b = bytes_of("P5\n2 1\n255\n");
  b.push_back(7);
  b.push_back(200);
  const GrayImage img = read_pgm(b);
  CHECK(img.width() == 2);
  CHECK(img.height() == 1);
  CHECK(img(0, 0) == 7);
  CHECK(img(1, 0) == 200);
}

TEST_CASE("read_pgm accepts header comments") {
  Bytes b = bytes_of("P5\n# made by hand\n1 2 # dims\n255\n");
  b.push_back(1);
  b.push_back(2);
  const GrayImage img = read_pgm(b);
  CHECK(img.height() == 2);
  CHECK(img(0, 1) == 2);
}

TEST_CASE("read_pgm error paths") {
  CHECK_THROWS_AS(read_pgm(bytes_of("P6\n1 1\n255\n\x01\x02\x03")), UnsupportedFormat);
  CHECK_THROWS_AS(read_pgm(bytes_of("GIF89a")), ParseError);
  CHECK_THROWS_AS(read_pgm(bytes_of("P5\nx 1\n255\n\x01")), ParseError);
  CHECK_THROWS_AS(read_pgm(bytes_of("P5\n2 2\n65535\n")), UnsupportedFormat);
  CHECK_THROWS_AS(read_pgm(bytes_of("P5\n2 2\n255\n\x01\x02\x03")), ParseError);
  CHECK_THROWS_AS(read_pgm(bytes_of("P5\n0 2\n255\n")), ParseError);
  CHECK_THROWS_AS(read_pgm(bytes_of("P5")), ParseError);
}

TEST_CASE("write_pgm minimal image and raster order") {
  Bytes expected = bytes_of("P5\n1 1\n255\n");
  expected.push_back(0);
  CHECK(write_pgm(GrayImage(1, 1, std::uint8_t{0})) == expected);

  const GrayImage img(3, 2, std::vector<std::uint8_t>{0, 1, 2, 3, 4, 5});
  const Bytes out = write_pgm(img);
  const Bytes raster(out.end() - 6, out.end());
  CHECK(raster == Bytes{0, 1, 2, 3, 4, 5});
}

TEST_CASE("640x480 random raster round-trips byte-identically") {
  Rng rng(2024);
  std::vector<std::uint8_t> raster(640 * 480);
  for (auto& v : raster) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  Bytes file = bytes_of("P5\n640 480\n255\n");
  file.insert(file.end(), raster.begin(), raster.end());
  const GrayImage img = read_pgm(file);
  CHECK(write_pgm(img) == file);
  CHECK(read_pgm(write_pgm(img)) == img);
}

TEST_CASE("deform_matrix closed-form cases") {
  check_matrix(deform_matrix({0, 0, 1, 1}), 1, 0, 0, 1);
  check_matrix(deform_matrix({std::numbers::pi / 2, 0, 1, 1}), 0, -1, 1, 0);
  check_matrix(deform_matrix({0, 0, 2, 0.5}), 2, 0, 0, 0.5);
}

TEST_CASE("deform_matrix determinant equals lambda1 * lambda2") {
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    const AffineDeform d = sample_deformation(rng);
    CHECK(std::abs(deform_matrix(d).det() - d.lambda1 * d.lambda2) < 1e-9);
  }
}

TEST_CASE("inverse_linear composes to the identity") {
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    const AffineDeform d = sample_deformation(rng);
    const Mat2 p = deform_matrix(d) * deform_matrix(d.inverse_linear());
    check_matrix(p, 1, 0, 0, 1);
  }
}

TEST_CASE("non-positive scales are rejected") {
  CHECK_THROWS_AS((AffineDeform{0, 0, 0, 1}).validate(), InvalidArgument);
  CHECK_THROWS_AS((AffineDeform{0, 0, 1, -2}).validate(), InvalidArgument);
}

TEST_CASE("identity warp reproduces the source") {
  const GrayImage src = make_textured_image(57, 41, 3);
  CHECK(warp_image(src, AffineDeform::identity(), 57, 41) == src);
}

TEST_CASE("warp then inverse warp stays within interpolation error") {
  const GrayImage src = make_textured_image(160, 160, 11);
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const AffineDeform d = sample_deformation(rng);
    const GrayImage there = warp_image(src, d, 160, 160);
    const GrayImage back = warp_image(there, d.inverse_linear(), 160, 160);
    // Interior: points whose forward image stays well inside the view.
    const WarpGeometry geom(d, 160, 160, 160, 160);
    double sum = 0;
    int n = 0;
    for (int y = 0; y < 160; ++y)
      for (int x = 0; x < 160; ++x) {
        const Vec2 v = geom.to_view({double(x), double(y)});
        if (v.x < 2 || v.y < 2 || v.x > 157 || v.y > 157) continue;
        sum += std::abs(int(back(x, y)) - int(src(x, y)));
        ++n;
      }
    REQUIRE(n > 1000);
    CHECK(sum / n < 3.0);
  }
}

TEST_CASE("constant image warps to constant inside, background outside") {
  const GrayImage src(40, 30, std::uint8_t{100});
  const AffineDeform d{0.7, 1.9, 0.6, 1.4, 3.5, -2.0};
  const GrayImage out = warp_image(src, d, 50, 50);
  const WarpGeometry geom(d, 40, 30, 50, 50);
  for (int y = 0; y < 50; ++y)
    for (int x = 0; x < 50; ++x) {
      const Vec2 s = geom.to_source({double(x), double(y)});
      const bool inside = s.x > 1e-6 && s.y > 1e-6 && s.x < 39 - 1e-6 && s.y < 29 - 1e-6;
      const bool outside = s.x < -1e-6 || s.y < -1e-6 || s.x > 39 + 1e-6 || s.y > 29 + 1e-6;
      if (inside) CHECK(out(x, y) == 100);
      if (outside) CHECK(out(x, y) == kBackgroundFill);
    }
}

TEST_CASE("sample_deformation: determinism, ranges, mean") {
  Rng a(42), b(42);
  const AffineDeform da = sample_deformation(a);
  const AffineDeform db = sample_deformation(b);
  CHECK(da.theta == db.theta);
  CHECK(da.lambda2 == db.lambda2);

  Rng rng(99);
  double sum = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const AffineDeform d = sample_deformation(rng);
    REQUIRE(d.theta >= 0);
    REQUIRE(d.theta < 2 * std::numbers::pi);
    REQUIRE(d.phi >= 0);
    REQUIRE(d.phi < 2 * std::numbers::pi);
    REQUIRE(d.lambda1 >= 0.6);
    REQUIRE(d.lambda1 <= 1.5);
    REQUIRE(d.lambda2 >= 0.6);
    REQUIRE(d.lambda2 <= 1.5);
    sum += d.lambda1;
  }
  CHECK(std::abs(sum / n - 1.05) <= 0.01);

  Rng id(1);
  const AffineDeform i = sample_deformation(id, DeformRanges::identity());
  CHECK(deform_matrix(i).a == 1.0);
  CHECK(deform_matrix(i).b == 0.0);
}

TEST_CASE("add_noise moments and clamping") {
  const GrayImage flat(317, 316, std::uint8_t{128});
  Rng rng(8);
  CHECK(add_noise(flat, 0, rng) == flat);

  const GrayImage noisy = add_noise(flat, 10, rng);
  double mean = 0, sq = 0;
  for (auto v : noisy.data()) mean += v;
  mean /= double(noisy.data().size());
  for (auto v : noisy.data()) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / double(noisy.data().size() - 1));
  CHECK(sd >= 9.5);
  CHECK(sd <= 10.5);

  const GrayImage black(100, 100, std::uint8_t{0});
  const GrayImage clipped = add_noise(black, 10, rng);
  double clipped_mean = 0;
  for (auto v : clipped.data()) clipped_mean += v;
  // Half the draws clamp to 0, the rest stay positive.
  CHECK(clipped_mean / 1e4 > 2.0);

  CHECK_THROWS_AS(add_noise(flat, -1, rng), InvalidArgument);
}

TEST_CASE("noise is reproducible under a fixed seed") {
  const GrayImage src = make_textured_image(64, 48, 1);
  Rng a(77), b(77);
  CHECK(add_noise(src, 12, a) == add_noise(src, 12, b));
}

TEST_CASE("box_smooth") {
  const GrayImage src = make_textured_image(30, 20, 4);
  CHECK(box_smooth(src, 0) == src);
  const GrayImage flat(9, 7, std::uint8_t{93});
  CHECK(box_smooth(flat, 3) == flat);
  const GrayImage dot(3, 3, std::vector<std::uint8_t>{0, 0, 0, 0, 9, 0, 0, 0, 0});
  CHECK(box_smooth(dot, 1)(1, 1) == 1);
  // Corner window is clipped to 2x2: 9/4 rounds to 2.
  CHECK(box_smooth(dot, 1)(0, 0) == 2);
  CHECK_THROWS_AS(box_smooth(src, -1), InvalidArgument);
}

TEST_CASE("GrayImage invariants") {
  CHECK_THROWS_AS(GrayImage(0, 3), InvalidArgument);
  CHECK_THROWS_AS(GrayImage(2, 2, std::vector<std::uint8_t>(3)), InvalidArgument);
  const GrayImage img(4, 3, std::uint8_t{5});
  CHECK_THROWS_AS(img.at(4, 0), OutOfBounds);
  CHECK(img.crop(1, 1, 2, 2).width() == 2);
  CHECK_THROWS_AS(img.crop(3, 0, 2, 2), OutOfBounds);
}

}  // TEST_SUITE
