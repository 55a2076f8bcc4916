#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ferns/rng.hpp"

namespace ferns {

using Bytes = std::vector<std::uint8_t>;

// Owned 8-bit grayscale image, row-major.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 0);
  GrayImage(int width, int height, std::vector<std::uint8_t> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return data_.empty(); }

  std::uint8_t operator()(int x, int y) const noexcept {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  std::uint8_t& operator()(int x, int y) noexcept {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }

  // Bounds-checked read; throws OutOfBounds.
  std::uint8_t at(int x, int y) const;

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  std::span<const std::uint8_t> data() const noexcept { return data_; }
  std::span<std::uint8_t> data() noexcept { return data_; }

  // Copy of the w x h window whose top-left corner is (x0, y0). The window
  // must lie inside the image.
  GrayImage crop(int x0, int y0, int w, int h) const;

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

GrayImage read_pgm(std::span<const std::uint8_t> bytes);
Bytes write_pgm(const GrayImage& image);

GrayImage read_pgm_file(const std::filesystem::path& path);
void write_pgm_file(const std::filesystem::path& path, const GrayImage& image);

// Row-major 2x2 matrix [[a, b], [c, d]].
struct Mat2 {
  double a = 1, b = 0, c = 0, d = 1;

  double det() const { return a * d - b * c; }
  Mat2 inverse() const;
  friend Mat2 operator*(const Mat2& l, const Mat2& r);
};

struct Vec2 {
  double x = 0, y = 0;
};

inline Vec2 operator*(const Mat2& m, Vec2 v) {
  return {m.a * v.x + m.b * v.y, m.c * v.x + m.d * v.y};
}

Mat2 rotation(double angle);

// Affine viewpoint change R(theta) R(-phi) diag(lambda1, lambda2) R(phi)
// plus a translation applied in source coordinates.
struct AffineDeform {
  double theta = 0;
  double phi = 0;
  double lambda1 = 1;
  double lambda2 = 1;
  double tx = 0;
  double ty = 0;

  static AffineDeform identity() { return {}; }

  // Throws InvalidArgument unless both scales are positive and finite.
  void validate() const;

  // Deform whose linear part is the inverse of this one's (translation
  // is not inverted).
  AffineDeform inverse_linear() const;
};

Mat2 deform_matrix(const AffineDeform& d);

// Sampling ranges for the four deformation parameters. Angles are drawn on
// [min, max) and scales on [min, max].
struct DeformRanges {
  double theta_min = 0;
  double theta_max = 2 * 3.14159265358979323846;
  double phi_min = 0;
  double phi_max = 2 * 3.14159265358979323846;
  double lambda_min = 0.6;
  double lambda_max = 1.5;

  // Ranges that always produce the identity deform.
  static DeformRanges identity() { return {0, 0, 0, 0, 1, 1}; }
};

AffineDeform sample_deformation(Rng& rng, const DeformRanges& ranges = {});

// Maps points between a source image and a view produced by warp_image with
// the same deform and sizes.
class WarpGeometry {
 public:
  WarpGeometry(const AffineDeform& d, int src_w, int src_h, int out_w,
               int out_h);

  Vec2 to_source(Vec2 view_point) const;
  Vec2 to_view(Vec2 source_point) const;

 private:
  Mat2 forward_;
  Mat2 inverse_;
  Vec2 src_center_;
  Vec2 out_center_;
  Vec2 shift_;
};

inline constexpr std::uint8_t kBackgroundFill = 127;

// Inverse-mapped bilinear warp about the output center. Samples outside the
// source take kBackgroundFill.
GrayImage warp_image(const GrayImage& src, const AffineDeform& d, int out_w,
                     int out_h);

// Additive i.i.d. Gaussian noise, rounded and clamped.
GrayImage add_noise(const GrayImage& img, double sigma, Rng& rng);

// Rounded mean over the (2r+1)^2 window, clipped at the borders.
GrayImage box_smooth(const GrayImage& img, int radius);

}  // namespace ferns
