#include "ferns/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

#include "ferns/errors.hpp"

namespace ferns {

GrayImage::GrayImage(int width, int height, std::uint8_t fill)
    : width_(width), height_(height) {
  if (width < 1 || height < 1)
    throw InvalidArgument("image dimensions must be positive");
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

GrayImage::GrayImage(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 1 || height < 1)
    throw InvalidArgument("image dimensions must be positive");
  if (data_.size() != static_cast<std::size_t>(width) * height)
    throw InvalidArgument("image data size does not match dimensions");
}

std::uint8_t GrayImage::at(int x, int y) const {
  if (!contains(x, y))
    throw OutOfBounds("pixel (" + std::to_string(x) + "," + std::to_string(y) +
                      ") outside " + std::to_string(width_) + "x" +
                      std::to_string(height_) + " image");
  return (*this)(x, y);
}

GrayImage GrayImage::crop(int x0, int y0, int w, int h) const {
  if (w < 1 || h < 1 || x0 < 0 || y0 < 0 || x0 + w > width_ ||
      y0 + h > height_)
    throw OutOfBounds("crop window outside image");
  std::vector<std::uint8_t> out(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    auto row = data_.begin() + static_cast<std::ptrdiff_t>(y0 + y) * width_ + x0;
    std::copy(row, row + w, out.begin() + static_cast<std::ptrdiff_t>(y) * w);
  }
  return GrayImage(w, h, std::move(out));
}

// ---------------------------------------------------------------------------
// PGM

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  // Reads a decimal token, skipping whitespace and '#' comments before it.
  long long number(const char* what) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_]))
      throw ParseError(std::string("PGM header: expected ") + what);
    long long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > (1LL << 31)) throw ParseError(std::string("PGM header: ") + what + " too large");
      ++pos_;
    }
    return v;
  }

  void single_whitespace() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
      throw ParseError("PGM header: missing whitespace before raster");
    ++pos_;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

GrayImage read_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P')
    throw ParseError("not a PGM file: bad magic");
  if (bytes[1] != '5') {
    if (bytes[1] >= '1' && bytes[1] <= '7')
      throw UnsupportedFormat(std::string("unsupported netpbm variant P") +
                              static_cast<char>(bytes[1]));
    throw ParseError("not a PGM file: bad magic");
  }
  HeaderReader reader(bytes);
  reader.advance(2);
  const long long w = reader.number("width");
  const long long h = reader.number("height");
  const long long maxval = reader.number("maxval");
  if (w < 1 || h < 1) throw ParseError("PGM header: zero dimension");
  if (maxval < 1) throw ParseError("PGM header: maxval must be positive");
  if (maxval > 255) throw UnsupportedFormat("16-bit PGM is not supported");
  reader.single_whitespace();

  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() - reader.pos() < n)
    throw ParseError("PGM raster truncated: expected " + std::to_string(n) +
                     " bytes, found " + std::to_string(bytes.size() - reader.pos()));
  auto first = bytes.begin() + static_cast<std::ptrdiff_t>(reader.pos());
  return GrayImage(static_cast<int>(w), static_cast<int>(h),
                   std::vector<std::uint8_t>(first, first + static_cast<std::ptrdiff_t>(n)));
}

Bytes write_pgm(const GrayImage& image) {
  const std::string header = "P5\n" + std::to_string(image.width()) + " " +
                             std::to_string(image.height()) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.insert(out.end(), image.data().begin(), image.data().end());
  return out;
}

GrayImage read_pgm_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open " + path.string());
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return read_pgm(bytes);
}

void write_pgm_file(const std::filesystem::path& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write " + path.string());
  const Bytes bytes = write_pgm(image);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::ios_base::failure("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Geometry

Mat2 Mat2::inverse() const {
  const double k = 1.0 / det();
  return {d * k, -b * k, -c * k, a * k};
}

Mat2 operator*(const Mat2& l, const Mat2& r) {
  return {l.a * r.a + l.b * r.c, l.a * r.b + l.b * r.d,
          l.c * r.a + l.d * r.c, l.c * r.b + l.d * r.d};
}

Mat2 rotation(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c, -s, s, c};
}

void AffineDeform::validate() const {
  if (!(lambda1 > 0) || !(lambda2 > 0) || !std::isfinite(lambda1) ||
      !std::isfinite(lambda2))
    throw InvalidArgument("deformation scales must be positive");
  if (!std::isfinite(theta) || !std::isfinite(phi) || !std::isfinite(tx) ||
      !std::isfinite(ty))
    throw InvalidArgument("deformation parameters must be finite");
}

AffineDeform AffineDeform::inverse_linear() const {
  // (R(t) R(-p) D R(p))^-1 = R(-p) D^-1 R(p) R(-t) = R(-t) R(-(p-t)) D^-1 R(p-t)
  constexpr double two_pi = 2 * std::numbers::pi;
  auto wrap = [](double a) {
    a = std::fmod(a, two_pi);
    return a < 0 ? a + two_pi : a;
  };
  AffineDeform inv;
  inv.theta = wrap(-theta);
  inv.phi = wrap(phi - theta);
  inv.lambda1 = 1.0 / lambda1;
  inv.lambda2 = 1.0 / lambda2;
  return inv;
}

Mat2 deform_matrix(const AffineDeform& d) {
  const Mat2 scale{d.lambda1, 0, 0, d.lambda2};
  return rotation(d.theta) * rotation(-d.phi) * scale * rotation(d.phi);
}

AffineDeform sample_deformation(Rng& rng, const DeformRanges& r) {
  auto angle = [&rng](double lo, double hi) {
    return hi > lo ? rng.uniform(lo, hi) : lo;
  };
  AffineDeform d;
  d.theta = angle(r.theta_min, r.theta_max);
  d.phi = angle(r.phi_min, r.phi_max);
  if (r.lambda_max > r.lambda_min) {
    std::uniform_real_distribution<double> scale(
        r.lambda_min, std::nextafter(r.lambda_max, r.lambda_max + 1));
    d.lambda1 = scale(rng.engine());
    d.lambda2 = scale(rng.engine());
  } else {
    d.lambda1 = d.lambda2 = r.lambda_min;
  }
  return d;
}

WarpGeometry::WarpGeometry(const AffineDeform& d, int src_w, int src_h,
                           int out_w, int out_h)
    : forward_(deform_matrix(d)),
      inverse_(forward_.inverse()),
      src_center_{(src_w - 1) / 2.0, (src_h - 1) / 2.0},
      out_center_{(out_w - 1) / 2.0, (out_h - 1) / 2.0},
      shift_{d.tx, d.ty} {}

Vec2 WarpGeometry::to_source(Vec2 p) const {
  const Vec2 q = inverse_ * Vec2{p.x - out_center_.x, p.y - out_center_.y};
  return {q.x + src_center_.x + shift_.x, q.y + src_center_.y + shift_.y};
}

Vec2 WarpGeometry::to_view(Vec2 s) const {
  const Vec2 q = forward_ * Vec2{s.x - src_center_.x - shift_.x,
                                 s.y - src_center_.y - shift_.y};
  return {q.x + out_center_.x, q.y + out_center_.y};
}

namespace {

std::uint8_t clamp_round(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

GrayImage warp_image(const GrayImage& src, const AffineDeform& d, int out_w,
                     int out_h) {
  if (src.empty()) throw InvalidArgument("cannot warp an empty image");
  if (out_w < 1 || out_h < 1) throw InvalidArgument("output size must be positive");
  d.validate();

  const WarpGeometry geom(d, src.width(), src.height(), out_w, out_h);
  const double max_x = src.width() - 1;
  const double max_y = src.height() - 1;
  constexpr double eps = 1e-9;

  GrayImage out(out_w, out_h, kBackgroundFill);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      Vec2 s = geom.to_source({static_cast<double>(x), static_cast<double>(y)});
      if (s.x < -eps || s.y < -eps || s.x > max_x + eps || s.y > max_y + eps)
        continue;
      s.x = std::clamp(s.x, 0.0, max_x);
      s.y = std::clamp(s.y, 0.0, max_y);
      const int x0 = static_cast<int>(s.x);
      const int y0 = static_cast<int>(s.y);
      const double fx = s.x - x0;
      const double fy = s.y - y0;
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const int y1 = std::min(y0 + 1, src.height() - 1);
      const double top = src(x0, y0) + fx * (src(x1, y0) - src(x0, y0));
      const double bottom = src(x0, y1) + fx * (src(x1, y1) - src(x0, y1));
      out(x, y) = clamp_round(top + fy * (bottom - top));
    }
  }
  return out;
}

GrayImage add_noise(const GrayImage& img, double sigma, Rng& rng) {
  if (!(sigma >= 0)) throw InvalidArgument("noise sigma must be non-negative");
  if (sigma == 0) return img;
  GrayImage out = img;
  std::normal_distribution<double> noise(0.0, sigma);
  for (auto& v : out.data()) v = clamp_round(v + noise(rng.engine()));
  return out;
}

GrayImage box_smooth(const GrayImage& img, int radius) {
  if (radius < 0) throw InvalidArgument("smoothing radius must be non-negative");
  if (radius == 0 || img.empty()) return img;
  const int w = img.width();
  const int h = img.height();
  // Summed-area table with a zero top row and left column.
  std::vector<std::uint32_t> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0);
  auto s = [&](int x, int y) -> std::uint32_t& {
    return sat[static_cast<std::size_t>(y) * (w + 1) + x];
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      s(x + 1, y + 1) = img(x, y) + s(x, y + 1) + s(x + 1, y) - s(x, y);

  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - radius);
    const int y1 = std::min(h, y + radius + 1);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - radius);
      const int x1 = std::min(w, x + radius + 1);
      const std::uint32_t sum = s(x1, y1) - s(x0, y1) - s(x1, y0) + s(x0, y0);
      const std::uint32_t n = static_cast<std::uint32_t>((x1 - x0) * (y1 - y0));
      out(x, y) = static_cast<std::uint8_t>((sum + n / 2) / n);
    }
  }
  return out;
}

}  // namespace ferns
