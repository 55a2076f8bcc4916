#include "ferns/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>
#include <thread>

#include "ferns/errors.hpp"

namespace ferns {
namespace {

AffineDeform draw_deform(const DatasetSpec& spec, Stream stream, std::uint64_t view_id,
                         Rng& rng) {
  if (stream == Stream::Test) return sample_deformation(rng, spec.ranges);
  DeformRanges r = spec.ranges;
  const std::size_t degrees = std::max<std::size_t>(spec.rotation_degrees, 1);
  const std::size_t per = std::max<std::size_t>(spec.views_per_degree, 1);
  const double bucket = (r.theta_max - r.theta_min) / static_cast<double>(degrees);
  const double lo = r.theta_min + static_cast<double>(view_id / per) * bucket;
  r.theta_min = lo;
  r.theta_max = lo + bucket;
  return sample_deformation(rng, r);
}

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

std::string_view stream_label(Stream s) {
  return s == Stream::Training ? "training" : "test";
}

std::size_t view_count(const DatasetSpec& spec, Stream stream) {
  return stream == Stream::Training ? spec.training_views() : spec.test_views;
}

AffineDeform view_deform(const DatasetSpec& spec, Stream stream, std::uint64_t seed,
                         std::uint64_t view_id) {
  Rng rng = Rng::derive(seed, stream_label(stream), view_id);
  return draw_deform(spec, stream, view_id, rng);
}

View render_view(const GrayImage& img, const DatasetSpec& spec, Stream stream,
                 std::uint64_t seed, std::uint64_t view_id) {
  Rng rng = Rng::derive(seed, stream_label(stream), view_id);
  View v;
  v.view_id = view_id;
  v.deform = draw_deform(spec, stream, view_id, rng);
  v.image = warp_image(img, v.deform, img.width(), img.height());
  if (stream == Stream::Test) {
    v.noise_sigma = spec.noise_sigma;
    v.image = add_noise(v.image, spec.noise_sigma, rng);
  }
  if (spec.smooth_radius > 0) v.image = box_smooth(v.image, spec.smooth_radius);
  return v;
}

DatasetStats generate_set(const GrayImage& img, const ClassSet& classes,
                          const DatasetSpec& spec, Stream stream, std::uint64_t seed,
                          const SampleSink& sink, const GenerationOptions& options) {
  if (classes.size() == 0) throw InvalidArgument("class set is empty");
  if (stream == Stream::Training && spec.views_per_degree < 1)
    throw InvalidArgument("views_per_degree must be at least 1");
  if (stream == Stream::Test && spec.test_views < 1)
    throw InvalidArgument("test_views must be at least 1");
  if (spec.noise_sigma < 0) throw InvalidArgument("noise sigma must be non-negative");

  const std::size_t total = view_count(spec, stream);
  const int half = classes.patch_size / 2;
  const int size = classes.patch_size;

  DatasetStats stats;
  stats.per_class.assign(classes.size(), 0);

  struct ViewResult {
    std::vector<PatchSample> samples;
    std::vector<std::uint32_t> skipped;
  };
  auto process = [&](std::uint64_t id) {
    ViewResult out;
    if (!options.render) {
      view_deform(spec, stream, seed, id);
      return out;
    }
    View v = render_view(img, spec, stream, seed, id);
    const WarpGeometry geom(v.deform, img.width(), img.height(), img.width(), img.height());
    for (std::uint32_t c = 0; c < classes.size(); ++c) {
      const Keypoint& k = classes.keypoints[c];
      const Vec2 p = geom.to_view({k.x, k.y});
      const long x = std::lround(p.x);
      const long y = std::lround(p.y);
      if (x - half < 0 || y - half < 0 || x + half >= v.image.width() ||
          y + half >= v.image.height()) {
        out.skipped.push_back(c);
        continue;
      }
      out.samples.push_back({v.image.crop(static_cast<int>(x) - half, static_cast<int>(y) - half, size, size),
                             c, v.deform, id});
    }
    return out;
  };

  const unsigned threads = std::max(1u, options.threads);
  const std::size_t block = threads == 1 ? 1 : threads * 4;
  std::vector<ViewResult> results;
  for (std::size_t start = 0; start < total; start += block) {
    const std::size_t n = std::min(block, total - start);
    results.assign(n, {});
    if (threads == 1) {
      results[0] = process(start);
    } else {
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
          for (std::size_t i = t; i < n; i += threads) results[i] = process(start + i);
        });
      for (auto& th : pool) th.join();
    }
    for (std::size_t i = 0; i < n; ++i) {
      ++stats.views;
      for (std::uint32_t c : results[i].skipped) stats.skips.emplace_back(start + i, c);
      for (PatchSample& s : results[i].samples) {
        ++stats.per_class[s.label];
        ++stats.samples;
        sink(std::move(s));
      }
    }
  }
  return stats;
}

std::vector<PatchSample> collect_set(const GrayImage& img, const ClassSet& classes,
                                     const DatasetSpec& spec, Stream stream,
                                     std::uint64_t seed, DatasetStats* stats,
                                     unsigned threads) {
  std::vector<PatchSample> out;
  DatasetStats s = generate_set(img, classes, spec, stream, seed,
                                [&](PatchSample&& p) { out.push_back(std::move(p)); },
                                {threads, true});
  if (stats) *stats = std::move(s);
  return out;
}

std::string manifest_row(std::uint64_t view_id, const AffineDeform& d, double noise_sigma) {
  std::string row = std::to_string(view_id);
  for (double v : {d.theta, d.phi, d.lambda1, d.lambda2, d.tx, d.ty, noise_sigma}) {
    row += ',';
    row += format_double(v);
  }
  return row;
}

void dump_views(const std::filesystem::path& dir, const GrayImage& img,
                const DatasetSpec& spec, Stream stream, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) throw std::ios_base::failure("cannot write manifest in " + dir.string());
  manifest << kManifestHeader << '\n';
  for (std::uint64_t id = 0; id < view_count(spec, stream); ++id) {
    const View v = render_view(img, spec, stream, seed, id);
    write_pgm_file(dir / ("view_" + std::to_string(id) + ".pgm"), v.image);
    manifest << manifest_row(id, v.deform, v.noise_sigma) << '\n';
  }
}

GrayImage make_textured_image(int width, int height, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, "textured-image");
  std::vector<double> acc(static_cast<std::size_t>(width) * height);
  auto at = [&](int x, int y) -> double& { return acc[static_cast<std::size_t>(y) * width + x]; };

  // Slow background gradient.
  const double gx = rng.uniform(-0.3, 0.3);
  const double gy = rng.uniform(-0.3, 0.3);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) at(x, y) = 128 + gx * (x - width / 2.0) + gy * (y - height / 2.0);

  const double area = static_cast<double>(width) * height;
  // Rotated rectangles and ellipses with flat random shading.
  const int shapes = static_cast<int>(area / 900);
  for (int i = 0; i < shapes; ++i) {
    const double cx = rng.uniform(0, width);
    const double cy = rng.uniform(0, height);
    const double rx = rng.uniform(4, 26);
    const double ry = rng.uniform(4, 26);
    const double a = rng.uniform(0, std::numbers::pi);
    const double level = rng.uniform(0, 255);
    const bool ellipse = rng.uniform(0, 1) < 0.5;
    const double ca = std::cos(a), sa = std::sin(a);
    const int r = static_cast<int>(std::ceil(std::max(rx, ry)));
    for (int y = std::max(0, static_cast<int>(cy) - r); y < std::min(height, static_cast<int>(cy) + r + 1); ++y)
      for (int x = std::max(0, static_cast<int>(cx) - r); x < std::min(width, static_cast<int>(cx) + r + 1); ++x) {
        const double u = ((x - cx) * ca + (y - cy) * sa) / rx;
        const double v = (-(x - cx) * sa + (y - cy) * ca) / ry;
        const bool inside = ellipse ? u * u + v * v <= 1 : std::abs(u) <= 1 && std::abs(v) <= 1;
        if (inside) at(x, y) = level;
      }
  }
  // Small Gaussian blobs, bright or dark.
  const int blobs = static_cast<int>(area / 400);
  for (int i = 0; i < blobs; ++i) {
    const double cx = rng.uniform(0, width);
    const double cy = rng.uniform(0, height);
    const double s = rng.uniform(1.0, 3.0);
    const double amp = rng.uniform(60, 140) * (rng.uniform(0, 1) < 0.5 ? -1 : 1);
    const int r = static_cast<int>(std::ceil(3 * s));
    for (int y = std::max(0, static_cast<int>(cy) - r); y < std::min(height, static_cast<int>(cy) + r + 1); ++y)
      for (int x = std::max(0, static_cast<int>(cx) - r); x < std::min(width, static_cast<int>(cx) + r + 1); ++x) {
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        at(x, y) += amp * std::exp(-d2 / (2 * s * s));
      }
  }
  GrayImage img(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double v = at(x, y) + rng.normal(0, 6);
      img(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  return box_smooth(img, 1);
}

}  // namespace ferns
