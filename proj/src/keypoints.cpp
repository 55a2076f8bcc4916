#include "ferns/keypoints.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>

#include "ferns/errors.hpp"

namespace ferns {
namespace {

constexpr int kRing = 2;

// Scanline-first total order used for every tie.
bool scanline_less(const Keypoint& a, const Keypoint& b) {
  if (a.y != b.y) return a.y < b.y;
  return a.x < b.x;
}

}  // namespace

std::vector<Keypoint> detect_keypoints(const GrayImage& img,
                                       std::size_t max_count, int patch_size) {
  if (patch_size < 1 || patch_size % 2 == 0)
    throw InvalidArgument("patch size must be odd and positive");
  const int w = img.width();
  const int h = img.height();
  if (w <= patch_size || h <= patch_size || max_count == 0) return {};

  const GrayImage s = box_smooth(img, 1);
  // Eight times the response, kept integral so comparisons are exact.
  std::vector<int> resp(static_cast<std::size_t>(w) * h, -1);
  auto r = [&](int x, int y) -> int& {
    return resp[static_cast<std::size_t>(y) * w + x];
  };
  for (int y = kRing; y < h - kRing; ++y) {
    for (int x = kRing; x < w - kRing; ++x) {
      const int ring = s(x - kRing, y - kRing) + s(x, y - kRing) +
                       s(x + kRing, y - kRing) + s(x - kRing, y) +
                       s(x + kRing, y) + s(x - kRing, y + kRing) +
                       s(x, y + kRing) + s(x + kRing, y + kRing);
      r(x, y) = std::abs(8 * s(x, y) - ring);
    }
  }

  const int margin = std::max(patch_size / 2, kRing);
  std::vector<Keypoint> out;
  for (int y = margin; y < h - margin; ++y) {
    for (int x = margin; x < w - margin; ++x) {
      const int v = r(x, y);
      if (v <= 0) continue;
      // Plateaus keep their first pixel in scanline order.
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int n = r(x + dx, y + dy);
          const bool before = dy < 0 || (dy == 0 && dx < 0);
          if (before ? n >= v : n > v) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max)
        out.push_back({static_cast<double>(x), static_cast<double>(y), v / 8.0});
    }
  }

  std::stable_sort(out.begin(), out.end(), [](const Keypoint& a, const Keypoint& b) {
    if (a.response != b.response) return a.response > b.response;
    return scanline_less(a, b);
  });
  if (out.size() > max_count) out.resize(max_count);
  return out;
}

ClassSet select_stable_classes(const GrayImage& img, std::size_t h, Rng& rng,
                               const ClassSelectionOptions& options) {
  if (h < 1) throw InvalidArgument("at least one class is required");
  if (options.num_views < 1) throw InvalidArgument("at least one view is required");
  const int patch = options.patch_size;
  const std::size_t per_view =
      options.detections_per_view ? options.detections_per_view : 4 * h;

  const int w = img.width();
  const int ht = img.height();
  const int margin = patch / 2;
  std::vector<std::uint32_t> votes(static_cast<std::size_t>(w) * ht, 0);
  std::vector<double> strength(votes.size(), 0.0);

  for (std::size_t v = 0; v < options.num_views; ++v) {
    const AffineDeform d = sample_deformation(rng, options.ranges);
    const GrayImage view = warp_image(img, d, w, ht);
    const WarpGeometry geom(d, w, ht, w, ht);
    for (const Keypoint& k : detect_keypoints(view, per_view, patch)) {
      const Vec2 src = geom.to_source({k.x, k.y});
      const long x = std::lround(src.x);
      const long y = std::lround(src.y);
      if (x < margin || y < margin || x >= w - margin || y >= ht - margin)
        continue;
      const std::size_t i = static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x);
      votes[i] += 1;
      strength[i] += k.response;
    }
  }

  struct Candidate {
    int x, y;
    std::uint32_t votes;
    double strength;
  };
  std::vector<Candidate> candidates;
  for (int y = 0; y < ht; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (votes[i] > 0) candidates.push_back({x, y, votes[i], strength[i]});
    }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.votes != b.votes) return a.votes > b.votes;
              if (a.strength != b.strength) return a.strength > b.strength;
              if (a.y != b.y) return a.y < b.y;
              return a.x < b.x;
            });

  ClassSet classes;
  classes.patch_size = patch;
  const double min_sep2 = classes.min_separation() * classes.min_separation();
  for (const Candidate& c : candidates) {
    const bool clear = std::none_of(
        classes.keypoints.begin(), classes.keypoints.end(), [&](const Keypoint& k) {
          const double dx = k.x - c.x;
          const double dy = k.y - c.y;
          return dx * dx + dy * dy < min_sep2;
        });
    if (!clear) continue;
    classes.keypoints.push_back(
        {static_cast<double>(c.x), static_cast<double>(c.y), static_cast<double>(c.votes)});
    if (classes.size() == h) return classes;
  }
  throw InsufficientKeypoints(h, classes.size());
}

}  // namespace ferns
