#pragma once

#include <cstddef>
#include <vector>

#include "ferns/image.hpp"
#include "ferns/rng.hpp"

namespace ferns {

struct Keypoint {
  double x = 0;
  double y = 0;
  double response = 0;

  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

// The classes of the recognizer: the index of a keypoint is its label.
struct ClassSet {
  std::vector<Keypoint> keypoints;
  int patch_size = 31;

  std::size_t size() const noexcept { return keypoints.size(); }
  double min_separation() const noexcept { return patch_size / 2.0; }

  friend bool operator==(const ClassSet&, const ClassSet&) = default;
};

// Center-versus-ring contrast on the radius-1 smoothed image:
//   response = |s(x,y) - mean of s at the 8 points (x+-2, y+-2)|
// followed by 3x3 non-maximum suppression. Keypoints whose patch would
// leave the image are dropped. Sorted by response descending, then (y, x).
std::vector<Keypoint> detect_keypoints(const GrayImage& img,
                                       std::size_t max_count,
                                       int patch_size = 31);

struct ClassSelectionOptions {
  int patch_size = 31;
  std::size_t num_views = 50;
  // Detections kept per warped view; 0 means 4 * h.
  std::size_t detections_per_view = 0;
  DeformRanges ranges{};
};

// Detects keypoints in randomly warped copies of img, maps every detection
// back to the reference frame and votes into 1-pixel bins. Returns the h
// most-voted locations at least patch_size/2 apart, ordered by votes (ties
// by summed detector response, then scanline order).
//
// Throws InsufficientKeypoints when fewer than h locations survive.
ClassSet select_stable_classes(const GrayImage& img, std::size_t h, Rng& rng,
                               const ClassSelectionOptions& options = {});

}  // namespace ferns
