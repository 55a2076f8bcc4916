#pragma once

#include <vector>

#include "ferns/ferns.hpp"

namespace testing_helpers {

inline ferns::ClassSet dummy_classes(std::size_t h, int patch_size) {
  ferns::ClassSet cs;
  cs.patch_size = patch_size;
  for (std::size_t i = 0; i < h; ++i)
    cs.keypoints.push_back({double(patch_size + i), double(patch_size), 0});
  return cs;
}

inline ferns::GrayImage random_patch(int size, ferns::Rng& rng) {
  ferns::GrayImage p(size, size);
  for (auto& v : p.data()) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  return p;
}

// Random patches with labels drawn uniformly from [0, h).
inline std::vector<ferns::PatchSample> random_samples(std::size_t n, std::size_t h, int size,
                                                      ferns::Rng& rng) {
  std::vector<ferns::PatchSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    ferns::PatchSample s;
    s.patch = random_patch(size, rng);
    s.label = static_cast<std::uint32_t>(rng.uniform_int(0, static_cast<int>(h) - 1));
    s.view_id = i;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace testing_helpers
