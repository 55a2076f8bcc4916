#pragma once

// Test-only reference computations. Nothing here calls into the code paths
// it is used to check: pixels are read from the raw raster, leaf indices are
// packed through a binary string, and probabilities are recomputed from the
// raw sample stream in 50-digit arithmetic.

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ferns/ferns.hpp"
#include "ferns/trees.hpp"

namespace oracle {

using Big = boost::multiprecision::cpp_bin_float_50;

inline int raw_pixel(const ferns::GrayImage& img, int x, int y) {
  return img.data()[static_cast<std::size_t>(y) * static_cast<std::size_t>(img.width()) +
                    static_cast<std::size_t>(x)];
}

inline int bit(const ferns::GrayImage& patch, int cx, int cy, const ferns::FeatureTest& t) {
  return raw_pixel(patch, cx + t.d1.dx, cy + t.d1.dy) < raw_pixel(patch, cx + t.d2.dx, cy + t.d2.dy)
             ? 1
             : 0;
}

inline unsigned long pack_bits(const std::vector<int>& bits) {
  std::string s;
  for (int b : bits) s += b ? '1' : '0';
  return std::stoul(s, nullptr, 2);
}

inline unsigned long fern_leaf(const ferns::GrayImage& patch, const ferns::Fern& fern) {
  const int cx = patch.width() / 2, cy = patch.height() / 2;
  std::vector<int> bits;
  for (const auto& t : fern.tests) bits.push_back(bit(patch, cx, cy, t));
  return pack_bits(bits);
}

// Walks the tree node by node with explicit child arithmetic.
inline unsigned long tree_leaf(const ferns::GrayImage& patch, const ferns::RandomTree& tree) {
  const int cx = patch.width() / 2, cy = patch.height() / 2;
  std::vector<int> path;
  unsigned long node = 0;
  for (int level = 0; level < tree.depth; ++level) {
    const int b = bit(patch, cx, cy, tree.node_tests[node]);
    path.push_back(b);
    node = b ? 2 * node + 2 : 2 * node + 1;
  }
  return pack_bits(path);
}

// Normalized posterior prod_s P(leaf_s | c) * P(c) with uniform prior and
// (n + 1) / (N_c + 2^M) estimates counted directly from the samples.
inline std::vector<double> posterior(const std::vector<ferns::Fern>& ferns, std::size_t h,
                                     std::span<const ferns::PatchSample> training,
                                     const ferns::GrayImage& query) {
  const std::size_t m = ferns.front().tests.size();
  const Big leaves = Big(1ul << m);
  std::vector<Big> joint(h, Big(1) / Big(h));
  for (const auto& fern : ferns) {
    const unsigned long q = fern_leaf(query, fern);
    for (std::size_t c = 0; c < h; ++c) {
      std::size_t total = 0, hits = 0;
      for (const auto& s : training) {
        if (s.label != c) continue;
        ++total;
        if (fern_leaf(s.patch, fern) == q) ++hits;
      }
      joint[c] *= (Big(hits) + 1) / (Big(total) + leaves);
    }
  }
  Big z = 0;
  for (const Big& j : joint) z += j;
  std::vector<double> out;
  for (const Big& j : joint) out.push_back(static_cast<double>(j / z));
  return out;
}

// Fraction correct through an explicit confusion matrix.
inline double confusion_rate(const std::vector<std::uint32_t>& truth,
                             const std::vector<std::uint32_t>& predicted, std::size_t h) {
  std::vector<std::vector<std::size_t>> cm(h, std::vector<std::size_t>(h, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) ++cm[truth[i]][predicted[i]];
  std::size_t diag = 0, all = 0;
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < h; ++c) {
      all += cm[r][c];
      if (r == c) diag += cm[r][c];
    }
  return static_cast<double>(diag) / static_cast<double>(all);
}

}  // namespace oracle
