#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ferns/image.hpp"
#include "ferns/keypoints.hpp"
#include "ferns/leaf_tables.hpp"
#include "ferns/rng.hpp"
#include "ferns/sample.hpp"

namespace ferns {

struct Offset {
  int dx = 0;
  int dy = 0;
  friend bool operator==(const Offset&, const Offset&) = default;
};

// Binary test I(center + d1) < I(center + d2).
struct FeatureTest {
  Offset d1;
  Offset d2;
  friend bool operator==(const FeatureTest&, const FeatureTest&) = default;
};

// A flat group of M tests; their bits, test 0 most significant, index one of
// 2^M leaves.
struct Fern {
  std::vector<FeatureTest> tests;
  friend bool operator==(const Fern&, const Fern&) = default;
};

// Optional instrumentation for the per-patch cost contract.
struct OpCounter {
  std::uint64_t comparisons = 0;
  std::uint64_t lookups = 0;
};

int eval_feature(const GrayImage& img, const Keypoint& center, const FeatureTest& t,
                 OpCounter* counter = nullptr);

std::uint32_t eval_fern(const GrayImage& img, const Keypoint& center, const Fern& fern,
                        OpCounter* counter = nullptr);

// Offsets uniform over the patch square, redrawn until d1 != d2.
FeatureTest random_feature_test(int patch_size, Rng& rng);

std::vector<Fern> make_random_ferns(std::size_t s, std::size_t m, int patch_size, Rng& rng);

class FernModel {
 public:
  FernModel() = default;
  // Untrained model; every leaf starts at 1 / 2^M.
  FernModel(ClassSet classes, std::vector<Fern> ferns);

  std::size_t num_classes() const noexcept { return classes_.size(); }
  std::size_t num_ferns() const noexcept { return ferns_.size(); }
  std::size_t fern_size() const noexcept { return ferns_.empty() ? 0 : ferns_[0].tests.size(); }
  int patch_size() const noexcept { return classes_.patch_size; }

  const ClassSet& classes() const noexcept { return classes_; }
  const std::vector<Fern>& ferns() const noexcept { return ferns_; }
  const LeafTables& tables() const noexcept { return tables_; }

  // Adds one sample to the counts without rebuilding the tables.
  void accumulate(const GrayImage& patch, std::uint32_t label);
  void rebuild() { tables_.rebuild(); }

  // Adds another shard's counts (same ferns and classes) and rebuilds.
  void merge(const FernModel& shard);

  // The model restricted to its first k ferns.
  FernModel truncated(std::size_t k) const;

  // Leaf reached by every fern for the patch around center.
  void leaves(const GrayImage& img, const Keypoint& center, std::span<std::uint32_t> out,
              OpCounter* counter = nullptr) const;

  friend bool operator==(const FernModel&, const FernModel&) = default;

 private:
  friend FernModel load_model(std::span<const std::uint8_t> bytes);

  ClassSet classes_;
  std::vector<Fern> ferns_;
  LeafTables tables_;
};

// Accumulates every sample and rebuilds the tables once.
FernModel train(FernModel model, std::span<const PatchSample> samples);

// argmax_c log_prior[c] + sum_s log P(leaf_s | c); ties to the lowest id.
ClassScore classify(const FernModel& model, const GrayImage& img, const Keypoint& center,
                    OpCounter* counter = nullptr);

// Same leaves, combined by averaging the per-fern class posteriors.
ClassScore classify_averaged(const FernModel& model, const GrayImage& img,
                             const Keypoint& center);

// Normalized class posterior of classify's scores.
std::vector<double> posterior(const FernModel& model, const GrayImage& img,
                              const Keypoint& center);

// Center pixel of a stand-alone patch.
inline Keypoint patch_center(const GrayImage& patch) {
  return {static_cast<double>(patch.width() / 2), static_cast<double>(patch.height() / 2), 0};
}

// "FERNMDL1" little-endian model file.
Bytes save_model(const FernModel& model);
FernModel load_model(std::span<const std::uint8_t> bytes);

}  // namespace ferns
