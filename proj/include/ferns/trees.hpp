#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ferns/ferns.hpp"

namespace ferns {

// Complete binary tree of random tests, stored breadth-first: node i has
// children 2i+1 (test bit 0) and 2i+2 (test bit 1).
struct RandomTree {
  int depth = 0;
  std::vector<FeatureTest> node_tests;  // 2^depth - 1 entries

  friend bool operator==(const RandomTree&, const RandomTree&) = default;
};

std::uint32_t eval_tree(const GrayImage& img, const Keypoint& center, const RandomTree& tree,
                        OpCounter* counter = nullptr);

std::vector<RandomTree> make_random_trees(std::size_t t, int depth, int patch_size, Rng& rng);

// Tree whose every node on level l uses the fern's test l. It reaches the
// same leaf as the fern on every patch.
RandomTree tree_from_fern(const Fern& fern);

class TreeForest {
 public:
  TreeForest() = default;
  TreeForest(ClassSet classes, std::vector<RandomTree> trees,
             Combination combination = Combination::Average);

  std::size_t num_classes() const noexcept { return classes_.size(); }
  std::size_t num_trees() const noexcept { return trees_.size(); }
  int depth() const noexcept { return trees_.empty() ? 0 : trees_[0].depth; }
  int patch_size() const noexcept { return classes_.patch_size; }
  Combination combination() const noexcept { return combination_; }
  void set_combination(Combination c) noexcept { combination_ = c; }

  const ClassSet& classes() const noexcept { return classes_; }
  const std::vector<RandomTree>& trees() const noexcept { return trees_; }
  const LeafTables& tables() const noexcept { return tables_; }

  // P(c | leaf) of one tree; sums to one over classes.
  std::vector<double> leaf_posterior(std::size_t tree, std::uint32_t leaf) const {
    return tables_.posterior_row(tree, leaf);
  }

  void accumulate(const GrayImage& patch, std::uint32_t label);
  void rebuild() { tables_.rebuild(); }
  void merge(const TreeForest& shard);
  TreeForest truncated(std::size_t k) const;

  void leaves(const GrayImage& img, const Keypoint& center, std::span<std::uint32_t> out,
              OpCounter* counter = nullptr) const;

  friend bool operator==(const TreeForest&, const TreeForest&) = default;

 private:
  friend TreeForest load_forest(std::span<const std::uint8_t> bytes);

  ClassSet classes_;
  std::vector<RandomTree> trees_;
  Combination combination_ = Combination::Average;
  LeafTables tables_;
};

TreeForest train_forest(TreeForest forest, std::span<const PatchSample> samples);

// Average: argmax_c mean_t P_t(c | leaf_t).
// NaiveBayes: argmax_c log_prior[c] + sum_t log P_t(c | leaf_t).
// Ties go to the lowest class id.
ClassScore classify_forest(const TreeForest& forest, const GrayImage& img,
                           const Keypoint& center, OpCounter* counter = nullptr);

// "RTRFMDL1" little-endian forest file.
Bytes save_forest(const TreeForest& forest);
TreeForest load_forest(std::span<const std::uint8_t> bytes);

}  // namespace ferns
