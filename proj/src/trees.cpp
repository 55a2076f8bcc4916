#include "ferns/trees.hpp"

#include <cmath>
#include <string>

#include "binary_io.hpp"
#include "ferns/errors.hpp"

namespace ferns {
namespace {

constexpr std::string_view kForestMagic = "RTRFMDL1";
constexpr std::uint32_t kForestVersion = 1;

std::size_t node_count(int depth) { return (std::size_t{1} << depth) - 1; }

void validate_tree(const RandomTree& t, int depth, int half) {
  if (t.depth != depth || t.node_tests.size() != node_count(depth))
    throw InvalidArgument("trees must be complete and share one depth");
  for (const FeatureTest& ft : t.node_tests) {
    for (const Offset& o : {ft.d1, ft.d2})
      if (std::abs(o.dx) > half || std::abs(o.dy) > half)
        throw InvalidArgument("feature offset outside the patch");
    if (ft.d1 == ft.d2) throw InvalidArgument("feature test compares a pixel with itself");
  }
}

}  // namespace

std::uint32_t eval_tree(const GrayImage& img, const Keypoint& center, const RandomTree& tree,
                        OpCounter* counter) {
  std::size_t node = 0;
  for (int level = 0; level < tree.depth; ++level)
    node = 2 * node + 1 +
           static_cast<std::size_t>(eval_feature(img, center, tree.node_tests[node], counter));
  return static_cast<std::uint32_t>(node - node_count(tree.depth));
}

std::vector<RandomTree> make_random_trees(std::size_t t, int depth, int patch_size, Rng& rng) {
  if (t < 1) throw InvalidArgument("at least one tree is required");
  if (depth < 1 || depth > 24) throw InvalidArgument("tree depth must be in [1, 24]");
  std::vector<RandomTree> trees(t);
  for (RandomTree& tree : trees) {
    tree.depth = depth;
    tree.node_tests.resize(node_count(depth));
    for (FeatureTest& t : tree.node_tests) t = random_feature_test(patch_size, rng);
  }
  return trees;
}

RandomTree tree_from_fern(const Fern& fern) {
  RandomTree tree;
  tree.depth = static_cast<int>(fern.tests.size());
  tree.node_tests.resize(node_count(tree.depth));
  for (int level = 0; level < tree.depth; ++level) {
    const std::size_t first = node_count(level);
    for (std::size_t i = first; i < node_count(level + 1); ++i)
      tree.node_tests[i] = fern.tests[static_cast<std::size_t>(level)];
  }
  return tree;
}

TreeForest::TreeForest(ClassSet classes, std::vector<RandomTree> trees, Combination combination)
    : classes_(std::move(classes)), trees_(std::move(trees)), combination_(combination) {
  if (trees_.empty()) throw InvalidArgument("a forest needs at least one tree");
  const int d = trees_.front().depth;
  if (d < 1 || d > 24) throw InvalidArgument("tree depth must be in [1, 24]");
  for (const RandomTree& t : trees_) validate_tree(t, d, classes_.patch_size / 2);
  tables_ = LeafTables(trees_.size(), d, classes_.size());
}

void TreeForest::leaves(const GrayImage& img, const Keypoint& center,
                        std::span<std::uint32_t> out, OpCounter* counter) const {
  const int half = patch_size() / 2;
  const long cx = std::lround(center.x);
  const long cy = std::lround(center.y);
  if (cx - half < 0 || cy - half < 0 || cx + half >= img.width() || cy + half >= img.height())
    throw OutOfBounds("patch leaves the image");
  for (std::size_t t = 0; t < trees_.size(); ++t) out[t] = eval_tree(img, center, trees_[t], counter);
}

void TreeForest::accumulate(const GrayImage& patch, std::uint32_t label) {
  if (label >= num_classes())
    throw InvalidLabel("label " + std::to_string(label) + " not below class count " +
                       std::to_string(num_classes()));
  if (patch.width() < patch_size() || patch.height() < patch_size())
    throw InvalidPatch("patch smaller than " + std::to_string(patch_size()) + " pixels");
  const Keypoint c = patch_center(patch);
  for (std::size_t t = 0; t < trees_.size(); ++t)
    tables_.add(t, eval_tree(patch, c, trees_[t]), label);
  tables_.note_sample(label);
}

void TreeForest::merge(const TreeForest& shard) {
  if (shard.trees_ != trees_ || shard.classes_.size() != classes_.size())
    throw InvalidArgument("shards must share trees and classes");
  tables_.merge_counts(shard.tables_);
  tables_.rebuild();
}

TreeForest TreeForest::truncated(std::size_t k) const {
  TreeForest out;
  out.classes_ = classes_;
  out.combination_ = combination_;
  out.trees_.assign(trees_.begin(), trees_.begin() + static_cast<std::ptrdiff_t>(std::min(k, trees_.size())));
  out.tables_ = tables_.truncated(k);
  return out;
}

TreeForest train_forest(TreeForest forest, std::span<const PatchSample> samples) {
  for (const PatchSample& s : samples) forest.accumulate(s.patch, s.label);
  forest.rebuild();
  return forest;
}

ClassScore classify_forest(const TreeForest& forest, const GrayImage& img,
                           const Keypoint& center, OpCounter* counter) {
  std::vector<std::uint32_t> leaves(forest.num_trees());
  forest.leaves(img, center, leaves, counter);
  if (counter) counter->lookups += leaves.size();
  std::vector<double> scores(forest.num_classes());
  if (forest.combination() == Combination::Average)
    forest.tables().averaged_scores(leaves, scores);
  else
    forest.tables().posterior_log_scores(leaves, scores);
  const std::uint32_t best = argmax_lowest(scores);
  return {best, scores[best]};
}

Bytes save_forest(const TreeForest& forest) {
  detail::ByteWriter w;
  w.raw(kForestMagic);
  w.le(kForestVersion);
  w.le(static_cast<std::uint32_t>(forest.num_classes()));
  w.le(static_cast<std::uint32_t>(forest.num_trees()));
  w.le(static_cast<std::uint32_t>(forest.depth()));
  w.le(static_cast<std::uint32_t>(forest.patch_size()));
  w.le(static_cast<std::uint32_t>(forest.combination()));
  for (const Keypoint& k : forest.classes().keypoints) {
    w.le(static_cast<float>(k.x));
    w.le(static_cast<float>(k.y));
  }
  for (double lp : forest.tables().log_prior()) w.le(lp);
  for (const RandomTree& t : forest.trees())
    for (const FeatureTest& ft : t.node_tests) {
      w.le(static_cast<std::int16_t>(ft.d1.dx));
      w.le(static_cast<std::int16_t>(ft.d1.dy));
      w.le(static_cast<std::int16_t>(ft.d2.dx));
      w.le(static_cast<std::int16_t>(ft.d2.dy));
    }
  for (std::uint64_t c : forest.tables().counts()) w.le(c);
  for (double lp : forest.tables().log_lik()) w.le(lp);
  return w.take();
}

TreeForest load_forest(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  if (bytes.size() < kForestMagic.size() || r.raw(kForestMagic.size()) != kForestMagic)
    throw FormatError("not a forest model file (bad magic)");
  const auto version = r.le<std::uint32_t>();
  if (version != kForestVersion)
    throw FormatError("unsupported forest model version " + std::to_string(version));
  const auto h = r.le<std::uint32_t>();
  const auto t = r.le<std::uint32_t>();
  const auto d = r.le<std::uint32_t>();
  const auto patch = r.le<std::uint32_t>();
  const auto mode = r.le<std::uint32_t>();
  if (h < 1 || t < 1 || d < 1 || d > 24 || patch < 3 || patch % 2 == 0 || patch > 32767 ||
      mode > 1)
    throw CorruptModel("implausible forest header");

  const std::uint64_t nodes = node_count(static_cast<int>(d));
  const std::uint64_t cells = std::uint64_t{t} << d;
  const std::uint64_t expected = 16ull * h + 8ull * t * nodes + 16ull * cells * h;
  if (r.remaining() < expected) throw FormatError("forest file truncated");
  if (r.remaining() > expected) throw FormatError("trailing bytes after forest data");

  ClassSet classes;
  classes.patch_size = static_cast<int>(patch);
  classes.keypoints.resize(h);
  for (Keypoint& k : classes.keypoints) {
    k.x = r.le<float>();
    k.y = r.le<float>();
    if (!std::isfinite(k.x) || !std::isfinite(k.y)) throw CorruptModel("non-finite class location");
  }
  std::vector<double> log_prior(h);
  for (double& lp : log_prior) lp = r.le<double>();
  std::vector<RandomTree> trees(t);
  for (RandomTree& tree : trees) {
    tree.depth = static_cast<int>(d);
    tree.node_tests.resize(nodes);
    for (FeatureTest& ft : tree.node_tests) {
      ft.d1.dx = r.le<std::int16_t>();
      ft.d1.dy = r.le<std::int16_t>();
      ft.d2.dx = r.le<std::int16_t>();
      ft.d2.dy = r.le<std::int16_t>();
    }
  }
  std::vector<std::uint64_t> counts(cells * h);
  for (auto& c : counts) c = r.le<std::uint64_t>();
  std::vector<double> log_lik(cells * h);
  for (double& lp : log_lik) lp = r.le<double>();

  TreeForest forest;
  try {
    forest = TreeForest(std::move(classes), std::move(trees), static_cast<Combination>(mode));
  } catch (const InvalidArgument& e) {
    throw CorruptModel(e.what());
  }
  forest.tables_.assign(std::move(counts), std::move(log_lik), std::move(log_prior));
  return forest;
}

}  // namespace ferns
