#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "ferns/errors.hpp"
#include "ferns/trees.hpp"
#include "helpers.hpp"
#include "oracle.hpp"

using namespace ferns;
using testing_helpers::dummy_classes;
using testing_helpers::random_patch;
using testing_helpers::random_samples;

namespace {

TreeForest trained_forest(std::size_t t, int depth, std::size_t h, int patch, std::size_t n,
                          std::uint64_t seed, Combination mode) {
  Rng rng(seed);
  TreeForest f(dummy_classes(h, patch), make_random_trees(t, depth, patch, rng), mode);
  return train_forest(std::move(f), random_samples(n, h, patch, rng));
}

}  // namespace

TEST_SUITE("rt_baseline") {

TEST_CASE("constant patch reaches the leftmost leaf") {
  Rng rng(1);
  const auto trees = make_random_trees(3, 5, 11, rng);
  const GrayImage flat(11, 11, std::uint8_t{40});
  for (const auto& t : trees) CHECK(eval_tree(flat, patch_center(flat), t) == 0);
  CHECK(trees[0].node_tests.size() == 31);
}

TEST_CASE("tree with level-shared tests equals the fern") {
  Rng rng(2);
  const auto ferns = make_random_ferns(10, 6, 15, rng);
  for (int i = 0; i < 1000; ++i) {
    const GrayImage p = random_patch(15, rng);
    const Fern& f = ferns[static_cast<std::size_t>(i) % ferns.size()];
    CHECK(eval_tree(p, patch_center(p), tree_from_fern(f)) == eval_fern(p, patch_center(p), f));
  }
}

TEST_CASE("eval_tree agrees with explicit path simulation") {
  Rng rng(3);
  const auto trees = make_random_trees(5, 7, 13, rng);
  for (int i = 0; i < 300; ++i) {
    const GrayImage p = random_patch(13, rng);
    for (const auto& t : trees) CHECK(eval_tree(p, patch_center(p), t) == oracle::tree_leaf(p, t));
  }
}

TEST_CASE("training: empty, single sample, permutation") {
  Rng rng(4);
  const TreeForest empty(dummy_classes(3, 9), make_random_trees(2, 3, 9, rng));
  for (double lp : empty.tables().log_lik()) CHECK(std::exp(lp) == doctest::Approx(1.0 / 8));

  const GrayImage p = random_patch(9, rng);
  const TreeForest one = train_forest(empty, std::vector<PatchSample>{{p, 0, {}, 0}});
  const auto leaf = eval_tree(p, patch_center(p), one.trees()[0]);
  const auto& t = one.tables();
  for (std::size_t l = 0; l < 8; ++l)
    for (std::size_t c = 0; c < 3; ++c)
      CHECK(t.counts()[t.index(0, l, c)] == ((l == leaf && c == 0) ? 1u : 0u));

  auto samples = random_samples(150, 3, 9, rng);
  const TreeForest a = train_forest(empty, samples);
  std::reverse(samples.begin(), samples.end());
  CHECK(train_forest(empty, samples) == a);
}

TEST_CASE("leaf posteriors are normalized over classes") {
  const TreeForest f = trained_forest(4, 4, 5, 11, 200, 6, Combination::NaiveBayes);
  for (std::size_t t = 0; t < 4; ++t)
    for (std::uint32_t leaf = 0; leaf < 16; ++leaf) {
      const auto row = f.leaf_posterior(t, leaf);
      double sum = 0;
      for (double v : row) sum += v;
      CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
}

TEST_CASE("combination rules on hand-computed posteriors") {
  const std::vector<double> flat_prior{std::log(0.5), std::log(0.5)};
  auto run = [&](std::vector<std::vector<double>> p, Combination mode) {
    return combine_posteriors(p, mode, flat_prior);
  };
  // Both modes agree.
  auto avg = run({{0.6, 0.4}, {0.1, 0.9}}, Combination::Average);
  auto nb = run({{0.6, 0.4}, {0.1, 0.9}}, Combination::NaiveBayes);
  CHECK(avg.class_id == 1);
  CHECK(avg.log_score == doctest::Approx(0.65));
  CHECK(nb.class_id == 1);
  CHECK(std::exp(nb.log_score - flat_prior[1]) == doctest::Approx(0.36));

  avg = run({{0.9, 0.1}, {0.35, 0.65}}, Combination::Average);
  nb = run({{0.9, 0.1}, {0.35, 0.65}}, Combination::NaiveBayes);
  CHECK(avg.class_id == 0);
  CHECK(avg.log_score == doctest::Approx(0.625));
  CHECK(nb.class_id == 0);
  CHECK(std::exp(nb.log_score - flat_prior[0]) == doctest::Approx(0.315));

  // Products 0.18 vs 0.08: class 0 in both modes. With two classes and two
  // units the rules cannot disagree (a + b > 1 iff ab > (1-a)(1-b)).
  avg = run({{0.9, 0.1}, {0.2, 0.8}}, Combination::Average);
  nb = run({{0.9, 0.1}, {0.2, 0.8}}, Combination::NaiveBayes);
  CHECK(avg.class_id == 0);
  CHECK(avg.log_score == doctest::Approx(0.55));
  CHECK(nb.class_id == 0);
  CHECK(std::exp(nb.log_score - flat_prior[0]) == doctest::Approx(0.18));

  // Three units where the rules do disagree: means 0.5167 vs 0.4833,
  // products 0.0735 vs 0.0765.
  avg = run({{0.7, 0.3}, {0.7, 0.3}, {0.15, 0.85}}, Combination::Average);
  nb = run({{0.7, 0.3}, {0.7, 0.3}, {0.15, 0.85}}, Combination::NaiveBayes);
  CHECK(avg.class_id == 0);
  CHECK(avg.log_score == doctest::Approx(1.55 / 3));
  CHECK(nb.class_id == 1);
  CHECK(std::exp(nb.log_score - flat_prior[1]) == doctest::Approx(0.0765));
}

TEST_CASE("classify_forest equals combining the leaf posteriors") {
  for (Combination mode : {Combination::Average, Combination::NaiveBayes}) {
    const TreeForest f = trained_forest(6, 5, 4, 13, 400, 7, mode);
    Rng rng(8);
    for (int i = 0; i < 200; ++i) {
      const GrayImage p = random_patch(13, rng);
      std::vector<std::vector<double>> rows;
      for (std::size_t t = 0; t < f.num_trees(); ++t)
        rows.push_back(f.leaf_posterior(t, eval_tree(p, patch_center(p), f.trees()[t])));
      const ClassScore want = combine_posteriors(rows, mode, f.tables().log_prior());
      const ClassScore got = classify_forest(f, p, patch_center(p));
      CHECK(got.class_id == want.class_id);
      CHECK(got.log_score == doctest::Approx(want.log_score).epsilon(1e-12));
    }
  }
}

TEST_CASE("a single tree gives the same label in both modes") {
  TreeForest f = trained_forest(1, 6, 6, 13, 300, 9, Combination::Average);
  Rng rng(10);
  for (int i = 0; i < 300; ++i) {
    const GrayImage p = random_patch(13, rng);
    f.set_combination(Combination::Average);
    const auto a = classify_forest(f, p, patch_center(p)).class_id;
    f.set_combination(Combination::NaiveBayes);
    CHECK(classify_forest(f, p, patch_center(p)).class_id == a);
  }
}

TEST_CASE("forest classification cost") {
  const TreeForest f = trained_forest(12, 7, 3, 15, 30, 11, Combination::NaiveBayes);
  Rng rng(12);
  const GrayImage p = random_patch(15, rng);
  OpCounter counter;
  classify_forest(f, p, patch_center(p), &counter);
  CHECK(counter.comparisons == 12 * 7);
  CHECK(counter.lookups == 12);
}

TEST_CASE("forest file round trip and validation") {
  const TreeForest f = trained_forest(3, 4, 5, 11, 120, 13, Combination::NaiveBayes);
  const Bytes bytes = save_forest(f);
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "RTRFMDL1");
  const TreeForest g = load_forest(bytes);
  CHECK(g.combination() == Combination::NaiveBayes);
  CHECK(g.trees() == f.trees());
  CHECK(save_forest(g) == bytes);
  Rng rng(14);
  for (int i = 0; i < 200; ++i) {
    const GrayImage p = random_patch(11, rng);
    CHECK(classify_forest(f, p, patch_center(p)).log_score ==
          classify_forest(g, p, patch_center(p)).log_score);
  }
  Bytes bad = bytes;
  bad[3] = 'X';
  CHECK_THROWS_AS(load_forest(bad), FormatError);
  CHECK_THROWS_AS(load_forest(Bytes(bytes.begin(), bytes.end() - 3)), FormatError);
  bad = bytes;
  bad[28] = 7;  // combination mode
  CHECK_THROWS_AS(load_forest(bad), CorruptModel);
  CHECK_THROWS_AS(load_forest(save_model(FernModel(dummy_classes(2, 5), make_random_ferns(1, 2, 5, rng)))),
                  FormatError);
}

}  // TEST_SUITE
