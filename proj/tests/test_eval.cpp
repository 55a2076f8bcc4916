#include <numeric>
#include <sstream>
#include <string>

#include "doctest.h"
#include "ferns/errors.hpp"
#include "ferns/eval.hpp"
#include "helpers.hpp"
#include "oracle.hpp"

using namespace ferns;

namespace {

struct Scene {
  GrayImage img;
  ClassSet classes;
  DatasetSpec spec;
};

Scene small_scene() {
  Scene s;
  s.img = make_textured_image(160, 120, 21);
  ClassSelectionOptions opt;
  opt.patch_size = 21;
  opt.num_views = 20;
  Rng rng(2);
  s.classes = select_stable_classes(s.img, 12, rng, opt);
  s.spec.views_per_degree = 1;
  s.spec.rotation_degrees = 60;
  s.spec.test_views = 30;
  return s;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("recognition_rate degenerate classifiers") {
  Rng rng(1);
  auto samples = testing_helpers::random_samples(100, 2, 5, rng);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i].label = static_cast<std::uint32_t>(i % 2);
  CHECK(recognition_rate([](const PatchSample& s) { return s.label; }, samples) == 1.0);
  CHECK(recognition_rate([](const PatchSample&) { return 0u; }, samples) == 0.5);
  CHECK_THROWS_AS(recognition_rate([](const PatchSample&) { return 0u; }, {}), EmptyTestSet);
}

TEST_CASE("recognition_rate equals a confusion-matrix count") {
  const Scene s = small_scene();
  const FernModel model = train_ferns(s.img, s.classes, s.spec, 6, 6, 3);
  const auto test = collect_set(s.img, s.classes, s.spec, Stream::Test, 3);
  std::vector<std::uint32_t> truth, predicted;
  for (const auto& t : test) {
    truth.push_back(t.label);
    predicted.push_back(classify(model, t.patch, patch_center(t.patch)).class_id);
  }
  const double want = oracle::confusion_rate(truth, predicted, s.classes.size());
  CHECK(std::abs(recognition_rate(model, Combination::NaiveBayes, test) - want) <= 1e-12);
  CHECK(std::abs(recognition_rate(model, Combination::NaiveBayes, test, 0, 3) - want) <= 1e-12);
}

TEST_CASE("sweep emits one record per count and matches truncated models") {
  const Scene s = small_scene();
  std::vector<std::size_t> counts(12);
  std::iota(counts.begin(), counts.end(), 1);
  EvalOptions opt;
  opt.fern_size = 6;
  for (Method m : {Method::FernNB, Method::FernAvg}) {
    const auto records = sweep_units(s.img, s.classes, s.spec, m, counts, 5, opt);
    REQUIRE(records.size() == 12);
    const FernModel big = train_ferns(s.img, s.classes, s.spec, 12, 6, 5);
    const auto test = collect_set(s.img, s.classes, s.spec, Stream::Test, 5);
    for (std::size_t i = 0; i < 12; ++i) {
      CHECK(records[i].units == i + 1);
      CHECK(records[i].method == m);
      CHECK(records[i].patches_evaluated == test.size());
      CHECK(records[i].recognition_rate >= 0);
      CHECK(records[i].recognition_rate <= 1);
    }
    const FernModel five = big.truncated(5);
    const double fresh = recognition_rate(
        [&](const PatchSample& t) {
          return m == Method::FernNB ? classify(five, t.patch, patch_center(t.patch)).class_id
                                     : classify_averaged(five, t.patch, patch_center(t.patch)).class_id;
        },
        test);
    CHECK(records[4].recognition_rate == fresh);
  }
}

TEST_CASE("tree sweep prefix matches truncated forest") {
  const Scene s = small_scene();
  const std::vector<std::size_t> counts{1, 3, 6};
  EvalOptions opt;
  opt.fern_size = 6;
  const auto records = sweep_units(s.img, s.classes, s.spec, Method::TreeNB, counts, 5, opt);
  const TreeForest big = train_trees(s.img, s.classes, s.spec, 6, 6, Combination::NaiveBayes, 5);
  const auto test = collect_set(s.img, s.classes, s.spec, Stream::Test, 5);
  const TreeForest three = big.truncated(3);
  CHECK(records[1].recognition_rate ==
        recognition_rate([&](const PatchSample& t) {
          return classify_forest(three, t.patch, patch_center(t.patch)).class_id;
        }, test));
}

TEST_CASE("sweep argument checks") {
  const Scene s = small_scene();
  CHECK_THROWS_AS(sweep_units(s.img, s.classes, s.spec, Method::FernNB, {}, 1), InvalidArgument);
  const std::vector<std::size_t> zero{0};
  CHECK_THROWS_AS(sweep_units(s.img, s.classes, s.spec, Method::FernNB, zero, 1), InvalidArgument);
}

TEST_CASE("compare_methods shares its sample streams") {
  const Scene s = small_scene();
  EvalOptions opt;
  opt.fern_size = 6;
  const Comparison c = compare_methods(s.img, s.classes, s.spec, 8, 9, opt);
  REQUIRE(c.records.size() == 4);
  CHECK(c.records[0].method == Method::FernNB);
  CHECK(c.records[1].method == Method::FernAvg);
  CHECK(c.records[2].method == Method::TreeNB);
  CHECK(c.records[3].method == Method::TreeAvg);
  CHECK(c.fern_training_hash == c.tree_training_hash);
  CHECK(c.test_hash == stream_hash(collect_set(s.img, s.classes, s.spec, Stream::Test, 9)));
  for (const auto& r : c.records) {
    CHECK(r.units == 8);
    CHECK(r.patches_evaluated == c.records[0].patches_evaluated);
    CHECK(r.seed == 9);
  }
  // Replay gives identical rates.
  const Comparison again = compare_methods(s.img, s.classes, s.spec, 8, 9, opt);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(again.records[i].recognition_rate == c.records[i].recognition_rate);
}

TEST_CASE("bench_classify reports the operation count and scales with S") {
  Rng rng(4);
  const auto patches = testing_helpers::random_samples(2000, 200, 31, rng);
  const ClassSet cs = testing_helpers::dummy_classes(200, 31);
  const FernModel s30 = train(FernModel(cs, make_random_ferns(30, 10, 31, rng)), patches);
  const FernModel s60 = train(FernModel(cs, make_random_ferns(60, 10, 31, rng)), patches);
  const BenchResult one = bench_classify(s30, patches, 1);
  CHECK(one.comparisons_per_patch == 300);
  CHECK(one.lookups_per_patch == 30);
  CHECK(one.ns_per_patch > 0);
  const BenchResult a = bench_classify(s30, patches, 5);
  const BenchResult b = bench_classify(s60, patches, 5);
  CHECK(b.comparisons_per_patch == 600);
  const double ratio = b.ns_per_patch / a.ns_per_patch;
  MESSAGE("ns/patch S=30: " << a.ns_per_patch << ", S=60: " << b.ns_per_patch);
  CHECK(ratio > 2.0 / 2.5);
  CHECK(ratio < 2.0 * 2.5);
  CHECK_THROWS_AS(bench_classify(s30, patches, 0), InvalidArgument);
}

TEST_CASE("CSV layout") {
  std::vector<EvalRecord> records{{Method::TreeAvg, 7, 0.25, 400, 0, 11},
                                  {Method::FernNB, 30, 1.0, 12, 1532.5, 11}};
  std::ostringstream out;
  write_eval_csv(out, records);
  CHECK(out.str() ==
        "method,units,recognition_rate,patches,ns_per_patch,seed\n"
        "TreeAvg,7,0.25,400,0,11\n"
        "FernNB,30,1,12,1532.5,11\n");
  CHECK(parse_method("TreeNB") == Method::TreeNB);
  CHECK_THROWS_AS(parse_method("tree"), InvalidArgument);
}

}  // TEST_SUITE
