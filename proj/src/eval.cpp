#include "ferns/eval.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <ostream>
#include <string>
#include <thread>
#include <type_traits>

#include "ferns/errors.hpp"

namespace ferns {
namespace {

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += threads) fn(i);
    });
  for (auto& th : pool) th.join();
}

// Leaves of every unit for every sample, row-major [sample][unit].
template <typename Model>
std::vector<std::uint32_t> all_leaves(const Model& model, std::size_t units,
                                      std::span<const PatchSample> test, unsigned threads) {
  std::vector<std::uint32_t> leaves(test.size() * units);
  parallel_for(test.size(), threads, [&](std::size_t i) {
    model.leaves(test[i].patch, patch_center(test[i].patch),
                 std::span<std::uint32_t>(leaves.data() + i * units, units));
  });
  return leaves;
}

std::uint32_t predict(const LeafTables& tables, Combination mode, bool fern_scoring,
                      std::span<const std::uint32_t> leaves, std::span<double> scores) {
  if (mode == Combination::Average)
    tables.averaged_scores(leaves, scores);
  else if (fern_scoring)
    tables.naive_bayes_scores(leaves, scores);
  else
    tables.posterior_log_scores(leaves, scores);
  return argmax_lowest(scores);
}

template <typename Model>
double rate_from_leaves(const Model& model, Combination mode, bool fern_scoring,
                        std::span<const PatchSample> test,
                        std::span<const std::uint32_t> leaves, std::size_t stride,
                        std::size_t units) {
  std::vector<double> scores(model.num_classes());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto row = leaves.subspan(i * stride, units);
    if (predict(model.tables(), mode, fern_scoring, row, scores) == test[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

template <typename Model>
double model_rate(const Model& model, Combination mode, bool fern_scoring,
                  std::span<const PatchSample> test, std::size_t units, unsigned threads) {
  if (test.empty()) throw EmptyTestSet("test set is empty");
  std::size_t all = 0;
  if constexpr (std::is_same_v<Model, FernModel>) all = model.num_ferns();
  else all = model.num_trees();
  if (units == 0 || units > all) units = all;
  const auto leaves = all_leaves(model, all, test, threads);
  return rate_from_leaves(model, mode, fern_scoring, test, leaves, all, units);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Keeps timed classification results observable.
volatile std::uint64_t g_timing_sink = 0;

template <typename Fn>
double time_per_patch(std::span<const PatchSample> test, std::size_t reps, Fn&& classify_one) {
  std::vector<double> per_rep;
  std::uint64_t sink = 0;
  for (std::size_t r = 0; r < std::max<std::size_t>(reps, 1); ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    for (const PatchSample& s : test) sink += classify_one(s);
    const auto t1 = std::chrono::steady_clock::now();
    per_rep.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count() /
                      static_cast<double>(test.size()));
  }
  g_timing_sink = sink;
  return median(std::move(per_rep));
}


}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::FernNB: return "FernNB";
    case Method::FernAvg: return "FernAvg";
    case Method::TreeNB: return "TreeNB";
    case Method::TreeAvg: return "TreeAvg";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::FernNB, Method::FernAvg, Method::TreeNB, Method::TreeAvg})
    if (name == method_name(m)) return m;
  throw InvalidArgument("unknown method '" + std::string(name) +
                        "' (expected FernNB, FernAvg, TreeNB or TreeAvg)");
}

bool is_fern_method(Method m) { return m == Method::FernNB || m == Method::FernAvg; }

Combination method_combination(Method m) {
  return m == Method::FernNB || m == Method::TreeNB ? Combination::NaiveBayes
                                                    : Combination::Average;
}

double recognition_rate(const Classifier& classify, std::span<const PatchSample> test,
                        unsigned threads) {
  if (test.empty()) throw EmptyTestSet("test set is empty");
  std::atomic<std::size_t> correct{0};
  parallel_for(test.size(), threads, [&](std::size_t i) {
    if (classify(test[i]) == test[i].label) correct.fetch_add(1, std::memory_order_relaxed);
  });
  return static_cast<double>(correct.load()) / static_cast<double>(test.size());
}

double recognition_rate(const FernModel& model, Combination mode,
                        std::span<const PatchSample> test, std::size_t units, unsigned threads) {
  return model_rate(model, mode, true, test, units, threads);
}

double recognition_rate(const TreeForest& forest, Combination mode,
                        std::span<const PatchSample> test, std::size_t units, unsigned threads) {
  return model_rate(forest, mode, false, test, units, threads);
}

std::uint64_t stream_hash(std::span<const PatchSample> samples) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const PatchSample& s : samples) {
    mix(s.label);
    mix(s.view_id);
    for (std::uint8_t b : s.patch.data()) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

FernModel train_ferns(const GrayImage& img, const ClassSet& classes, const DatasetSpec& spec,
                      std::size_t units, std::size_t fern_size, std::uint64_t seed,
                      unsigned threads) {
  Rng rng = Rng::derive(seed, "ferns");
  FernModel model(classes, make_random_ferns(units, fern_size, classes.patch_size, rng));
  generate_set(img, classes, spec, Stream::Training, seed,
               [&](PatchSample&& s) { model.accumulate(s.patch, s.label); }, {threads, true});
  model.rebuild();
  return model;
}

TreeForest train_trees(const GrayImage& img, const ClassSet& classes, const DatasetSpec& spec,
                       std::size_t units, int depth, Combination mode, std::uint64_t seed,
                       unsigned threads) {
  Rng rng = Rng::derive(seed, "trees");
  TreeForest forest(classes, make_random_trees(units, depth, classes.patch_size, rng), mode);
  generate_set(img, classes, spec, Stream::Training, seed,
               [&](PatchSample&& s) { forest.accumulate(s.patch, s.label); }, {threads, true});
  forest.rebuild();
  return forest;
}

std::vector<EvalRecord> sweep_units(const GrayImage& img, const ClassSet& classes,
                                    const DatasetSpec& spec, Method method,
                                    std::span<const std::size_t> unit_counts,
                                    std::uint64_t seed, const EvalOptions& options) {
  if (unit_counts.empty()) throw InvalidArgument("unit_counts is empty");
  if (std::find(unit_counts.begin(), unit_counts.end(), 0) != unit_counts.end())
    throw InvalidArgument("unit counts must be at least 1");
  const std::size_t max_units = *std::max_element(unit_counts.begin(), unit_counts.end());
  const Combination mode = method_combination(method);

  const std::vector<PatchSample> test = collect_set(img, classes, spec, Stream::Test, seed,
                                                    nullptr, options.threads);
  if (test.empty()) throw EmptyTestSet("no test patch survived generation");

  std::vector<EvalRecord> records;
  auto emit = [&](std::size_t k, double rate, double ns) {
    records.push_back({method, k, rate, test.size(), ns, seed});
  };

  if (is_fern_method(method)) {
    const FernModel model = train_ferns(img, classes, spec, max_units, options.fern_size, seed,
                                        options.threads);
    const auto leaves = all_leaves(model, max_units, test, options.threads);
    for (std::size_t k : unit_counts) {
      const double rate = rate_from_leaves(model, mode, true, test, leaves, max_units, k);
      double ns = 0;
      if (options.timing) {
        const FernModel part = model.truncated(k);
        ns = time_per_patch(test, options.timing_repetitions, [&](const PatchSample& s) {
          return mode == Combination::NaiveBayes
                     ? classify(part, s.patch, patch_center(s.patch)).class_id
                     : classify_averaged(part, s.patch, patch_center(s.patch)).class_id;
        });
      }
      emit(k, rate, ns);
    }
  } else {
    const TreeForest forest = train_trees(img, classes, spec, max_units,
                                          static_cast<int>(options.fern_size), mode, seed,
                                          options.threads);
    const auto leaves = all_leaves(forest, max_units, test, options.threads);
    for (std::size_t k : unit_counts) {
      const double rate = rate_from_leaves(forest, mode, false, test, leaves, max_units, k);
      double ns = 0;
      if (options.timing) {
        const TreeForest part = forest.truncated(k);
        ns = time_per_patch(test, options.timing_repetitions, [&](const PatchSample& s) {
          return classify_forest(part, s.patch, patch_center(s.patch)).class_id;
        });
      }
      emit(k, rate, ns);
    }
  }
  return records;
}

Comparison compare_methods(const GrayImage& img, const ClassSet& classes,
                           const DatasetSpec& spec, std::size_t units, std::uint64_t seed,
                           const EvalOptions& options) {
  if (units < 1) throw InvalidArgument("units must be at least 1");
  Rng fern_rng = Rng::derive(seed, "ferns");
  Rng tree_rng = Rng::derive(seed, "trees");
  FernModel model(classes, make_random_ferns(units, options.fern_size, classes.patch_size, fern_rng));
  TreeForest forest(classes,
                    make_random_trees(units, static_cast<int>(options.fern_size),
                                      classes.patch_size, tree_rng));

  Comparison result;
  std::uint64_t fern_hash = 0xcbf29ce484222325ULL;
  std::uint64_t tree_hash = fern_hash;
  auto fold = [](std::uint64_t h, const PatchSample& s) {
    const std::uint64_t one = stream_hash(std::span<const PatchSample>(&s, 1));
    return (h ^ one) * 0x100000001b3ULL;
  };
  generate_set(img, classes, spec, Stream::Training, seed,
               [&](PatchSample&& s) {
                 model.accumulate(s.patch, s.label);
                 fern_hash = fold(fern_hash, s);
                 forest.accumulate(s.patch, s.label);
                 tree_hash = fold(tree_hash, s);
               },
               {options.threads, true});
  model.rebuild();
  forest.rebuild();
  result.fern_training_hash = fern_hash;
  result.tree_training_hash = tree_hash;

  const std::vector<PatchSample> test = collect_set(img, classes, spec, Stream::Test, seed,
                                                    nullptr, options.threads);
  if (test.empty()) throw EmptyTestSet("no test patch survived generation");
  result.test_hash = stream_hash(test);

  const auto fern_leaves = all_leaves(model, units, test, options.threads);
  const auto tree_leaves = all_leaves(forest, units, test, options.threads);
  for (Method m : {Method::FernNB, Method::FernAvg, Method::TreeNB, Method::TreeAvg}) {
    const Combination mode = method_combination(m);
    double rate = 0;
    double ns = 0;
    if (is_fern_method(m)) {
      rate = rate_from_leaves(model, mode, true, test, fern_leaves, units, units);
      if (options.timing)
        ns = time_per_patch(test, options.timing_repetitions, [&](const PatchSample& s) {
          return mode == Combination::NaiveBayes
                     ? classify(model, s.patch, patch_center(s.patch)).class_id
                     : classify_averaged(model, s.patch, patch_center(s.patch)).class_id;
        });
    } else {
      rate = rate_from_leaves(forest, mode, false, test, tree_leaves, units, units);
      if (options.timing) {
        forest.set_combination(mode);
        ns = time_per_patch(test, options.timing_repetitions, [&](const PatchSample& s) {
          return classify_forest(forest, s.patch, patch_center(s.patch)).class_id;
        });
      }
    }
    result.records.push_back({m, units, rate, test.size(), ns, seed});
  }
  return result;
}

BenchResult bench_classify(const FernModel& model, std::span<const PatchSample> patches,
                           std::size_t repetitions) {
  if (patches.empty()) throw InvalidArgument("no patches to benchmark");
  if (repetitions < 1) throw InvalidArgument("repetitions must be at least 1");
  BenchResult result;
  OpCounter counter;
  classify(model, patches.front().patch, patch_center(patches.front().patch), &counter);
  result.comparisons_per_patch = counter.comparisons;
  result.lookups_per_patch = counter.lookups;
  result.ns_per_patch = time_per_patch(patches, repetitions, [&](const PatchSample& s) {
    return classify(model, s.patch, patch_center(s.patch)).class_id;
  });
  return result;
}

std::string format_real(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void write_eval_csv(std::ostream& out, std::span<const EvalRecord> records) {
  out << kEvalCsvHeader << '\n';
  for (const EvalRecord& r : records)
    out << method_name(r.method) << ',' << r.units << ',' << format_real(r.recognition_rate)
        << ',' << r.patches_evaluated << ',' << format_real(r.classify_ns_per_patch) << ','
        << r.seed << '\n';
}

}  // namespace ferns
