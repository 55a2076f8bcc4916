#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "ferns/dataset.hpp"
#include "ferns/ferns.hpp"
#include "ferns/trees.hpp"

namespace ferns {

enum class Method { FernNB, FernAvg, TreeNB, TreeAvg };

std::string_view method_name(Method m);
Method parse_method(std::string_view name);  // throws InvalidArgument
bool is_fern_method(Method m);
Combination method_combination(Method m);

struct EvalRecord {
  Method method = Method::FernNB;
  std::size_t units = 0;
  double recognition_rate = 0;
  std::size_t patches_evaluated = 0;
  double classify_ns_per_patch = 0;
  std::uint64_t seed = 0;
};

using Classifier = std::function<std::uint32_t(const PatchSample&)>;

// Fraction of samples whose predicted label equals the true one.
// Throws EmptyTestSet on an empty stream.
double recognition_rate(const Classifier& classify, std::span<const PatchSample> test,
                        unsigned threads = 1);

// Rate of the first `units` ferns (0 = all) under the given combination.
double recognition_rate(const FernModel& model, Combination mode,
                        std::span<const PatchSample> test, std::size_t units = 0,
                        unsigned threads = 1);
double recognition_rate(const TreeForest& forest, Combination mode,
                        std::span<const PatchSample> test, std::size_t units = 0,
                        unsigned threads = 1);

struct EvalOptions {
  std::size_t fern_size = 8;  // M for ferns, D for trees
  unsigned threads = 1;
  bool timing = false;        // measure classify_ns_per_patch
  std::size_t timing_repetitions = 5;
};

// FNV-1a over labels, view ids and patch bytes; identifies a sample stream.
std::uint64_t stream_hash(std::span<const PatchSample> samples);

// Fern model / forest trained on the training stream of `spec`. Tests are
// drawn from the "ferns" / "trees" streams of `seed`.
FernModel train_ferns(const GrayImage& img, const ClassSet& classes, const DatasetSpec& spec,
                      std::size_t units, std::size_t fern_size, std::uint64_t seed,
                      unsigned threads = 1);
TreeForest train_trees(const GrayImage& img, const ClassSet& classes, const DatasetSpec& spec,
                       std::size_t units, int depth, Combination mode, std::uint64_t seed,
                       unsigned threads = 1);

// Trains once with max(unit_counts) units and evaluates each prefix.
std::vector<EvalRecord> sweep_units(const GrayImage& img, const ClassSet& classes,
                                    const DatasetSpec& spec, Method method,
                                    std::span<const std::size_t> unit_counts,
                                    std::uint64_t seed, const EvalOptions& options = {});

struct Comparison {
  std::vector<EvalRecord> records;  // FernNB, FernAvg, TreeNB, TreeAvg
  std::uint64_t fern_training_hash = 0;
  std::uint64_t tree_training_hash = 0;
  std::uint64_t test_hash = 0;
};

// Ferns (S = units, size M) against trees (T = units, depth M), trained and
// tested on the same streams.
Comparison compare_methods(const GrayImage& img, const ClassSet& classes,
                           const DatasetSpec& spec, std::size_t units, std::uint64_t seed,
                           const EvalOptions& options = {});

struct BenchResult {
  double ns_per_patch = 0;               // median over repetitions
  std::uint64_t comparisons_per_patch = 0;
  std::uint64_t lookups_per_patch = 0;
};

BenchResult bench_classify(const FernModel& model, std::span<const PatchSample> patches,
                           std::size_t repetitions);

inline constexpr std::string_view kEvalCsvHeader =
    "method,units,recognition_rate,patches,ns_per_patch,seed";

void write_eval_csv(std::ostream& out, std::span<const EvalRecord> records);
std::string format_real(double v);

}  // namespace ferns
