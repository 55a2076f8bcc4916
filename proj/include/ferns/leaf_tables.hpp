#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ferns {

// How per-unit (fern or tree) distributions are combined.
enum class Combination : std::uint32_t { Average = 0, NaiveBayes = 1 };

struct ClassScore {
  std::uint32_t class_id = 0;
  double log_score = 0;
};

// Per-unit leaf statistics shared by ferns and randomized trees:
//   counts[u][leaf][c]  training hits
//   log_lik[u][leaf][c] = log((counts + 1) / (class_total + leaves))
//   log_prior[c]        uniform
// The leaf-major, class-minor layout makes a classification one contiguous
// row read per unit.
class LeafTables {
 public:
  LeafTables() = default;
  LeafTables(std::size_t units, int bits, std::size_t classes);

  std::size_t units() const noexcept { return units_; }
  int bits() const noexcept { return bits_; }
  std::size_t leaves() const noexcept { return std::size_t{1} << bits_; }
  std::size_t classes() const noexcept { return classes_; }

  std::size_t index(std::size_t unit, std::size_t leaf, std::size_t c) const noexcept {
    return (unit * leaves() + leaf) * classes_ + c;
  }

  // Records one hit; the caller bumps note_sample() once per sample.
  void add(std::size_t unit, std::uint32_t leaf, std::uint32_t label) noexcept {
    ++counts_[index(unit, leaf, label)];
  }
  void note_sample(std::uint32_t label) noexcept { ++samples_per_class_[label]; }

  // Recomputes log_lik, log_prior and the per-leaf evidence from the counts.
  void rebuild();

  // Elementwise count addition; tables must be rebuilt afterwards.
  void merge_counts(const LeafTables& other);

  // Copy holding only the first k units.
  LeafTables truncated(std::size_t k) const;

  std::span<const std::uint64_t> counts() const noexcept { return counts_; }
  std::span<const double> log_lik() const noexcept { return log_lik_; }
  std::span<const double> log_prior() const noexcept { return log_prior_; }
  std::span<const std::uint64_t> samples_per_class() const noexcept {
    return samples_per_class_;
  }

  std::span<const double> log_lik_row(std::size_t unit, std::size_t leaf) const noexcept {
    return {log_lik_.data() + index(unit, leaf, 0), classes_};
  }

  // P(c | leaf) for one unit, normalized over classes.
  double posterior(std::size_t unit, std::size_t leaf, std::size_t c) const;
  std::vector<double> posterior_row(std::size_t unit, std::size_t leaf) const;

  // Naive-Bayes score: log_prior[c] + sum_u log_lik[u][leaves[u]][c].
  void naive_bayes_scores(std::span<const std::uint32_t> leaves,
                          std::span<double> scores) const;

  // Sum over units of log P_u(c | leaf_u), plus log_prior[c].
  void posterior_log_scores(std::span<const std::uint32_t> leaves,
                            std::span<double> scores) const;

  // Mean over units of P_u(c | leaf_u).
  void averaged_scores(std::span<const std::uint32_t> leaves,
                       std::span<double> scores) const;

  // Replaces counts and tables wholesale, e.g. when loading a model file.
  // Throws CorruptModel when an invariant does not hold.
  void assign(std::vector<std::uint64_t> counts, std::vector<double> log_lik,
              std::vector<double> log_prior);

  friend bool operator==(const LeafTables&, const LeafTables&) = default;

 private:
  void rebuild_evidence();

  std::size_t units_ = 0;
  int bits_ = 0;
  std::size_t classes_ = 0;
  std::vector<std::uint64_t> counts_;
  std::vector<double> log_lik_;
  std::vector<double> log_prior_;
  std::vector<double> log_evidence_;  // [u][leaf], log sum_c P(leaf|c)P(c)
  std::vector<std::uint64_t> samples_per_class_;
};

// Index of the best score; ties go to the lowest class index.
std::uint32_t argmax_lowest(std::span<const double> scores);

// Combination of explicit per-unit class posteriors: Average takes the
// arithmetic mean, NaiveBayes the sum of logs plus log_prior.
ClassScore combine_posteriors(std::span<const std::vector<double>> posteriors,
                              Combination mode,
                              std::span<const double> log_prior);

}  // namespace ferns
