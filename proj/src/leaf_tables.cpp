#include "ferns/leaf_tables.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ferns/errors.hpp"

namespace ferns {
namespace {

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

LeafTables::LeafTables(std::size_t units, int bits, std::size_t classes)
    : units_(units), bits_(bits), classes_(classes) {
  if (units < 1) throw InvalidArgument("at least one unit is required");
  if (bits < 1 || bits > 24) throw InvalidArgument("leaf bits must be in [1, 24]");
  if (classes < 1) throw InvalidArgument("at least one class is required");
  counts_.assign(units * leaves() * classes, 0);
  samples_per_class_.assign(classes, 0);
  rebuild();
}

void LeafTables::rebuild() {
  const std::size_t L = leaves();
  log_lik_.resize(counts_.size());
  std::vector<std::uint64_t> totals(classes_);
  for (std::size_t u = 0; u < units_; ++u) {
    std::fill(totals.begin(), totals.end(), 0);
    for (std::size_t leaf = 0; leaf < L; ++leaf)
      for (std::size_t c = 0; c < classes_; ++c) totals[c] += counts_[index(u, leaf, c)];
    for (std::size_t leaf = 0; leaf < L; ++leaf)
      for (std::size_t c = 0; c < classes_; ++c) {
        const std::size_t i = index(u, leaf, c);
        log_lik_[i] = std::log(static_cast<double>(counts_[i]) + 1.0) -
                      std::log(static_cast<double>(totals[c] + L));
      }
  }
  log_prior_.assign(classes_, -std::log(static_cast<double>(classes_)));
  rebuild_evidence();
}

void LeafTables::rebuild_evidence() {
  const std::size_t L = leaves();
  log_evidence_.resize(units_ * L);
  std::vector<double> joint(classes_);
  for (std::size_t u = 0; u < units_; ++u)
    for (std::size_t leaf = 0; leaf < L; ++leaf) {
      for (std::size_t c = 0; c < classes_; ++c)
        joint[c] = log_lik_[index(u, leaf, c)] + log_prior_[c];
      log_evidence_[u * L + leaf] = log_sum_exp(joint);
    }
}

void LeafTables::merge_counts(const LeafTables& other) {
  if (other.units_ != units_ || other.bits_ != bits_ || other.classes_ != classes_)
    throw InvalidArgument("cannot merge tables of different shapes");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  for (std::size_t c = 0; c < classes_; ++c)
    samples_per_class_[c] += other.samples_per_class_[c];
}

LeafTables LeafTables::truncated(std::size_t k) const {
  if (k < 1 || k > units_) throw InvalidArgument("truncation out of range");
  LeafTables out;
  out.units_ = k;
  out.bits_ = bits_;
  out.classes_ = classes_;
  const std::size_t n = k * leaves() * classes_;
  out.counts_.assign(counts_.begin(), counts_.begin() + static_cast<std::ptrdiff_t>(n));
  out.log_lik_.assign(log_lik_.begin(), log_lik_.begin() + static_cast<std::ptrdiff_t>(n));
  out.log_prior_ = log_prior_;
  out.log_evidence_.assign(log_evidence_.begin(),
                           log_evidence_.begin() + static_cast<std::ptrdiff_t>(k * leaves()));
  out.samples_per_class_ = samples_per_class_;
  return out;
}

double LeafTables::posterior(std::size_t unit, std::size_t leaf, std::size_t c) const {
  return std::exp(log_lik_[index(unit, leaf, c)] + log_prior_[c] -
                  log_evidence_[unit * leaves() + leaf]);
}

std::vector<double> LeafTables::posterior_row(std::size_t unit, std::size_t leaf) const {
  std::vector<double> row(classes_);
  for (std::size_t c = 0; c < classes_; ++c) row[c] = posterior(unit, leaf, c);
  return row;
}

void LeafTables::naive_bayes_scores(std::span<const std::uint32_t> leaves,
                                    std::span<double> scores) const {
  std::copy(log_prior_.begin(), log_prior_.end(), scores.begin());
  for (std::size_t u = 0; u < leaves.size(); ++u) {
    const double* row = log_lik_.data() + index(u, leaves[u], 0);
    for (std::size_t c = 0; c < classes_; ++c) scores[c] += row[c];
  }
}

void LeafTables::posterior_log_scores(std::span<const std::uint32_t> leaves,
                                      std::span<double> scores) const {
  std::copy(log_prior_.begin(), log_prior_.end(), scores.begin());
  for (std::size_t u = 0; u < leaves.size(); ++u) {
    const double* row = log_lik_.data() + index(u, leaves[u], 0);
    const double z = log_evidence_[u * this->leaves() + leaves[u]];
    for (std::size_t c = 0; c < classes_; ++c) scores[c] += row[c] + log_prior_[c] - z;
  }
}

void LeafTables::averaged_scores(std::span<const std::uint32_t> leaves,
                                 std::span<double> scores) const {
  std::fill(scores.begin(), scores.end(), 0.0);
  for (std::size_t u = 0; u < leaves.size(); ++u)
    for (std::size_t c = 0; c < classes_; ++c) scores[c] += posterior(u, leaves[u], c);
  for (double& s : scores) s /= static_cast<double>(leaves.size());
}

void LeafTables::assign(std::vector<std::uint64_t> counts, std::vector<double> log_lik,
                        std::vector<double> log_prior) {
  const std::size_t n = units_ * leaves() * classes_;
  if (counts.size() != n || log_lik.size() != n || log_prior.size() != classes_)
    throw CorruptModel("table sizes do not match the model header");

  std::vector<std::uint64_t> first_totals(classes_, 0);
  for (std::size_t u = 0; u < units_; ++u) {
    for (std::size_t c = 0; c < classes_; ++c) {
      std::uint64_t total = 0;
      double mass = 0;
      for (std::size_t leaf = 0; leaf < leaves(); ++leaf) {
        const std::size_t i = index(u, leaf, c);
        total += counts[i];
        const double lp = log_lik[i];
        if (!std::isfinite(lp) || lp > 1e-12)
          throw CorruptModel("log-probability out of range in unit " + std::to_string(u));
        mass += std::exp(lp);
      }
      if (std::abs(mass - 1.0) > 1e-9)
        throw CorruptModel("leaf distribution of unit " + std::to_string(u) + ", class " +
                           std::to_string(c) + " does not sum to one");
      if (u == 0) first_totals[c] = total;
      else if (total != first_totals[c])
        throw CorruptModel("per-class sample counts differ between units");
    }
  }
  double prior_mass = 0;
  for (double lp : log_prior) {
    if (!std::isfinite(lp) || lp > 1e-15) throw CorruptModel("log prior out of range");
    prior_mass += std::exp(lp);
  }
  if (std::abs(prior_mass - 1.0) > 1e-12) throw CorruptModel("class prior does not sum to one");

  counts_ = std::move(counts);
  log_lik_ = std::move(log_lik);
  log_prior_ = std::move(log_prior);
  samples_per_class_ = std::move(first_totals);
  rebuild_evidence();
}

std::uint32_t argmax_lowest(std::span<const double> scores) {
  std::uint32_t best = 0;
  for (std::uint32_t c = 1; c < scores.size(); ++c)
    if (scores[c] > scores[best]) best = c;
  return best;
}

ClassScore combine_posteriors(std::span<const std::vector<double>> posteriors,
                              Combination mode, std::span<const double> log_prior) {
  if (posteriors.empty()) throw InvalidArgument("no posteriors to combine");
  const std::size_t h = posteriors.front().size();
  std::vector<double> scores(h, 0.0);
  if (mode == Combination::Average) {
    for (const auto& p : posteriors)
      for (std::size_t c = 0; c < h; ++c) scores[c] += p[c];
    for (double& s : scores) s /= static_cast<double>(posteriors.size());
  } else {
    for (std::size_t c = 0; c < h; ++c) {
      scores[c] = log_prior.empty() ? 0.0 : log_prior[c];
      for (const auto& p : posteriors)
        scores[c] += p[c] > 0 ? std::log(p[c]) : -std::numeric_limits<double>::infinity();
    }
  }
  const std::uint32_t best = argmax_lowest(scores);
  return {best, scores[best]};
}

}  // namespace ferns
