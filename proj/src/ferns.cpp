#include "ferns/ferns.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "binary_io.hpp"
#include "ferns/errors.hpp"

namespace ferns {
namespace {

constexpr std::string_view kModelMagic = "FERNMDL1";
constexpr std::uint32_t kModelVersion = 1;

struct PixelOrigin {
  int x, y;
};

PixelOrigin round_center(const Keypoint& k) {
  return {static_cast<int>(std::lround(k.x)), static_cast<int>(std::lround(k.y))};
}

void require_patch_inside(const GrayImage& img, PixelOrigin c, int half) {
  if (c.x - half < 0 || c.y - half < 0 || c.x + half >= img.width() ||
      c.y + half >= img.height())
    throw OutOfBounds("patch around (" + std::to_string(c.x) + "," + std::to_string(c.y) +
                      ") leaves the " + std::to_string(img.width()) + "x" +
                      std::to_string(img.height()) + " image");
}

// Unchecked fern evaluation; the caller has validated the patch window.
std::uint32_t fern_leaf(const GrayImage& img, PixelOrigin c, const Fern& fern) {
  std::uint32_t leaf = 0;
  for (const FeatureTest& t : fern.tests) {
    const int bit = img(c.x + t.d1.dx, c.y + t.d1.dy) < img(c.x + t.d2.dx, c.y + t.d2.dy);
    leaf = (leaf << 1) | static_cast<std::uint32_t>(bit);
  }
  return leaf;
}

}  // namespace

int eval_feature(const GrayImage& img, const Keypoint& center, const FeatureTest& t,
                 OpCounter* counter) {
  const PixelOrigin c = round_center(center);
  const std::uint8_t a = img.at(c.x + t.d1.dx, c.y + t.d1.dy);
  const std::uint8_t b = img.at(c.x + t.d2.dx, c.y + t.d2.dy);
  if (counter) ++counter->comparisons;
  return a < b ? 1 : 0;
}

std::uint32_t eval_fern(const GrayImage& img, const Keypoint& center, const Fern& fern,
                        OpCounter* counter) {
  std::uint32_t leaf = 0;
  for (const FeatureTest& t : fern.tests)
    leaf = (leaf << 1) | static_cast<std::uint32_t>(eval_feature(img, center, t, counter));
  return leaf;
}

FeatureTest random_feature_test(int patch_size, Rng& rng) {
  if (patch_size < 3 || patch_size % 2 == 0)
    throw InvalidArgument("patch size must be odd and at least 3");
  const int half = patch_size / 2;
  auto draw = [&] { return Offset{rng.uniform_int(-half, half), rng.uniform_int(-half, half)}; };
  FeatureTest t;
  t.d1 = draw();
  do {
    t.d2 = draw();
  } while (t.d2 == t.d1);
  return t;
}

std::vector<Fern> make_random_ferns(std::size_t s, std::size_t m, int patch_size, Rng& rng) {
  if (s < 1 || m < 1) throw InvalidArgument("fern count and size must be positive");
  if (m > 24) throw InvalidArgument("fern size is limited to 24 tests");
  if (patch_size < 3 || patch_size % 2 == 0)
    throw InvalidArgument("patch size must be odd and at least 3");
  std::vector<Fern> ferns(s);
  for (Fern& f : ferns) {
    f.tests.resize(m);
    for (FeatureTest& t : f.tests) t = random_feature_test(patch_size, rng);
  }
  return ferns;
}

FernModel::FernModel(ClassSet classes, std::vector<Fern> ferns)
    : classes_(std::move(classes)), ferns_(std::move(ferns)) {
  if (ferns_.empty()) throw InvalidArgument("a model needs at least one fern");
  const std::size_t m = ferns_.front().tests.size();
  const int half = classes_.patch_size / 2;
  for (const Fern& f : ferns_) {
    if (f.tests.size() != m || m == 0)
      throw InvalidArgument("all ferns must hold the same positive number of tests");
    for (const FeatureTest& t : f.tests) {
      for (const Offset& o : {t.d1, t.d2})
        if (std::abs(o.dx) > half || std::abs(o.dy) > half)
          throw InvalidArgument("feature offset outside the patch");
      if (t.d1 == t.d2) throw InvalidArgument("feature test compares a pixel with itself");
    }
  }
  tables_ = LeafTables(ferns_.size(), static_cast<int>(m), classes_.size());
}

void FernModel::leaves(const GrayImage& img, const Keypoint& center,
                       std::span<std::uint32_t> out, OpCounter* counter) const {
  const PixelOrigin c = round_center(center);
  require_patch_inside(img, c, patch_size() / 2);
  for (std::size_t s = 0; s < ferns_.size(); ++s) out[s] = fern_leaf(img, c, ferns_[s]);
  if (counter) counter->comparisons += ferns_.size() * fern_size();
}

void FernModel::accumulate(const GrayImage& patch, std::uint32_t label) {
  if (label >= num_classes())
    throw InvalidLabel("label " + std::to_string(label) + " not below class count " +
                       std::to_string(num_classes()));
  if (patch.width() < patch_size() || patch.height() < patch_size())
    throw InvalidPatch("patch smaller than " + std::to_string(patch_size()) + " pixels");
  const PixelOrigin c = round_center(patch_center(patch));
  for (std::size_t s = 0; s < ferns_.size(); ++s) tables_.add(s, fern_leaf(patch, c, ferns_[s]), label);
  tables_.note_sample(label);
}

void FernModel::merge(const FernModel& shard) {
  if (shard.ferns_ != ferns_ || shard.classes_.size() != classes_.size())
    throw InvalidArgument("shards must share ferns and classes");
  tables_.merge_counts(shard.tables_);
  tables_.rebuild();
}

FernModel FernModel::truncated(std::size_t k) const {
  FernModel out;
  out.classes_ = classes_;
  out.ferns_.assign(ferns_.begin(), ferns_.begin() + static_cast<std::ptrdiff_t>(std::min(k, ferns_.size())));
  out.tables_ = tables_.truncated(k);
  return out;
}

FernModel train(FernModel model, std::span<const PatchSample> samples) {
  for (const PatchSample& s : samples) model.accumulate(s.patch, s.label);
  model.rebuild();
  return model;
}

ClassScore classify(const FernModel& model, const GrayImage& img, const Keypoint& center,
                    OpCounter* counter) {
  std::vector<std::uint32_t> leaves(model.num_ferns());
  model.leaves(img, center, leaves, counter);
  if (counter) counter->lookups += leaves.size();
  std::vector<double> scores(model.num_classes());
  model.tables().naive_bayes_scores(leaves, scores);
  const std::uint32_t best = argmax_lowest(scores);
  return {best, scores[best]};
}

ClassScore classify_averaged(const FernModel& model, const GrayImage& img,
                             const Keypoint& center) {
  std::vector<std::uint32_t> leaves(model.num_ferns());
  model.leaves(img, center, leaves);
  std::vector<double> scores(model.num_classes());
  model.tables().averaged_scores(leaves, scores);
  const std::uint32_t best = argmax_lowest(scores);
  return {best, scores[best]};
}

std::vector<double> posterior(const FernModel& model, const GrayImage& img,
                              const Keypoint& center) {
  std::vector<std::uint32_t> leaves(model.num_ferns());
  model.leaves(img, center, leaves);
  std::vector<double> p(model.num_classes());
  model.tables().naive_bayes_scores(leaves, p);
  const double m = *std::max_element(p.begin(), p.end());
  double z = 0;
  for (double& v : p) z += (v = std::exp(v - m));
  for (double& v : p) v /= z;
  return p;
}

// ---------------------------------------------------------------------------
// Serialization

Bytes save_model(const FernModel& model) {
  detail::ByteWriter w;
  w.raw(kModelMagic);
  w.le(kModelVersion);
  w.le(static_cast<std::uint32_t>(model.num_classes()));
  w.le(static_cast<std::uint32_t>(model.num_ferns()));
  w.le(static_cast<std::uint32_t>(model.fern_size()));
  w.le(static_cast<std::uint32_t>(model.patch_size()));
  for (const Keypoint& k : model.classes().keypoints) {
    w.le(static_cast<float>(k.x));
    w.le(static_cast<float>(k.y));
  }
  for (double lp : model.tables().log_prior()) w.le(lp);
  for (const Fern& f : model.ferns())
    for (const FeatureTest& t : f.tests) {
      w.le(static_cast<std::int16_t>(t.d1.dx));
      w.le(static_cast<std::int16_t>(t.d1.dy));
      w.le(static_cast<std::int16_t>(t.d2.dx));
      w.le(static_cast<std::int16_t>(t.d2.dy));
    }
  for (std::uint64_t c : model.tables().counts()) w.le(c);
  for (double lp : model.tables().log_lik()) w.le(lp);
  return w.take();
}

FernModel load_model(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  if (bytes.size() < kModelMagic.size() || r.raw(kModelMagic.size()) != kModelMagic)
    throw FormatError("not a fern model file (bad magic)");
  const auto version = r.le<std::uint32_t>();
  if (version != kModelVersion)
    throw FormatError("unsupported fern model version " + std::to_string(version));
  const auto h = r.le<std::uint32_t>();
  const auto s = r.le<std::uint32_t>();
  const auto m = r.le<std::uint32_t>();
  const auto patch = r.le<std::uint32_t>();
  if (h < 1 || s < 1 || m < 1 || m > 24 || patch < 3 || patch % 2 == 0 || patch > 32767)
    throw CorruptModel("implausible model header");

  const std::uint64_t cells = std::uint64_t{s} << m;
  const std::uint64_t expected = 8ull * h + 8ull * h + 8ull * s * m + 16ull * cells * h;
  if (r.remaining() < expected) throw FormatError("model file truncated");
  if (r.remaining() > expected) throw FormatError("trailing bytes after model data");

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

  std::vector<Fern> ferns(s);
  for (Fern& f : ferns) {
    f.tests.resize(m);
    for (FeatureTest& t : f.tests) {
      t.d1.dx = r.le<std::int16_t>();
      t.d1.dy = r.le<std::int16_t>();
      t.d2.dx = r.le<std::int16_t>();
      t.d2.dy = r.le<std::int16_t>();
    }
  }
  std::vector<std::uint64_t> counts(cells * h);
  for (auto& c : counts) c = r.le<std::uint64_t>();
  std::vector<double> log_lik(cells * h);
  for (double& lp : log_lik) lp = r.le<double>();

  FernModel model;
  try {
    model = FernModel(std::move(classes), std::move(ferns));
  } catch (const InvalidArgument& e) {
    throw CorruptModel(e.what());
  }
  model.tables_.assign(std::move(counts), std::move(log_lik), std::move(log_prior));
  return model;
}

}  // namespace ferns
