#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string_view>
#include <utility>
#include <vector>

#include "ferns/image.hpp"
#include "ferns/keypoints.hpp"
#include "ferns/sample.hpp"

namespace ferns {

// Protocol constants for synthesizing views of one reference image.
struct DatasetSpec {
  std::size_t views_per_degree = 2;
  std::size_t rotation_degrees = 360;
  std::size_t test_views = 1000;
  double noise_sigma = 10.0;
  int smooth_radius = 0;  // box smoothing applied to each view; 0 = off
  DeformRanges ranges{};

  std::size_t training_views() const { return views_per_degree * rotation_degrees; }
};

enum class Stream { Training, Test };

std::string_view stream_label(Stream s);

// One synthesized view. `image` is the warped (and, for the test stream,
// noised) reference at the reference's size.
struct View {
  std::uint64_t view_id = 0;
  AffineDeform deform;
  double noise_sigma = 0;
  GrayImage image;
};

// Deform of view `view_id` in a stream. Training views sweep theta through
// `rotation_degrees` equal buckets, views_per_degree per bucket, jittered
// uniformly inside the bucket; phi and the scales are random. Test views
// draw every parameter from the full ranges.
AffineDeform view_deform(const DatasetSpec& spec, Stream stream, std::uint64_t seed,
                         std::uint64_t view_id);

std::size_t view_count(const DatasetSpec& spec, Stream stream);

// Renders one view. Its random stream depends only on (seed, stream, id).
View render_view(const GrayImage& img, const DatasetSpec& spec, Stream stream,
                 std::uint64_t seed, std::uint64_t view_id);

struct DatasetStats {
  std::size_t views = 0;
  std::size_t samples = 0;
  std::vector<std::size_t> per_class;                    // emitted samples
  std::vector<std::pair<std::uint64_t, std::uint32_t>> skips;  // (view, class)
};

using SampleSink = std::function<void(PatchSample&&)>;

struct GenerationOptions {
  unsigned threads = 1;
  // When false only the view deforms are drawn; no pixels are touched.
  bool render = true;
};

// Streams one PatchSample per (view, class) whose mapped patch lies inside
// the view, in (view, class) order. Parallel and serial runs emit identical
// streams.
DatasetStats generate_set(const GrayImage& img, const ClassSet& classes,
                          const DatasetSpec& spec, Stream stream, std::uint64_t seed,
                          const SampleSink& sink, const GenerationOptions& options = {});

inline DatasetStats generate_training_set(const GrayImage& img, const ClassSet& classes,
                                          const DatasetSpec& spec, std::uint64_t seed,
                                          const SampleSink& sink,
                                          const GenerationOptions& options = {}) {
  return generate_set(img, classes, spec, Stream::Training, seed, sink, options);
}

inline DatasetStats generate_test_set(const GrayImage& img, const ClassSet& classes,
                                      const DatasetSpec& spec, std::uint64_t seed,
                                      const SampleSink& sink,
                                      const GenerationOptions& options = {}) {
  return generate_set(img, classes, spec, Stream::Test, seed, sink, options);
}

// Convenience: collects a whole stream into memory.
std::vector<PatchSample> collect_set(const GrayImage& img, const ClassSet& classes,
                                     const DatasetSpec& spec, Stream stream,
                                     std::uint64_t seed, DatasetStats* stats = nullptr,
                                     unsigned threads = 1);

// Writes view_<id>.pgm for every view of the stream plus manifest.csv with
// columns view_id,theta,phi,lambda1,lambda2,tx,ty,noise_sigma.
void dump_views(const std::filesystem::path& dir, const GrayImage& img,
                const DatasetSpec& spec, Stream stream, std::uint64_t seed);

// Manifest header and row formatting shared with the warp command.
inline constexpr std::string_view kManifestHeader =
    "view_id,theta,phi,lambda1,lambda2,tx,ty,noise_sigma";
std::string manifest_row(std::uint64_t view_id, const AffineDeform& d, double noise_sigma);

// Deterministic textured test scene: shaded shapes, small blobs and a fine
// smoothed noise layer, rich in isolated interest points.
GrayImage make_textured_image(int width, int height, std::uint64_t seed);

}  // namespace ferns
