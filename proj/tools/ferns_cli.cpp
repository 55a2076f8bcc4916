// Command-line front end: train, eval, sweep, compare, match, warp.
//
// Exit codes: 0 success, 1 usage, 2 I/O, 3 training infeasible,
// 4 model/format mismatch.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "CLI11.hpp"
#include "ferns/dataset.hpp"
#include "ferns/errors.hpp"
#include "ferns/eval.hpp"
#include "ferns/ferns.hpp"
#include "ferns/keypoints.hpp"
#include "ferns/trees.hpp"

namespace fs = std::filesystem;
using namespace ferns;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitMismatch = 4;

class ModelMismatch : public Error {
 public:
  using Error::Error;
};

struct Config {
  std::string image;
  std::string scene;
  std::string model;
  std::string out;
  std::string manifest;
  std::uint64_t seed = 0;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());

  std::size_t classes = 200;
  std::size_t ferns = 30;
  std::size_t fern_size = 10;
  int patch = 31;
  std::size_t views_per_degree = 2;
  std::size_t degrees = 360;
  std::size_t class_views = 50;
  std::string structure = "ferns";
  std::string combination = "nb";
  int smooth = 0;

  std::size_t tests = 1000;
  double noise = 10;
  std::string method;
  std::string units_list;
  std::size_t max_units = 30;
  bool timing = false;

  std::size_t max_keypoints = 500;

  bool identity = false;
  std::optional<double> theta, phi, lambda1, lambda2, tx, ty;
};

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open " + path);
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::ios_base::failure("write failed for " + path);
}

// Writes to --out, or stdout when --out is empty.
void emit_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write " + path);
  out << text;
  if (!out) throw std::ios_base::failure("write failed for " + path);
}

DatasetSpec dataset_spec(const Config& c) {
  DatasetSpec spec;
  spec.views_per_degree = c.views_per_degree;
  spec.rotation_degrees = c.degrees;
  spec.test_views = c.tests;
  spec.noise_sigma = c.noise;
  spec.smooth_radius = c.smooth;
  return spec;
}

Combination parse_combination(const std::string& s) {
  if (s == "nb") return Combination::NaiveBayes;
  if (s == "avg") return Combination::Average;
  throw InvalidArgument("combination must be 'nb' or 'avg'");
}

ClassSet choose_classes(const GrayImage& img, const Config& c) {
  ClassSelectionOptions opt;
  opt.patch_size = c.patch;
  opt.num_views = c.class_views;
  Rng rng = Rng::derive(c.seed, "classes");
  return select_stable_classes(img, c.classes, rng, opt);
}

using AnyModel = std::variant<FernModel, TreeForest>;

AnyModel load_any_model(const std::string& path) {
  const Bytes bytes = read_file(path);
  if (bytes.size() >= 8 && std::string(bytes.begin(), bytes.begin() + 8) == "RTRFMDL1")
    return load_forest(bytes);
  return load_model(bytes);
}

const ClassSet& model_classes(const AnyModel& m) {
  return std::visit([](const auto& x) -> const ClassSet& { return x.classes(); }, m);
}

void check_fits(const ClassSet& classes, const GrayImage& img) {
  const int half = classes.patch_size / 2;
  for (const Keypoint& k : classes.keypoints)
    if (k.x - half < 0 || k.y - half < 0 || k.x + half >= img.width() || k.y + half >= img.height())
      throw ModelMismatch("model class at (" + format_real(k.x) + "," + format_real(k.y) +
                          ") does not fit the " + std::to_string(img.width()) + "x" +
                          std::to_string(img.height()) + " image");
}

std::vector<std::size_t> unit_counts(const Config& c) {
  std::vector<std::size_t> out;
  if (c.units_list.empty()) {
    for (std::size_t k = 1; k <= c.max_units; ++k) out.push_back(k);
    return out;
  }
  std::stringstream ss(c.units_list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    if (dash != std::string::npos) {
      const std::size_t lo = std::stoul(item.substr(0, dash));
      const std::size_t hi = std::stoul(item.substr(dash + 1));
      for (std::size_t k = lo; k <= hi; ++k) out.push_back(k);
    } else {
      out.push_back(std::stoul(item));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

int cmd_train(const Config& c) {
  const GrayImage img = read_pgm_file(c.image);
  const ClassSet classes = choose_classes(img, c);
  const DatasetSpec spec = dataset_spec(c);
  DatasetStats stats;
  Bytes bytes;
  if (c.structure == "ferns") {
    Rng rng = Rng::derive(c.seed, "ferns");
    FernModel model(classes, make_random_ferns(c.ferns, c.fern_size, c.patch, rng));
    stats = generate_training_set(img, classes, spec, c.seed,
                                  [&](PatchSample&& s) { model.accumulate(s.patch, s.label); },
                                  {c.threads, true});
    model.rebuild();
    bytes = save_model(model);
  } else if (c.structure == "trees") {
    Rng rng = Rng::derive(c.seed, "trees");
    TreeForest forest(classes,
                      make_random_trees(c.ferns, static_cast<int>(c.fern_size), c.patch, rng),
                      parse_combination(c.combination));
    stats = generate_training_set(img, classes, spec, c.seed,
                                  [&](PatchSample&& s) { forest.accumulate(s.patch, s.label); },
                                  {c.threads, true});
    forest.rebuild();
    bytes = save_forest(forest);
  } else {
    throw InvalidArgument("structure must be 'ferns' or 'trees'");
  }
  write_file(c.model, bytes);
  std::cerr << "classes: " << classes.size() << "\n"
            << "views: " << stats.views << "\n"
            << "samples: " << stats.samples << "\n"
            << "skips: " << stats.skips.size() << "\n"
            << "model: " << c.model << " (" << bytes.size() << " bytes)\n";
  return 0;
}

int cmd_eval(const Config& c) {
  const AnyModel model = load_any_model(c.model);
  const GrayImage img = read_pgm_file(c.image);
  const ClassSet& classes = model_classes(model);
  check_fits(classes, img);
  const DatasetSpec spec = dataset_spec(c);
  const auto test = collect_set(img, classes, spec, Stream::Test, c.seed, nullptr, c.threads);
  if (test.empty()) throw EmptyTestSet("no test patch survived generation");

  EvalRecord record;
  record.units = std::visit([](const auto& m) {
    if constexpr (std::is_same_v<std::decay_t<decltype(m)>, FernModel>) return m.num_ferns();
    else return m.num_trees();
  }, model);
  record.patches_evaluated = test.size();
  record.seed = c.seed;
  if (const auto* fm = std::get_if<FernModel>(&model)) {
    record.method = c.method.empty() ? Method::FernNB : parse_method(c.method);
    if (!is_fern_method(record.method)) throw InvalidArgument("a fern model needs FernNB or FernAvg");
    const Combination mode = method_combination(record.method);
    record.recognition_rate = recognition_rate(*fm, mode, test, 0, c.threads);
    if (c.timing) {
      if (mode == Combination::NaiveBayes) {
        record.classify_ns_per_patch = bench_classify(*fm, test, 5).ns_per_patch;
      } else {
        const auto t0 = std::chrono::steady_clock::now();
        for (const auto& s : test) (void)classify_averaged(*fm, s.patch, patch_center(s.patch));
        record.classify_ns_per_patch =
            std::chrono::duration<double, std::nano>(std::chrono::steady_clock::now() - t0).count() /
            static_cast<double>(test.size());
      }
    }
  } else {
    TreeForest forest = std::get<TreeForest>(model);
    record.method = c.method.empty()
                        ? (forest.combination() == Combination::NaiveBayes ? Method::TreeNB : Method::TreeAvg)
                        : parse_method(c.method);
    if (is_fern_method(record.method)) throw InvalidArgument("a forest needs TreeNB or TreeAvg");
    forest.set_combination(method_combination(record.method));
    record.recognition_rate = recognition_rate(forest, forest.combination(), test, 0, c.threads);
    if (c.timing) {
      const auto t0 = std::chrono::steady_clock::now();
      for (const auto& s : test) (void)classify_forest(forest, s.patch, patch_center(s.patch));
      record.classify_ns_per_patch =
          std::chrono::duration<double, std::nano>(std::chrono::steady_clock::now() - t0).count() /
          static_cast<double>(test.size());
    }
  }

  std::ostringstream csv;
  write_eval_csv(csv, std::span<const EvalRecord>(&record, 1));
  emit_text(c.out, csv.str());
  std::cerr << "recognition rate: " << format_real(record.recognition_rate) << " ("
            << test.size() << " patches)\n";
  return 0;
}

EvalOptions eval_options(const Config& c) {
  EvalOptions opt;
  opt.fern_size = c.fern_size;
  opt.threads = c.threads;
  opt.timing = c.timing;
  return opt;
}

int cmd_sweep(const Config& c) {
  const GrayImage img = read_pgm_file(c.image);
  const ClassSet classes = choose_classes(img, c);
  const Method method = c.method.empty() ? Method::FernNB : parse_method(c.method);
  const auto counts = unit_counts(c);
  const auto records = sweep_units(img, classes, dataset_spec(c), method, counts, c.seed, eval_options(c));
  std::ostringstream csv;
  write_eval_csv(csv, records);
  emit_text(c.out, csv.str());
  return 0;
}

int cmd_compare(const Config& c) {
  const GrayImage img = read_pgm_file(c.image);
  const ClassSet classes = choose_classes(img, c);
  const Comparison cmp = compare_methods(img, classes, dataset_spec(c), c.ferns, c.seed, eval_options(c));
  std::ostringstream csv;
  write_eval_csv(csv, cmp.records);
  emit_text(c.out, csv.str());
  return 0;
}

int cmd_match(const Config& c) {
  const AnyModel model = load_any_model(c.model);
  const GrayImage scene = read_pgm_file(c.scene.empty() ? c.image : c.scene);
  const ClassSet& classes = model_classes(model);

  struct Match {
    Keypoint at;
    ClassScore score;
  };
  std::vector<Match> matches;
  for (const Keypoint& k : detect_keypoints(scene, c.max_keypoints, classes.patch_size)) {
    const ClassScore s = std::visit([&](const auto& m) {
      if constexpr (std::is_same_v<std::decay_t<decltype(m)>, FernModel>) return classify(m, scene, k);
      else return classify_forest(m, scene, k);
    }, model);
    matches.push_back({k, s});
  }
  std::stable_sort(matches.begin(), matches.end(), [](const Match& a, const Match& b) {
    if (a.score.log_score != b.score.log_score) return a.score.log_score > b.score.log_score;
    if (a.at.y != b.at.y) return a.at.y < b.at.y;
    return a.at.x < b.at.x;
  });

  std::ostringstream csv;
  csv << "scene_x,scene_y,class_id,model_x,model_y,log_score\n";
  for (const Match& m : matches) {
    const Keypoint& mk = classes.keypoints[m.score.class_id];
    csv << format_real(m.at.x) << ',' << format_real(m.at.y) << ',' << m.score.class_id << ','
        << format_real(mk.x) << ',' << format_real(mk.y) << ',' << format_real(m.score.log_score)
        << '\n';
  }
  emit_text(c.out, csv.str());
  std::cerr << "matches: " << matches.size() << "\n";
  return 0;
}

int cmd_warp(const Config& c) {
  const GrayImage img = read_pgm_file(c.image);
  Rng rng = Rng::derive(c.seed, "warp");
  const bool explicit_deform = c.theta || c.phi || c.lambda1 || c.lambda2 || c.tx || c.ty;
  AffineDeform d = sample_deformation(rng, c.identity ? DeformRanges::identity() : DeformRanges{});
  if (explicit_deform || c.identity) {
    d.theta = c.theta.value_or(0);
    d.phi = c.phi.value_or(0);
    d.lambda1 = c.lambda1.value_or(1);
    d.lambda2 = c.lambda2.value_or(1);
  }
  d.tx = c.tx.value_or(0);
  d.ty = c.ty.value_or(0);
  d.validate();

  GrayImage view = warp_image(img, d, img.width(), img.height());
  view = add_noise(view, c.noise, rng);
  if (c.smooth > 0) view = box_smooth(view, c.smooth);
  write_pgm_file(c.out, view);

  const std::string manifest = c.manifest.empty() ? c.out + ".csv" : c.manifest;
  emit_text(manifest, std::string(kManifestHeader) + "\n" + manifest_row(0, d, c.noise) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random-ferns keypoint recognition toolkit"};
  app.require_subcommand(1);
  Config c;

  auto common = [&c](CLI::App* sub) {
    sub->add_option("--seed", c.seed, "Random seed (mandatory)")->required();
    sub->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", c.out, "Output path (stdout when omitted)");
  };
  auto protocol = [&c](CLI::App* sub) {
    sub->add_option("--classes", c.classes, "Number of keypoint classes H")->check(CLI::PositiveNumber);
    sub->add_option("--ferns", c.ferns, "Number of ferns or trees")->check(CLI::PositiveNumber);
    sub->add_option("--fern-size", c.fern_size, "Tests per fern / tree depth")->check(CLI::Range(1, 24));
    sub->add_option("--patch", c.patch, "Patch size (odd)")->check(CLI::Range(3, 255));
    sub->add_option("--views-per-degree", c.views_per_degree, "Training views per rotation degree")
        ->check(CLI::PositiveNumber);
    sub->add_option("--degrees", c.degrees, "Rotation buckets")->check(CLI::PositiveNumber);
    sub->add_option("--class-views", c.class_views, "Warped views used to pick stable classes")
        ->check(CLI::PositiveNumber);
    sub->add_option("--smooth", c.smooth, "Box smoothing radius applied to views")->check(CLI::NonNegativeNumber);
  };
  auto testing = [&c](CLI::App* sub) {
    sub->add_option("--tests", c.tests, "Test views")->check(CLI::PositiveNumber);
    sub->add_option("--noise", c.noise, "Gaussian noise sigma on test views")->check(CLI::NonNegativeNumber);
    sub->add_flag("--timing", c.timing, "Measure ns_per_patch (otherwise reported as 0)");
  };

  auto* train = app.add_subcommand("train", "Select classes, synthesize views, train a model");
  common(train);
  protocol(train);
  train->add_option("--image", c.image, "Reference PGM")->required();
  train->add_option("--model", c.model, "Model file to write")->required();
  train->add_option("--structure", c.structure, "ferns or trees")->check(CLI::IsMember({"ferns", "trees"}));
  train->add_option("--combination", c.combination, "Forest combination: nb or avg")
      ->check(CLI::IsMember({"nb", "avg"}));

  auto* eval = app.add_subcommand("eval", "Recognition rate of a model on noisy test views");
  common(eval);
  testing(eval);
  eval->add_option("--image", c.image, "Reference PGM")->required();
  eval->add_option("--model", c.model, "Model file")->required();
  eval->add_option("--method", c.method, "FernNB, FernAvg, TreeNB or TreeAvg");
  eval->add_option("--smooth", c.smooth, "Box smoothing radius applied to views")->check(CLI::NonNegativeNumber);

  auto* sweep = app.add_subcommand("sweep", "Recognition rate against the number of units");
  common(sweep);
  protocol(sweep);
  testing(sweep);
  sweep->add_option("--image", c.image, "Reference PGM")->required();
  sweep->add_option("--method", c.method, "FernNB, FernAvg, TreeNB or TreeAvg");
  sweep->add_option("--units", c.units_list, "Unit counts, e.g. 1,5,10 or 1-50");
  sweep->add_option("--max-units", c.max_units, "Sweep 1..N when --units is omitted")
      ->check(CLI::PositiveNumber);

  auto* compare = app.add_subcommand("compare", "FernNB, FernAvg, TreeNB and TreeAvg on shared streams");
  common(compare);
  protocol(compare);
  testing(compare);
  compare->add_option("--image", c.image, "Reference PGM")->required();

  auto* match = app.add_subcommand("match", "Detect and classify keypoints in a scene");
  common(match);
  match->add_option("--model", c.model, "Model file")->required();
  match->add_option("--scene,--image", c.scene, "Scene PGM")->required();
  match->add_option("--max-keypoints", c.max_keypoints, "Detections to classify")->check(CLI::PositiveNumber);

  auto* warp = app.add_subcommand("warp", "Write one synthesized view and its manifest row");
  common(warp);
  warp->add_option("--image", c.image, "Reference PGM")->required();
  warp->get_option("--out")->required();
  warp->add_option("--manifest", c.manifest, "Manifest CSV (default <out>.csv)");
  warp->add_option("--noise", c.noise, "Gaussian noise sigma")->check(CLI::NonNegativeNumber)
      ->default_val(0);
  warp->add_option("--smooth", c.smooth, "Box smoothing radius")->check(CLI::NonNegativeNumber);
  warp->add_flag("--identity", c.identity, "Use the identity deformation");
  warp->add_option("--theta", c.theta, "Explicit rotation (radians)");
  warp->add_option("--phi", c.phi, "Explicit scaling axis angle (radians)");
  warp->add_option("--lambda1", c.lambda1, "Explicit first scale");
  warp->add_option("--lambda2", c.lambda2, "Explicit second scale");
  warp->add_option("--tx", c.tx, "Source-frame translation x");
  warp->add_option("--ty", c.ty, "Source-frame translation y");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  std::cerr << "#";
  for (int i = 0; i < argc; ++i) std::cerr << ' ' << argv[i];
  std::cerr << '\n';

  try {
    if (*train) return cmd_train(c);
    if (*eval) return cmd_eval(c);
    if (*sweep) return cmd_sweep(c);
    if (*compare) return cmd_compare(c);
    if (*match) return cmd_match(c);
    if (*warp) return cmd_warp(c);
  } catch (const InsufficientKeypoints& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const FormatError& e) {
    std::cerr << "error: FormatError: " << e.what() << '\n';
    return kExitMismatch;
  } catch (const CorruptModel& e) {
    std::cerr << "error: CorruptModel: " << e.what() << '\n';
    return kExitMismatch;
  } catch (const ModelMismatch& e) {
    std::cerr << "error: model/image mismatch: " << e.what() << '\n';
    return kExitMismatch;
  } catch (const OutOfBounds& e) {
    std::cerr << "error: model/image mismatch: " << e.what() << '\n';
    return kExitMismatch;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const UnsupportedFormat& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
