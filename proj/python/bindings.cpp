#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>
#include <string>

#include "ferns/dataset.hpp"
#include "ferns/errors.hpp"
#include "ferns/eval.hpp"
#include "ferns/ferns.hpp"
#include "ferns/keypoints.hpp"
#include "ferns/trees.hpp"

namespace py = pybind11;
using namespace ferns;

namespace {

GrayImage image_from_array(py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> a) {
  if (a.ndim() != 2) throw InvalidArgument("expected a 2-D uint8 array");
  const auto h = static_cast<int>(a.shape(0));
  const auto w = static_cast<int>(a.shape(1));
  return GrayImage(w, h, std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
}

py::array_t<std::uint8_t> image_to_array(const GrayImage& img) {
  py::array_t<std::uint8_t> out({img.height(), img.width()});
  std::memcpy(out.mutable_data(), img.data().data(), img.data().size());
  return out;
}

py::bytes to_bytes(const Bytes& b) {
  return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
}

Bytes from_bytes(const py::bytes& b) {
  const std::string s = b;
  return Bytes(s.begin(), s.end());
}

}  // namespace

PYBIND11_MODULE(_ferns, m) {
  m.doc() = "Random-ferns keypoint recognition";

  auto base = py::register_exception<Error>(m, "FernsError", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", base);
  py::register_exception<UnsupportedFormat>(m, "UnsupportedFormat", base);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base);
  py::register_exception<OutOfBounds>(m, "OutOfBounds", base);
  py::register_exception<InsufficientKeypoints>(m, "InsufficientKeypoints", base);
  py::register_exception<InvalidLabel>(m, "InvalidLabel", base);
  py::register_exception<InvalidPatch>(m, "InvalidPatch", base);
  py::register_exception<FormatError>(m, "FormatError", base);
  py::register_exception<CorruptModel>(m, "CorruptModel", base);
  py::register_exception<EmptyTestSet>(m, "EmptyTestSet", base);

  // Images --------------------------------------------------------------------
  py::class_<GrayImage>(m, "GrayImage")
      .def(py::init<int, int, std::uint8_t>(), py::arg("width"), py::arg("height"), py::arg("fill") = 0)
      .def(py::init(&image_from_array), py::arg("array"))
      .def_property_readonly("width", &GrayImage::width)
      .def_property_readonly("height", &GrayImage::height)
      .def("at", &GrayImage::at, py::arg("x"), py::arg("y"))
      .def("crop", &GrayImage::crop, py::arg("x0"), py::arg("y0"), py::arg("w"), py::arg("h"))
      .def("to_numpy", &image_to_array)
      .def("__eq__", [](const GrayImage& a, const GrayImage& b) { return a == b; })
      .def("__repr__", [](const GrayImage& g) {
        return "<GrayImage " + std::to_string(g.width()) + "x" + std::to_string(g.height()) + ">";
      });

  m.def("read_pgm", [](const py::bytes& b) { return read_pgm(from_bytes(b)); }, py::arg("data"));
  m.def("write_pgm", [](const GrayImage& g) { return to_bytes(write_pgm(g)); }, py::arg("image"));
  m.def("read_pgm_file", [](const std::string& p) { return read_pgm_file(p); }, py::arg("path"));
  m.def("write_pgm_file", [](const std::string& p, const GrayImage& g) { write_pgm_file(p, g); },
        py::arg("path"), py::arg("image"));
  m.def("make_textured_image", &make_textured_image, py::arg("width"), py::arg("height"), py::arg("seed"));

  py::class_<AffineDeform>(m, "AffineDeform")
      .def(py::init([](double theta, double phi, double l1, double l2, double tx, double ty) {
             return AffineDeform{theta, phi, l1, l2, tx, ty};
           }),
           py::arg("theta") = 0.0, py::arg("phi") = 0.0, py::arg("lambda1") = 1.0,
           py::arg("lambda2") = 1.0, py::arg("tx") = 0.0, py::arg("ty") = 0.0)
      .def_readwrite("theta", &AffineDeform::theta)
      .def_readwrite("phi", &AffineDeform::phi)
      .def_readwrite("lambda1", &AffineDeform::lambda1)
      .def_readwrite("lambda2", &AffineDeform::lambda2)
      .def_readwrite("tx", &AffineDeform::tx)
      .def_readwrite("ty", &AffineDeform::ty)
      .def("matrix", [](const AffineDeform& d) {
        const Mat2 a = deform_matrix(d);
        return py::make_tuple(py::make_tuple(a.a, a.b), py::make_tuple(a.c, a.d));
      });

  m.def("sample_deformation", [](std::uint64_t seed) {
    Rng rng(seed);
    return sample_deformation(rng);
  }, py::arg("seed"));
  m.def("warp_image", &warp_image, py::arg("image"), py::arg("deform"), py::arg("out_w"), py::arg("out_h"));
  m.def("add_noise", [](const GrayImage& g, double sigma, std::uint64_t seed) {
    Rng rng(seed);
    return add_noise(g, sigma, rng);
  }, py::arg("image"), py::arg("sigma"), py::arg("seed"));
  m.def("box_smooth", &box_smooth, py::arg("image"), py::arg("radius"));

  // Keypoints -----------------------------------------------------------------
  py::class_<Keypoint>(m, "Keypoint")
      .def(py::init([](double x, double y, double r) { return Keypoint{x, y, r}; }), py::arg("x"),
           py::arg("y"), py::arg("response") = 0.0)
      .def_readwrite("x", &Keypoint::x)
      .def_readwrite("y", &Keypoint::y)
      .def_readwrite("response", &Keypoint::response)
      .def("__repr__", [](const Keypoint& k) {
        return "<Keypoint " + format_real(k.x) + "," + format_real(k.y) + ">";
      });

  py::class_<ClassSet>(m, "ClassSet")
      .def(py::init<>())
      .def_readwrite("keypoints", &ClassSet::keypoints)
      .def_readwrite("patch_size", &ClassSet::patch_size)
      .def("__len__", &ClassSet::size);

  m.def("detect_keypoints", &detect_keypoints, py::arg("image"), py::arg("max_count"),
        py::arg("patch_size") = 31);
  m.def("select_stable_classes",
        [](const GrayImage& img, std::size_t h, std::uint64_t seed, int patch_size, std::size_t views) {
          Rng rng = Rng::derive(seed, "classes");
          ClassSelectionOptions o;
          o.patch_size = patch_size;
          o.num_views = views;
          return select_stable_classes(img, h, rng, o);
        },
        py::arg("image"), py::arg("h"), py::arg("seed"), py::arg("patch_size") = 31,
        py::arg("num_views") = 50);

  // Dataset -------------------------------------------------------------------
  py::class_<DatasetSpec>(m, "DatasetSpec")
      .def(py::init([](std::size_t vpd, std::size_t degrees, std::size_t tests, double noise, int smooth) {
             DatasetSpec s;
             s.views_per_degree = vpd;
             s.rotation_degrees = degrees;
             s.test_views = tests;
             s.noise_sigma = noise;
             s.smooth_radius = smooth;
             return s;
           }),
           py::arg("views_per_degree") = 2, py::arg("rotation_degrees") = 360,
           py::arg("test_views") = 1000, py::arg("noise_sigma") = 10.0, py::arg("smooth_radius") = 0)
      .def_readwrite("views_per_degree", &DatasetSpec::views_per_degree)
      .def_readwrite("rotation_degrees", &DatasetSpec::rotation_degrees)
      .def_readwrite("test_views", &DatasetSpec::test_views)
      .def_readwrite("noise_sigma", &DatasetSpec::noise_sigma)
      .def_readwrite("smooth_radius", &DatasetSpec::smooth_radius)
      .def("training_views", &DatasetSpec::training_views);

  py::enum_<Stream>(m, "Stream").value("Training", Stream::Training).value("Test", Stream::Test);

  py::class_<PatchSample>(m, "PatchSample")
      .def_readonly("patch", &PatchSample::patch)
      .def_readonly("label", &PatchSample::label)
      .def_readonly("deform", &PatchSample::deform)
      .def_readonly("view_id", &PatchSample::view_id);

  m.def("collect_set",
        [](const GrayImage& img, const ClassSet& cs, const DatasetSpec& spec, Stream stream,
           std::uint64_t seed, unsigned threads) {
          py::gil_scoped_release release;
          return collect_set(img, cs, spec, stream, seed, nullptr, threads);
        },
        py::arg("image"), py::arg("classes"), py::arg("spec"), py::arg("stream"), py::arg("seed"),
        py::arg("threads") = 1);

  // Classifiers ---------------------------------------------------------------
  py::enum_<Combination>(m, "Combination")
      .value("Average", Combination::Average)
      .value("NaiveBayes", Combination::NaiveBayes);

  py::class_<ClassScore>(m, "ClassScore")
      .def_readonly("class_id", &ClassScore::class_id)
      .def_readonly("log_score", &ClassScore::log_score);

  py::class_<FernModel>(m, "FernModel")
      .def(py::init([](ClassSet cs, std::size_t s, std::size_t size, std::uint64_t seed) {
             Rng rng = Rng::derive(seed, "ferns");
             const int patch = cs.patch_size;
             return FernModel(std::move(cs), make_random_ferns(s, size, patch, rng));
           }),
           py::arg("classes"), py::arg("num_ferns") = 30, py::arg("fern_size") = 10, py::arg("seed") = 0)
      .def_property_readonly("num_classes", &FernModel::num_classes)
      .def_property_readonly("num_ferns", &FernModel::num_ferns)
      .def_property_readonly("fern_size", &FernModel::fern_size)
      .def_property_readonly("patch_size", &FernModel::patch_size)
      .def_property_readonly("classes", &FernModel::classes)
      .def("accumulate", &FernModel::accumulate, py::arg("patch"), py::arg("label"))
      .def("rebuild", &FernModel::rebuild)
      .def("train", [](FernModel& self, const std::vector<PatchSample>& samples) {
        self = train(std::move(self), samples);
      }, py::arg("samples"))
      .def("truncated", &FernModel::truncated, py::arg("k"))
      .def("classify", [](const FernModel& self, const GrayImage& img, std::optional<Keypoint> c) {
        return classify(self, img, c.value_or(patch_center(img)));
      }, py::arg("image"), py::arg("center") = std::nullopt)
      .def("classify_averaged", [](const FernModel& self, const GrayImage& img, std::optional<Keypoint> c) {
        return classify_averaged(self, img, c.value_or(patch_center(img)));
      }, py::arg("image"), py::arg("center") = std::nullopt)
      .def("posterior", [](const FernModel& self, const GrayImage& img, std::optional<Keypoint> c) {
        return posterior(self, img, c.value_or(patch_center(img)));
      }, py::arg("image"), py::arg("center") = std::nullopt)
      .def("save", [](const FernModel& self) { return to_bytes(save_model(self)); })
      .def_static("load", [](const py::bytes& b) { return load_model(from_bytes(b)); }, py::arg("data"))
      .def("__eq__", [](const FernModel& a, const FernModel& b) { return a == b; });

  py::class_<TreeForest>(m, "TreeForest")
      .def(py::init([](ClassSet cs, std::size_t t, int depth, Combination mode, std::uint64_t seed) {
             Rng rng = Rng::derive(seed, "trees");
             const int patch = cs.patch_size;
             return TreeForest(std::move(cs), make_random_trees(t, depth, patch, rng), mode);
           }),
           py::arg("classes"), py::arg("num_trees") = 30, py::arg("depth") = 10,
           py::arg("combination") = Combination::NaiveBayes, py::arg("seed") = 0)
      .def_property_readonly("num_trees", &TreeForest::num_trees)
      .def_property_readonly("depth", &TreeForest::depth)
      .def_property("combination", &TreeForest::combination, &TreeForest::set_combination)
      .def("train", [](TreeForest& self, const std::vector<PatchSample>& samples) {
        self = train_forest(std::move(self), samples);
      }, py::arg("samples"))
      .def("classify", [](const TreeForest& self, const GrayImage& img, std::optional<Keypoint> c) {
        return classify_forest(self, img, c.value_or(patch_center(img)));
      }, py::arg("image"), py::arg("center") = std::nullopt)
      .def("save", [](const TreeForest& self) { return to_bytes(save_forest(self)); })
      .def_static("load", [](const py::bytes& b) { return load_forest(from_bytes(b)); }, py::arg("data"));

  // Evaluation ----------------------------------------------------------------
  py::enum_<Method>(m, "Method")
      .value("FernNB", Method::FernNB)
      .value("FernAvg", Method::FernAvg)
      .value("TreeNB", Method::TreeNB)
      .value("TreeAvg", Method::TreeAvg);

  py::class_<EvalRecord>(m, "EvalRecord")
      .def_property_readonly("method", [](const EvalRecord& r) { return std::string(method_name(r.method)); })
      .def_readonly("units", &EvalRecord::units)
      .def_readonly("recognition_rate", &EvalRecord::recognition_rate)
      .def_readonly("patches_evaluated", &EvalRecord::patches_evaluated)
      .def_readonly("classify_ns_per_patch", &EvalRecord::classify_ns_per_patch)
      .def_readonly("seed", &EvalRecord::seed);

  m.def("recognition_rate",
        [](const FernModel& model, const std::vector<PatchSample>& test, Combination mode, std::size_t units) {
          return recognition_rate(model, mode, test, units);
        },
        py::arg("model"), py::arg("test"), py::arg("combination") = Combination::NaiveBayes,
        py::arg("units") = 0);

  m.def("sweep_units",
        [](const GrayImage& img, const ClassSet& cs, const DatasetSpec& spec, Method method,
           std::vector<std::size_t> counts, std::uint64_t seed, std::size_t fern_size, unsigned threads) {
          EvalOptions o;
          o.fern_size = fern_size;
          o.threads = threads;
          py::gil_scoped_release release;
          return sweep_units(img, cs, spec, method, counts, seed, o);
        },
        py::arg("image"), py::arg("classes"), py::arg("spec"), py::arg("method"), py::arg("unit_counts"),
        py::arg("seed"), py::arg("fern_size") = 10, py::arg("threads") = 1);

  m.def("compare_methods",
        [](const GrayImage& img, const ClassSet& cs, const DatasetSpec& spec, std::size_t units,
           std::uint64_t seed, std::size_t fern_size, unsigned threads) {
          EvalOptions o;
          o.fern_size = fern_size;
          o.threads = threads;
          py::gil_scoped_release release;
          return compare_methods(img, cs, spec, units, seed, o).records;
        },
        py::arg("image"), py::arg("classes"), py::arg("spec"), py::arg("units"), py::arg("seed"),
        py::arg("fern_size") = 10, py::arg("threads") = 1);
}
