#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "bgz/backend.hpp"
#include "bgz/bundle.hpp"
#include "bgz/cli.hpp"
#include "bgz/detector.hpp"
#include "bgz/ensemble.hpp"
#include "bgz/error.hpp"
#include "bgz/evaluation.hpp"
#include "bgz/features.hpp"
#include "bgz/pca.hpp"
#include "bgz/pipeline.hpp"

namespace py = pybind11;
using namespace bgz;

namespace {

using Box = std::tuple<double, double, double, double>;
using ScoredBox = std::tuple<double, double, double, double, double>;

BBox to_bbox(const Box& b) { return {std::get<0>(b), std::get<1>(b), std::get<2>(b), std::get<3>(b)}; }

ScoredBox from_detection(const Detection& d) { return {d.box.x1, d.box.y1, d.box.x2, d.box.y2, d.score}; }

cv::Mat image_from_array(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw ValidationError("image must be an HxWx3 uint8 RGB array");
  const cv::Mat view(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), CV_8UC3,
                     const_cast<std::uint8_t*>(a.data()));
  return view.clone();
}

Matrix matrix_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw ValidationError("expected a 2-d array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data.begin());
  return m;
}

py::array_t<double> array_from_matrix(const Matrix& m) {
  py::array_t<double> out({m.rows, m.cols});
  std::copy(m.data.begin(), m.data.end(), out.mutable_data());
  return out;
}

py::dict report_dict(const ClsEvalReport& r) {
  py::dict d;
  d["accuracy"] = r.accuracy;
  d["macro_f1"] = r.macro_f1;
  d["micro_f1"] = r.micro_f1;
  d["weighted_f1"] = r.weighted_f1;
  d["per_class_f1"] = r.f1;
  d["confusion"] = r.confusion;
  d["total"] = r.total;
  return d;
}

struct Detector {
  ModelHandle model;
  DetectorConfig cfg;

  std::vector<ScoredBox> detect(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& img,
                                double conf, double iou_thr, int max_det) const {
    DetectorConfig c = cfg;
    c.conf_threshold = conf;
    c.nms_iou_threshold = iou_thr;
    c.max_detections = max_det;
    const cv::Mat rgb = image_from_array(img);
    std::vector<Detection> dets;
    {
      py::gil_scoped_release unlocked;
      dets = bgz::detect(rgb, model, c);
    }
    std::vector<ScoredBox> out;
    for (const auto& d : dets) out.push_back(from_detection(d));
    return out;
  }
};

Detector make_detector(const std::optional<std::filesystem::path>& path, int input_size, std::uint64_t stub_seed) {
  Detector d;
  d.cfg.input_size = input_size;
  d.cfg.validate();
  if (path) {
    const auto s = static_cast<std::int64_t>(input_size);
    d.model = load_model(*path, BackendKind::GraphRuntime, Shape{1, 3, s, s});
  } else {
    d.model = make_stub_detector(input_size, stub_seed);
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_bgz, m) {
  m.doc() = "Billboard detection and gaze-duration classification";
  m.attr("__version__") = kVersion;

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<RuntimeFailure>(m, "RuntimeFailure", PyExc_RuntimeError);

  m.def("iou", [](const Box& a, const Box& b) { return iou(to_bbox(a), to_bbox(b)); }, py::arg("a"), py::arg("b"),
        "IoU of two (x1, y1, x2, y2) boxes.");

  m.def(
      "nms",
      [](const std::vector<ScoredBox>& boxes, double iou_threshold, int max_detections) {
        std::vector<Detection> dets;
        for (const auto& [x1, y1, x2, y2, s] : boxes) dets.push_back({{x1, y1, x2, y2}, s});
        std::vector<ScoredBox> out;
        for (const auto& d : nms(std::move(dets), iou_threshold, max_detections)) out.push_back(from_detection(d));
        return out;
      },
      py::arg("boxes"), py::arg("iou_threshold") = 0.7, py::arg("max_detections") = 300,
      "Greedy NMS over (x1, y1, x2, y2, score) tuples; returns the kept boxes by descending score.");

  m.def(
      "average_precision",
      [](const std::vector<double>& scores, const std::vector<bool>& true_positive, int total_gt) {
        if (scores.size() != true_positive.size()) throw ValidationError("scores and flags differ in length");
        std::vector<ScoredMatch> ms;
        for (std::size_t i = 0; i < scores.size(); ++i) ms.push_back({scores[i], true_positive[i]});
        return average_precision(ms, total_gt);
      },
      py::arg("scores"), py::arg("true_positive"), py::arg("total_gt"), "101-point interpolated AP.");

  m.def(
      "classification_report",
      [](const std::vector<int>& y_true, const std::vector<int>& y_pred) {
        return report_dict(classification_report(y_true, y_pred));
      },
      py::arg("y_true"), py::arg("y_pred"));

  m.def(
      "aggregate_votes",
      [](const std::vector<Proba>& probs) { return static_cast<int>(aggregate_votes(probs)); }, py::arg("probs"),
      "Argmax of the summed probability vectors; ties go to the lower class.");

  m.def(
      "pca_fit",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x, std::size_t k) {
        const PcaTransform t = pca_fit(matrix_from_array(x), k);
        py::dict d;
        d["mean"] = py::array_t<double>(static_cast<py::ssize_t>(t.mean.size()), t.mean.data());
        d["components"] = array_from_matrix(t.components);
        d["explained_variance"] = t.explained_variance;
        return d;
      },
      py::arg("x"), py::arg("k") = 3, "PCA of the rows of x: mean, k x d components, explained variance.");

  py::class_<Detector>(m, "Detector")
      .def(py::init(&make_detector), py::arg("model_path") = std::nullopt, py::arg("input_size") = 640,
           py::arg("stub_seed") = 0,
           "Load an ONNX detector, or build the deterministic stub when no path is given.")
      .def("detect", &Detector::detect, py::arg("image"), py::arg("conf") = 0.25, py::arg("iou") = 0.7,
           py::arg("max_det") = 300, "Detect billboards in an HxWx3 uint8 RGB array.");

  py::class_<EnsembleModel>(m, "Model")
      .def_static("load", [](const std::filesystem::path& p) { return load_bundle(p); }, py::arg("path"))
      .def_property_readonly("spec", [](const EnsembleModel& e) { return e.feature_spec.to_string(); })
      .def_property_readonly("width", [](const EnsembleModel& e) { return e.feature_spec.width(); })
      .def("predict_proba", [](const EnsembleModel& e, const std::vector<double>& row) { return e.predict_proba(row); },
           py::arg("row"))
      .def("summary", [](const EnsembleModel& e) { return bundle_summary(e); });

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release unlocked;
          code = run_cli(args, out, err, [](const char* k) -> const char* { return std::getenv(k); });
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
