#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cris/checkpoint.hpp"
#include "cris/grad_suite.hpp"
#include "cris/metrics.hpp"
#include "cris/synth_data.hpp"
#include "cris/workflow.hpp"

namespace py = pybind11;
using namespace cris;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

BinaryMask to_mask(const U8Array& a) {
  if (a.ndim() != 2) throw py::value_error("mask must be a 2-D array");
  BinaryMask m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  const auto* p = a.data();
  for (std::size_t i = 0; i < m.pixels.size(); ++i) m.pixels[i] = p[i] ? 1 : 0;
  return m;
}

U8Array from_mask(const BinaryMask& m) {
  U8Array out({m.height, m.width});
  std::copy(m.pixels.begin(), m.pixels.end(), out.mutable_data());
  return out;
}

RgbImage to_image(const U8Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw py::value_error("image must be an HxWx3 uint8 array");
  RgbImage img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + img.rgb.size(), img.rgb.begin());
  return img;
}

U8Array from_image(const RgbImage& img) {
  U8Array out({img.height, img.width, 3});
  std::copy(img.rgb.begin(), img.rgb.end(), out.mutable_data());
  return out;
}

py::object parse_json(const nlohmann::json& doc) { return py::module_::import("json").attr("loads")(doc.dump()); }

nlohmann::json dump_json(const py::object& obj) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

class PyModel {
 public:
  explicit PyModel(std::unique_ptr<CrisModel> model) : model_(std::move(model)) {}

  U8Array predict(const U8Array& image, const std::string& expr) const {
    const RgbImage img = to_image(image);
    BinaryMask mask;
    {
      py::gil_scoped_release release;
      mask = model_->predict(image_tensor(img), model_->tokenize(expr));
    }
    return from_mask(mask);
  }

  py::object evaluate(const std::filesystem::path& data) const {
    const std::vector<Sample> samples = load_dataset(data);
    EvalReport report;
    {
      py::gil_scoped_release release;
      report = evaluate_dataset(*model_, std::span<const Sample>(samples));
    }
    return parse_json(report.to_json());
  }

  py::object config() const { return parse_json(to_json(model_->config())); }
  std::vector<int> tokenize(const std::string& expr) const { return model_->tokenize(expr).ids; }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Parameter& p : model_->parameters().all()) n += p.tensor.size();
    return n;
  }
  void save(const std::filesystem::path& path) const { save_checkpoint(*model_, path); }

 private:
  std::unique_ptr<CrisModel> model_;
};

}  // namespace

PYBIND11_MODULE(_cris, m) {
  m.doc() = "Referring image segmentation at desk scale";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def(
      "generate_dataset",
      [](const std::filesystem::path& out, int count, int size, std::uint64_t seed) {
        std::vector<py::dict> rows;
        for (const SampleRecord& r : generate_dataset(count, size, seed, out)) {
          rows.push_back(py::dict(py::arg("id") = r.id, py::arg("image") = r.image, py::arg("mask") = r.mask,
                                  py::arg("expr") = r.expr));
        }
        return rows;
      },
      py::arg("out"), py::arg("count"), py::arg("size") = 64, py::arg("seed") = 7);

  m.def(
      "load_dataset",
      [](const std::filesystem::path& dir) {
        std::vector<py::tuple> out;
        for (const Sample& s : load_dataset(dir)) out.push_back(py::make_tuple(s.id, from_image(s.image), from_mask(s.mask), s.expr));
        return out;
      },
      py::arg("dir"), "List of (id, image HxWx3, mask HxW, expression).");

  m.def("iou", [](const U8Array& pred, const U8Array& gt) { return iou(to_mask(pred), to_mask(gt)); }, py::arg("pred"),
        py::arg("gt"));
  m.def("precision_at", [](const std::vector<double>& ious, double x) { return precision_at(ious, x); }, py::arg("ious"),
        py::arg("x"));
  m.def(
      "summarize",
      [](const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
        std::vector<Overlap> overlaps;
        for (const auto& [i, u] : pairs) overlaps.push_back({i, u});
        return parse_json(summarize(overlaps).to_json());
      },
      py::arg("overlaps"), "Report from (intersection, union) pixel counts.");

  m.def(
      "grad_check",
      [](std::uint64_t seed) {
        GradSuiteReport report;
        {
          py::gil_scoped_release release;
          report = run_grad_suite(seed);
        }
        return py::dict(py::arg("worst") = report.worst(), py::arg("checked") = report.checked(),
                        py::arg("skipped") = report.skipped(), py::arg("passed") = report.passed());
      },
      py::arg("seed") = 7);

  m.def(
      "default_config", [](const std::string& profile) { return parse_json(to_json(RunConfig::for_profile(profile))); },
      py::arg("profile") = "desk");

  m.def(
      "train",
      [](const py::object& config, const std::filesystem::path& data, const std::filesystem::path& out) {
        const RunConfig c = config_from_json(dump_json(config));
        std::vector<Sample> samples = load_dataset(data);
        TrainResult result;
        {
          py::gil_scoped_release release;
          result = train(c, std::move(samples), out);
        }
        std::vector<py::object> log;
        for (const EpochLog& e : result.log) log.push_back(parse_json(e.to_json()));
        return py::dict(py::arg("log") = log, py::arg("best_epoch") = result.best_epoch,
                        py::arg("best_val_mean_iou") = result.best_val_mean_iou);
      },
      py::arg("config"), py::arg("data"), py::arg("out"));

  py::class_<PyModel>(m, "Model")
      .def_static("load", [](const std::filesystem::path& path) { return PyModel(load_checkpoint(path)); }, py::arg("path"))
      .def("predict", &PyModel::predict, py::arg("image"), py::arg("expr"), "Binary HxW mask for the expression.")
      .def("evaluate", &PyModel::evaluate, py::arg("data"))
      .def("tokenize", &PyModel::tokenize, py::arg("expr"))
      .def("save", &PyModel::save, py::arg("path"))
      .def_property_readonly("config", &PyModel::config)
      .def_property_readonly("parameter_count", &PyModel::parameter_count);
}
