#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cli.hpp"
#include "ganf/config_json.hpp"
#include "ganf/dataset.hpp"
#include "ganf/detector.hpp"
#include "ganf/model.hpp"
#include "ganf/spectrum.hpp"

namespace py = pybind11;
using namespace ganf;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

ImageBuffer to_image(const Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw std::invalid_argument("expected an H x W x 3 array");
  const auto h = static_cast<std::size_t>(a.shape(0)), w = static_cast<std::size_t>(a.shape(1));
  return ImageBuffer(h, w, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const ImageBuffer& img) {
  Array out({img.height(), img.width(), std::size_t{3}});
  std::copy(img.values().begin(), img.values().end(), out.mutable_data());
  return out;
}

std::vector<ImageBuffer> to_images(const std::vector<Array>& arrays) {
  std::vector<ImageBuffer> out;
  for (const auto& a : arrays) out.push_back(to_image(a));
  return out;
}

template <typename T>
T parse_config(const std::string& json_text) {
  T c;
  from_json(nlohmann::json::parse(json_text.empty() ? "{}" : json_text), c);
  return c;
}

py::dict report_dict(const DetectionReport& r) {
  py::dict d;
  d["n_tn"] = r.n_tn;
  d["n_tp"] = r.n_tp;
  d["n_fn"] = r.n_fn;
  d["n_fp"] = r.n_fp;
  d["n_qf"] = r.n_qf;
  d["n_qr"] = r.n_qr;
  d["acc"] = r.acc;
  d["acc_fake"] = r.acc_fake;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of gan_forensics";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  m.def(
      "synth_image",
      [](const std::string& spec_json, const std::string& domain, const std::string& split, std::size_t index) {
        if (domain != "A" && domain != "B") throw std::invalid_argument("domain must be 'A' or 'B'");
        if (split != "train" && split != "test") throw std::invalid_argument("split must be 'train' or 'test'");
        return to_array(synth_image(parse_config<SyntheticSpec>(spec_json), domain == "A" ? Domain::A : Domain::B,
                                    split == "train" ? Split::Train : Split::Test, index));
      },
      py::arg("spec_json"), py::arg("domain"), py::arg("split"), py::arg("index"));

  m.def("load_image", [](const std::filesystem::path& p) { return to_array(load_image(p)); });
  m.def("save_image", [](const Array& a, const std::filesystem::path& p) { save_image(to_image(a), p); });

  m.def("fft", [](std::vector<Complex> data) {
    fft(data);
    return data;
  });
  m.def("log_spectrum", [](const Array& a) {
    const auto p = log_spectrum(to_image(a));
    Array s2({p.height, p.width});
    std::copy(p.spectrum_2d.begin(), p.spectrum_2d.end(), s2.mutable_data());
    return py::make_tuple(s2, Array(static_cast<py::ssize_t>(p.spectrum_1d.size()), p.spectrum_1d.data()));
  });
  m.def("nyquist_energy_ratio", [](const Array& a) { return nyquist_energy_ratio(to_image(a)); });
  m.def("analyze_artifacts", [](const Array& a, double threshold) {
    return to_json(analyze_artifacts(to_image(a), threshold)).dump();
  }, py::arg("image"), py::arg("prominence_threshold") = 1.0);

  py::class_<DetectorModel>(m, "Detector")
      .def_readonly("training_accuracy", &DetectorModel::training_accuracy)
      .def_readonly("weights", &DetectorModel::weights)
      .def_readonly("bias", &DetectorModel::bias)
      .def("classify",
           [](const DetectorModel& d, const Array& a) {
             const auto c = classify(d, to_image(a));
             return py::make_tuple(std::string(label_name(c.label)), c.score);
           })
      .def("evaluate",
           [](const DetectorModel& d, const std::vector<Array>& real, const std::vector<Array>& fake) {
             return report_dict(evaluate(d, to_images(real), to_images(fake)));
           })
      .def("to_json", [](const DetectorModel& d) { return to_json(d).dump(); })
      .def_static("from_json", [](const std::string& s) { return detector_from_json(nlohmann::json::parse(s)); });

  m.def(
      "train_detector",
      [](const std::vector<Array>& real, const std::vector<Array>& fake, const std::string& config_json) {
        return train_detector(to_images(real), to_images(fake), parse_config<DetectorConfig>(config_json));
      },
      py::arg("real"), py::arg("fake"), py::arg("config_json") = "");

  m.def("report_from_counts", [](std::size_t n_tn, std::size_t n_tp, std::size_t n_qf, std::size_t n_qr) {
    return report_dict(DetectionReport::from_counts(n_tn, n_tp, n_qf, n_qr));
  });

  py::class_<CycleGAN>(m, "CycleGAN")
      .def(py::init([](const std::string& gen, const std::string& disc, const std::string& train) {
             return CycleGAN(parse_config<GeneratorConfig>(gen), parse_config<DiscriminatorConfig>(disc),
                             parse_config<TrainingConfig>(train));
           }),
           py::arg("generator_json") = "", py::arg("discriminator_json") = "", py::arg("training_json") = "")
      .def_property_readonly("step", &CycleGAN::step)
      .def("train",
           [](CycleGAN& model, const std::vector<Array>& a, const std::vector<Array>& b, std::uint64_t until) {
             model.train(to_images(a), to_images(b), until);
           })
      .def("generate",
           [](const CycleGAN& model, const Array& image, const std::string& direction) {
             if (direction != "ab" && direction != "ba") throw std::invalid_argument("direction must be 'ab' or 'ba'");
             return to_array(generate(direction == "ab" ? model.g_ab() : model.g_ba(), to_image(image)));
           },
           py::arg("image"), py::arg("direction") = "ab")
      .def("history",
           [](const CycleGAN& model) {
             py::list rows;
             for (const auto& r : model.history()) {
               py::dict d;
               d["step"] = r.step;
               d["adv_d_a"] = r.adv_d_a;
               d["adv_d_b"] = r.adv_d_b;
               d["adv_g_ab"] = r.adv_g_ab;
               d["adv_g_ba"] = r.adv_g_ba;
               d["cycle_a"] = r.cycle_a;
               d["cycle_b"] = r.cycle_b;
               d["identity"] = r.identity;
               d["total_g"] = r.total_g;
               rows.append(d);
             }
             return rows;
           })
      .def("save", &CycleGAN::save)
      .def_static("load", &CycleGAN::load);

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
  });
}
