#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "commands.hpp"
#include "inmerge/checkpoint.hpp"
#include "inmerge/config_io.hpp"
#include "inmerge/error.hpp"
#include "inmerge/merge.hpp"
#include "inmerge/metrics.hpp"

namespace py = pybind11;
using namespace inmerge;

namespace {

py::array_t<float> to_numpy(const Tensor& t) {
  py::array_t<float> out(t.shape());
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

// JSON text is handed to Python, which parses it with the json module.
std::string evaluate_json(const std::filesystem::path& checkpoint,
                          const std::filesystem::path& data, const std::string& split) {
  cli::EvalOptions o;
  o.checkpoint = checkpoint;
  o.data = data;
  o.split = parse_split_name(split);
  std::ostringstream os;
  cli::cmd_eval(o, os);
  return os.str();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bindings for the inmerge training engine";

  auto base = py::register_exception<Error>(m, "InmergeError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<CheckpointError>(m, "CheckpointError", base.ptr());

  m.def("auroc",
        [](const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
          return auroc(scores, labels);
        },
        py::arg("scores"), py::arg("labels"));

  m.def("cosine_similarity",
        [](const std::vector<float>& a, const std::vector<float>& b) {
          return cosine_similarity(a, b);
        },
        py::arg("a"), py::arg("b"));

  m.def("synth",
        [](const std::filesystem::path& out, const std::string& kind,
           const std::string& task, std::size_t classes, std::size_t per_class,
           std::size_t height, std::size_t width, std::uint64_t seed, double label_noise) {
          cli::SynthOptions o;
          o.spec.kind = parse_synth_kind(kind);
          o.spec.task = parse_head_kind(task);
          o.spec.classes = classes;
          o.spec.per_class = per_class;
          o.spec.height = height;
          o.spec.width = width;
          o.spec.seed = seed;
          o.spec.label_noise = label_noise;
          o.out = out;
          std::ostringstream log;
          cli::cmd_synth(o, log);
        },
        py::arg("out"), py::arg("kind") = "striped_textures", py::arg("task") = "multiclass",
        py::arg("classes") = 4, py::arg("per_class") = 100, py::arg("height") = 28,
        py::arg("width") = 28, py::arg("seed") = 0, py::arg("label_noise") = 0.0);

  m.def("train",
        [](const std::filesystem::path& config, std::optional<std::filesystem::path> out) {
          cli::TrainOptions o;
          o.config = config;
          o.out = out;
          std::ostringstream log;
          {
            py::gil_scoped_release release;
            cli::cmd_train(o, log);
          }
          return log.str();
        },
        py::arg("config"), py::arg("out") = std::nullopt,
        "Runs a training config; returns the progress log.");

  m.def("_evaluate_json", &evaluate_json, py::arg("checkpoint"), py::arg("data"),
        py::arg("split") = "test");

  m.def("load_params",
        [](const std::filesystem::path& path) {
          const Checkpoint c = load_checkpoint(path);
          py::dict out;
          for (const auto& p : c.model.params()) out[py::str(p.name)] = to_numpy(p.value);
          return out;
        },
        py::arg("path"), "Model parameters of a checkpoint as numpy arrays.");

  m.def("kernel_similarity",
        [](const std::filesystem::path& path, std::size_t layer) {
          const Checkpoint c = load_checkpoint(path);
          const SimilarityStats s = similarity_stats(c.model, layer, 20);
          py::dict out;
          out["kernels"] = s.kernels;
          std::vector<std::tuple<std::size_t, std::size_t, double>> pairs;
          for (const auto& p : s.pairs) pairs.emplace_back(p.i, p.j, p.similarity);
          out["pairs"] = pairs;
          out["undefined_pairs"] = s.undefined_pairs;
          out["mean"] = s.mean;
          out["mean_abs"] = s.mean_abs;
          out["histogram"] = s.histogram;
          return out;
        },
        py::arg("checkpoint"), py::arg("layer"));
}
