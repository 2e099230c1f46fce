// SPDX-License-Identifier: Apache-2.0
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>
#include <string>

#include "livlr/checkpoint.hpp"
#include "livlr/checks.hpp"
#include "livlr/config.hpp"
#include "livlr/data.hpp"
#include "livlr/errors.hpp"
#include "livlr/trainer.hpp"

namespace py = pybind11;
using namespace livlr;

namespace {

// Dicts cross the boundary as JSON text.
nlohmann::json to_nl(const py::object& obj) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

ModelConfig config_of(const py::object& obj) {
  auto cfg = config_from_json(to_nl(obj));
  cfg.validate();
  return cfg;
}

py::dict metrics_dict(const EpochMetrics& m) {
  py::dict d;
  d["epoch"] = m.epoch;
  d["train_loss"] = m.train_loss;
  d["train_acc"] = m.train_acc;
  d["wall_ms"] = m.wall_ms;
  return d;
}

py::dict eval_dict(const EvalResult& r) {
  py::dict d;
  d["samples"] = r.samples;
  d["loss"] = r.loss;
  d["accuracy"] = r.accuracy;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the livlr package";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<DataError>(m, "DataError", base);
  py::register_exception<NumericError>(m, "NumericError", base);
  py::register_exception<CheckpointError>(m, "CheckpointError", base);
  py::register_exception<ShapeError>(m, "ShapeError", base);

  m.def("preset", [](const std::string& name) { return to_py(to_json(preset(name))); }, py::arg("name"));
  m.def("canonical_config", [](const py::object& cfg) { return to_py(to_json(config_of(cfg))); }, py::arg("config"));

  m.def(
      "param_count",
      [](const py::object& cfg) {
        const auto c = param_count(config_of(cfg));
        py::dict d;
        d["total"] = c.total;
        d["by_module"] = c.by_module;
        return d;
      },
      py::arg("config"));

  m.def(
      "grad_check",
      [](const py::object& cfg, std::uint64_t seed, double tolerance) {
        const auto c = config_of(cfg);
        GradCheckReport r;
        {
          py::gil_scoped_release release;
          r = grad_check(c, seed, 1e-5, tolerance);
        }
        py::dict d;
        d["passed"] = r.passed();
        d["wall_ms"] = r.wall_ms;
        py::dict per_tensor;
        for (const auto& t : r.tensors) per_tensor[py::str(t.name)] = t.max_rel_error;
        d["max_rel_error"] = per_tensor;
        return d;
      },
      py::arg("config"), py::arg("seed") = 0, py::arg("tolerance") = 1e-4);

  py::class_<data::Dataset>(m, "Dataset")
      .def("__len__", [](const data::Dataset& ds) { return ds.samples.size(); })
      .def_property_readonly("labels",
                             [](const data::Dataset& ds) {
                               std::vector<std::size_t> out;
                               for (const auto& s : ds.samples) out.push_back(s.label);
                               return out;
                             })
      .def_readonly("planted_source", &data::Dataset::planted_source)
      .def("save", [](const data::Dataset& ds, const std::string& path) { data::write_dataset(ds, path); },
           py::arg("path"));

  m.def(
      "gen_synthetic",
      [](const py::object& spec, const py::object& cfg) {
        return data::gen_synthetic(data::task_spec_from_json(to_nl(spec)), config_of(cfg));
      },
      py::arg("spec"), py::arg("config"));
  m.def("read_dataset", &data::read_dataset, py::arg("path"));

  py::class_<LivlrModel, std::unique_ptr<LivlrModel>>(m, "Model")
      .def(py::init([](const py::object& cfg) { return std::make_unique<LivlrModel>(config_of(cfg)); }),
           py::arg("config"))
      .def_property_readonly("config", [](const LivlrModel& mdl) { return to_py(to_json(mdl.config())); })
      .def_property_readonly("num_parameters", [](const LivlrModel& mdl) { return mdl.params().scalar_count(); })
      .def_property_readonly("parameter_names", [](const LivlrModel& mdl) { return mdl.params().names(); })
      .def(
          "train",
          [](LivlrModel& mdl, const data::Dataset& ds, std::optional<std::size_t> epochs, const std::string& csv) {
            TrainOptions opts;
            opts.epochs = epochs;
            opts.metrics_csv = csv;
            std::vector<EpochMetrics> trace;
            {
              py::gil_scoped_release release;
              trace = train(mdl, ds, opts);
            }
            py::list out;
            for (const auto& e : trace) out.append(metrics_dict(e));
            return out;
          },
          py::arg("dataset"), py::arg("epochs") = py::none(), py::arg("metrics_csv") = "")
      .def(
          "evaluate",
          [](const LivlrModel& mdl, const data::Dataset& ds) {
            EvalResult r;
            {
              py::gil_scoped_release release;
              r = evaluate(mdl, ds);
            }
            return eval_dict(r);
          },
          py::arg("dataset"))
      .def(
          "save", [](const LivlrModel& mdl, const std::string& path) { save_checkpoint(path, mdl.config(), mdl.params()); },
          py::arg("path"));

  m.def("load_model", &load_model, py::arg("path"));
}
