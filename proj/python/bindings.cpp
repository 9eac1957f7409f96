#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "inducer/attention.hpp"
#include "inducer/checkpoint.hpp"
#include "inducer/run.hpp"
#include "inducer/verify.hpp"

namespace py = pybind11;
using namespace inducer;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a)
{
    if (a.ndim() != 1 && a.ndim() != 2) throw ShapeError("expected a 1-D or 2-D array");
    Shape shape(a.shape(), a.shape() + a.ndim());
    return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t)
{
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    Array out(shape);
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

py::dict record_dict(const MetricsRecord& r)
{
    py::dict d;
    d["step"] = r.step;
    d["loss"] = r.loss;
    d["acc"] = r.acc;
    d["em"] = r.em;
    d["mode"] = r.mode;
    d["trainable_pct"] = r.trainable_pct;
    d["wall_ms"] = r.wall_ms;
    return d;
}

py::dict report_dict(const ParamReport& r)
{
    py::dict d;
    d["base_total"] = r.base_total;
    d["total"] = r.total;
    d["trainable"] = r.trainable;
    d["storable"] = r.storable;
    d["trainable_pct"] = r.trainable_pct;
    d["storable_pct"] = r.storable_pct;
    return d;
}

std::unique_ptr<Mask> causal_mask(bool causal, std::size_t n)
{
    return causal ? std::make_unique<Mask>(Mask::causal(n)) : nullptr;
}

}  // namespace

PYBIND11_MODULE(_inducer, m)
{
    m.doc() = "Inducer-tuning and parameter-efficient fine-tuning on a from-scratch autodiff core";

    m.def(
        "mode_names",
        [] {
            auto names = mode_kind_names();
            for (const auto& n : TuningMode::preset_names())
                if (!parse_mode_kind(n)) names.push_back(n);
            return names;
        },
        "Mode kinds followed by the named presets that are not kinds.");

    m.def(
        "count_params",
        [](const std::string& preset, const std::string& mode, const std::map<std::string, std::size_t>& overrides) {
            const auto cfg = ModelConfig::from_preset(preset);
            const auto tm = resolve_mode(mode, overrides);
            return report_dict(count_params(parameter_layout(cfg, tm), tm));
        },
        py::arg("preset") = "gpt2-small", py::arg("mode") = "inducer",
        py::arg("overrides") = std::map<std::string, std::size_t>{});

    m.def(
        "head_attention",
        [](const Array& q, const Array& k, const Array& v, bool causal) {
            const Tensor qt = to_tensor(q);
            const auto mask = causal_mask(causal, qt.rows());
            return to_array(head_attention(qt, to_tensor(k), to_tensor(v), mask.get()));
        },
        py::arg("q"), py::arg("k"), py::arg("v"), py::arg("causal") = false);

    m.def(
        "kernel_estimate",
        [](const Array& q, const Array& k, const Array& c) {
            const auto view = kernel_estimate(to_tensor(q), to_tensor(k), to_tensor(c));
            return py::make_tuple(to_array(view.estimate), to_array(view.weights));
        },
        py::arg("q"), py::arg("k"), py::arg("c"), "Returns (estimate, weights).");

    py::class_<Model>(m, "Model")
        .def(py::init([](const std::string& preset, const std::string& mode,
                         const std::map<std::string, std::size_t>& overrides, std::uint64_t seed) {
                 Model model = build_model(ModelConfig::from_preset(preset), resolve_mode(mode, overrides), seed);
                 freeze_base(model);
                 return model;
             }),
             py::arg("preset") = "toy", py::arg("mode") = "full",
             py::arg("overrides") = std::map<std::string, std::size_t>{}, py::arg("seed") = 0)
        .def_static(
            "load", [](const std::filesystem::path& path) { return load_checkpoint(path); }, py::arg("path"))
        .def(
            "save", [](const Model& self, const std::filesystem::path& path) { save_checkpoint(self, path); },
            py::arg("path"))
        .def(
            "forward", [](const Model& self, const std::vector<int>& tokens) { return to_array(self.forward(tokens)); },
            py::arg("tokens"), "Logits, one row per input token.")
        .def_property_readonly("mode", [](const Model& self) { return self.mode().name(); })
        .def_property_readonly("seed", &Model::seed)
        .def_property_readonly("vocab", [](const Model& self) { return self.config().vocab; })
        .def_property_readonly("context", [](const Model& self) { return self.config().context; })
        .def("parameter_names", [](const Model& self) { return self.params().names(); })
        .def("trainable_names", [](const Model& self) { return self.params().trainable_names(); })
        .def(
            "parameter", [](const Model& self, const std::string& name) { return to_array(self.params().get(name)); },
            py::arg("name"))
        .def("count_params", [](const Model& self) { return report_dict(count_params(self)); });

    m.def(
        "train",
        [](const std::filesystem::path& config, const std::filesystem::path& out_dir, std::optional<std::uint64_t> seed) {
            RunConfig cfg = RunConfig::load(config);
            if (seed) cfg.set_seed(*seed);
            std::vector<MetricsRecord> records;
            {
                py::gil_scoped_release release;
                records = execute_run(cfg, out_dir);
            }
            py::list out;
            for (const auto& r : records) out.append(record_dict(r));
            return out;
        },
        py::arg("config"), py::arg("out_dir"), py::arg("seed") = py::none(),
        "Runs one training job from a config file; writes config.cfg, metrics.jsonl and checkpoint.bin.");

    m.def(
        "verify",
        [](const std::string& suite, std::uint64_t seed) {
            py::list out;
            for (const auto& r : run_verify_suite(suite, seed)) {
                py::dict d;
                d["suite"] = r.suite;
                d["name"] = r.name;
                d["passed"] = r.passed;
                d["observed"] = r.observed;
                d["bound"] = r.bound;
                out.append(d);
            }
            return out;
        },
        py::arg("suite") = "all", py::arg("seed") = 1);
}
