#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mygo/commands.hpp"
#include "mygo/errors.hpp"

namespace py = pybind11;
using namespace mygo;

namespace {

// Settings arrive as a dict of key -> value; values go through the same
// parser as config files.
RunConfig to_config(const py::dict& settings) {
    RunConfig config;
    for (const auto& [key, value] : settings) {
        std::string text;
        if (py::isinstance<py::bool_>(value)) text = value.cast<bool>() ? "true" : "false";
        else text = py::str(value).cast<std::string>();
        config.set(key.cast<std::string>(), text);
    }
    return config;
}

py::dict metrics_dict(const MetricsReport& report) {
    const char* directions[] = {"tail", "head", "both"};
    py::dict out;
    out["triples"] = report.triples;
    for (int setting = 0; setting < 2; ++setting) {
        py::dict by_direction;
        for (std::size_t d = 0; d < 3; ++d) {
            const RankMetrics& m = setting == 0 ? report.raw[d] : report.filtered[d];
            py::dict row;
            row["mrr"] = m.mrr;
            row["hits1"] = m.hits1;
            row["hits3"] = m.hits3;
            row["hits10"] = m.hits10;
            by_direction[directions[d]] = row;
        }
        out[setting == 0 ? "raw" : "filtered"] = by_direction;
    }
    return out;
}

py::array_t<float> to_array(const NamedTensor& t) {
    std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
    py::array_t<float> a(shape);
    std::copy(t.values.begin(), t.values.end(), a.mutable_data());
    return a;
}

}  // namespace

PYBIND11_MODULE(_mygo, m) {
    m.doc() = "Multi-modal knowledge-graph completion core";

    // Translators run newest first, so the base class goes in first.
    const auto base = py::register_exception<Error>(m, "MygoError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<NumericError>(m, "NumericError", base.ptr());

    m.def("version", &tool_version);

    m.def(
        "synth",
        [](const std::filesystem::path& dir, std::size_t entities, std::size_t relations, std::size_t train,
           std::size_t valid, std::size_t test, std::uint64_t seed) {
            SyntheticSpec spec;
            spec.entities = entities;
            spec.relations = relations;
            spec.train = train;
            spec.valid = valid;
            spec.test = test;
            spec.seed = seed;
            cmd_synth(spec, dir);
        },
        py::arg("dir"), py::arg("entities") = 20, py::arg("relations") = 3, py::arg("train") = 60,
        py::arg("valid") = 0, py::arg("test") = 0, py::arg("seed") = 0,
        "Write a random multi-modal dataset into dir.");

    m.def(
        "prepare",
        [](const py::dict& settings) {
            const PrepareResult r = cmd_prepare(to_config(settings));
            py::dict out;
            out["cache"] = r.cache;
            out["visual_coverage"] = r.visual.coverage;
            out["visual_catalog_usage"] = r.visual.catalog_usage;
            out["textual_coverage"] = r.textual.coverage;
            out["textual_catalog_usage"] = r.textual.catalog_usage;
            return out;
        },
        py::arg("settings"), "Refine token streams and write the refined cache.");

    m.def(
        "train",
        [](const py::dict& settings) {
            const RunConfig config = to_config(settings);
            TrainResult r;
            {
                py::gil_scoped_release release;
                r = cmd_train(config);
            }
            py::dict out;
            out["last_checkpoint"] = r.last_checkpoint;
            out["best_checkpoint"] = r.best_checkpoint ? py::cast(*r.best_checkpoint) : py::none();
            py::list log;
            for (const StepLog& s : r.log) log.append(py::make_tuple(s.epoch, s.step, s.kgc, s.con, s.total));
            out["log"] = log;
            return out;
        },
        py::arg("settings"), "Train; returns checkpoint paths and (epoch, step, L_kgc, L_con, total) tuples.");

    m.def(
        "evaluate",
        [](const py::dict& settings, const std::filesystem::path& checkpoint, const std::string& split,
           bool dump_scores) { return metrics_dict(cmd_eval(to_config(settings), checkpoint, split, dump_scores)); },
        py::arg("settings"), py::arg("checkpoint"), py::arg("split") = "test", py::arg("dump_scores") = false);

    m.def(
        "gradcheck",
        [](const py::dict& settings, double step) {
            GradCheckOptions options;
            options.step = step;
            const GradCheckReport r = cmd_gradcheck(GradCheckSetup::from(to_config(settings)), options);
            py::dict groups;
            for (const auto& g : r.groups) groups[py::str(g.name)] = g.max_rel_error;
            py::dict out;
            out["max_rel_error"] = r.max_rel_error();
            out["loss"] = r.loss;
            out["groups"] = groups;
            return out;
        },
        py::arg("settings") = py::dict(), py::arg("step") = 1e-4,
        "Finite-difference check of every parameter gradient on a tiny model.");

    m.def(
        "load_checkpoint",
        [](const std::filesystem::path& path) {
            const Checkpoint c = load_checkpoint(path);
            py::dict params, optimizer;
            for (const auto& t : c.params) params[py::str(t.name)] = to_array(t);
            for (const auto& t : c.optimizer) optimizer[py::str(t.name)] = to_array(t);
            py::dict out;
            out["params"] = params;
            out["optimizer"] = optimizer;
            out["step"] = c.step;
            out["epoch"] = c.epoch;
            out["config"] = c.config_echo;
            return out;
        },
        py::arg("path"), "Read a checkpoint into numpy arrays.");
}
