#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ssenc/commands.hpp"
#include "ssenc/config.hpp"
#include "ssenc/error.hpp"
#include "ssenc/metrics.hpp"
#include "ssenc/simulator.hpp"

namespace py = pybind11;
using namespace ssenc;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using OptPath = std::optional<std::filesystem::path>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::array_t<float> frames_of(const Dataset& d) {
    py::array_t<float> a({static_cast<py::ssize_t>(d.n_samples), static_cast<py::ssize_t>(d.n_Y),
                          static_cast<py::ssize_t>(d.n_X)});
    std::copy(d.y.begin(), d.y.end(), a.mutable_data());
    return a;
}

py::array_t<float> inputs_of(const Dataset& d) {
    py::array_t<float> a({static_cast<py::ssize_t>(d.n_samples), static_cast<py::ssize_t>(d.n_u)});
    std::copy(d.u.begin(), d.u.end(), a.mutable_data());
    return a;
}

Dataset make_dataset(const FloatArray& u, const FloatArray& y, double noise_ratio, std::uint64_t seed) {
    if (u.ndim() != 2 || y.ndim() != 3 || u.shape(0) != y.shape(0))
        throw DimensionError("expected u of shape (N, n_u) and y of shape (N, n_Y, n_X)");
    Dataset d;
    d.n_samples = static_cast<std::size_t>(u.shape(0));
    d.n_u = static_cast<int>(u.shape(1));
    d.n_Y = static_cast<int>(y.shape(1));
    d.n_X = static_cast<int>(y.shape(2));
    d.noise_ratio = noise_ratio;
    d.seed = seed;
    d.u.assign(u.data(), u.data() + u.size());
    d.y.assign(y.data(), y.data() + y.size());
    d.validate();
    return d;
}

// (N, n_Y, n_X) or (N, n_y) array to an n_y x N matrix.
FrameMatrix to_frames(const DoubleArray& a) {
    if (a.ndim() < 2) throw DimensionError("expected an array of frames");
    const Eigen::Index n = a.shape(0);
    const Eigen::Index n_y = a.size() / std::max<Eigen::Index>(n, 1);
    return Eigen::Map<const FrameMatrix>(a.data(), n_y, n);
}

py::array_t<double> from_frames(const FrameMatrix& m, int n_X, int n_Y) {
    py::array_t<double> a({static_cast<py::ssize_t>(m.cols()), static_cast<py::ssize_t>(n_Y),
                           static_cast<py::ssize_t>(n_X)});
    std::copy(m.data(), m.data() + m.size(), a.mutable_data());
    return a;
}

py::dict report_dict(const EvalReport& r, int n_X, int n_Y) {
    py::dict d;
    d["t_start"] = r.t_start;
    d["sim_nrms"] = r.sim_nrms;
    d["per_frame_rms"] = std::vector<double>(r.per_frame_rms.data(), r.per_frame_rms.data() + r.per_frame_rms.size());
    d["nstep_nrms"] = r.nstep_nrms;
    d["simulated"] = from_frames(r.simulated, n_X, n_Y);
    return d;
}

EvalReport evaluate_checkpoint(const std::filesystem::path& path, const Dataset& data, int n_max, double sigma_y) {
    const CheckpointInfo info = peek_checkpoint(path);
    EvalReport r;
    auto run = [&](const auto& model) {
        check_dataset_matches(data, model.hyper.n_u, model.hyper.n_y, path);
        r = evaluate(model, data, n_max, sigma_y);
    };
    if (info.magic == "SSCK") {
        if (info.scalar_bytes == 8) run(load_checkpoint<double>(path));
        else run(load_checkpoint<float>(path));
    } else {
        if (info.scalar_bytes == 8) run(load_baseline_checkpoint<double>(path));
        else run(load_baseline_checkpoint<float>(path));
    }
    return r;
}

} // namespace

PYBIND11_MODULE(_ssenc, m) {
    m.doc() = "Encoder-based neural state-space identification of a simulated ball-in-a-box video system";

    auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<DimensionError>(m, "DimensionError", error.ptr());
    py::register_exception<DivergenceError>(m, "DivergenceError", error.ptr());
    py::register_exception<SingularityError>(m, "SingularityError", error.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
    py::register_exception<FormatError>(m, "FormatError", error.ptr());
    py::register_exception<IndexError>(m, "IndexError", error.ptr());

    py::class_<Dataset>(m, "Dataset")
        .def(py::init(&make_dataset), py::arg("u"), py::arg("y"), py::arg("noise_ratio") = 0.0, py::arg("seed") = 0)
        .def_readonly("n_samples", &Dataset::n_samples)
        .def_readonly("n_u", &Dataset::n_u)
        .def_readonly("n_X", &Dataset::n_X)
        .def_readonly("n_Y", &Dataset::n_Y)
        .def_readonly("noise_ratio", &Dataset::noise_ratio)
        .def_readonly("seed", &Dataset::seed)
        .def_property_readonly("u", &inputs_of, "inputs, shape (N, n_u)")
        .def_property_readonly("y", &frames_of, "frames, shape (N, n_Y, n_X)")
        .def("__len__", [](const Dataset& d) { return d.n_samples; })
        .def("__repr__", [](const Dataset& d) {
            return "<Dataset " + std::to_string(d.n_samples) + " frames of " + std::to_string(d.n_X) + "x" +
                   std::to_string(d.n_Y) + ", noise " + std::to_string(d.noise_ratio) + ">";
        });

    m.def(
        "generate_dataset",
        [](std::size_t n, double a, std::uint64_t seed, int n_X, int n_Y) {
            sim::CameraParams cam;
            cam.n_X = n_X;
            cam.n_Y = n_Y;
            py::gil_scoped_release release;
            return sim::generate_dataset(n, a, seed, {}, cam);
        },
        py::arg("n_samples"), py::arg("noise_ratio") = 0.0, py::arg("seed") = 0, py::arg("n_X") = 25,
        py::arg("n_Y") = 25, "Simulate the ball system with uniform random inputs and render noisy frames.");
    m.def("read_ssid", &sim::read_ssid, py::arg("path"));
    m.def("write_ssid", &sim::write_ssid, py::arg("dataset"), py::arg("path"));

    m.attr("SIGMA_Y") = kSigmaY;
    m.def(
        "nrms", [](const DoubleArray& p, const DoubleArray& t, double s) { return nrms(to_frames(p), to_frames(t), s); },
        py::arg("predictions"), py::arg("targets"), py::arg("sigma_y") = kSigmaY);
    m.def(
        "per_frame_rms",
        [](const DoubleArray& p, const DoubleArray& t) {
            const Eigen::VectorXd r = per_frame_rms(to_frames(p), to_frames(t));
            return std::vector<double>(r.data(), r.data() + r.size());
        },
        py::arg("predictions"), py::arg("targets"));
    m.def(
        "evaluate_checkpoint",
        [](const std::filesystem::path& path, const Dataset& data, int n_max, double sigma_y) {
            EvalReport r;
            {
                py::gil_scoped_release release;
                r = evaluate_checkpoint(path, data, n_max, sigma_y);
            }
            return report_dict(r, data.n_X, data.n_Y);
        },
        py::arg("checkpoint"), py::arg("dataset"),
          py::arg("n_max") = 50, py::arg("sigma_y") = kSigmaY);

    py::class_<RunConfig>(m, "RunConfig")
        .def(py::init<>())
        .def_static("load", &RunConfig::load, py::arg("path"))
        .def_static("keys",
                    [] {
                        std::vector<std::string> out;
                        for (const auto& k : RunConfig::keys()) out.push_back(k.name);
                        return out;
                    })
        .def("set", [](RunConfig& c, const std::string& k, const py::object& v) { c.set(k, py::str(v)); })
        .def("get", &RunConfig::get)
        .def("__getitem__", &RunConfig::get)
        .def("__setitem__", [](RunConfig& c, const std::string& k, const py::object& v) { c.set(k, py::str(v)); })
        .def("dump", &RunConfig::dump)
        .def("save", &RunConfig::save)
        .def("path", &RunConfig::path)
        .def(py::self == py::self);

    m.def("gen", [](const RunConfig& c) {
        const GenOutputs o = cmd_gen(c);
        return py::make_tuple(o.train, o.val, o.test);
    });
    m.def(
        "train",
        [](const RunConfig& c) {
            TrainSummary s;
            {
                py::gil_scoped_release release;
                s = cmd_train(c);
            }
            py::dict d;
            d["best_val_nrms"] = s.best_val_nrms;
            d["best_epoch"] = s.best_epoch;
            d["epochs"] = s.epochs;
            d["checkpoint"] = s.checkpoint;
            d["log"] = s.log;
            return d;
        },
        "Train with the settings in the config; writes the checkpoint and the CSV log.");
    m.def(
        "eval",
        [](const RunConfig& c, const OptPath& ckpt, const OptPath& data) {
            EvalOutputs o;
            {
                py::gil_scoped_release release;
                o = cmd_eval(c, ckpt.value_or(""), data.value_or(""));
            }
            const auto cam = c.camera();
            py::dict d = report_dict(o.report, cam.n_X, cam.n_Y);
            d["spikes"] = o.spikes;
            d["dir"] = o.dir;
            return d;
        },
        py::arg("config"), py::arg("checkpoint") = py::none(), py::arg("data") = py::none());
    m.def(
        "nstep",
        [](const RunConfig& c, const OptPath& ckpt, const OptPath& data) {
            py::gil_scoped_release release;
            return cmd_nstep(c, ckpt.value_or(""), data.value_or(""));
        },
        py::arg("config"), py::arg("checkpoint") = py::none(), py::arg("data") = py::none());
    m.def("table1", [](const RunConfig& c) {
        std::vector<Table1Row> rows;
        {
            py::gil_scoped_release release;
            rows = cmd_table1(c);
        }
        py::list out;
        for (const auto& r : rows) out.append(py::make_tuple(r.noise_ratio, r.baseline_nrms, r.proposed_nrms));
        return out;
    });
}
