#include "ssenc/commands.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include "ssenc/error.hpp"
#include "ssenc/trainer.hpp"

namespace ssenc {

namespace fs = std::filesystem;

namespace {

void prepare_out_dir(const RunConfig& cfg) {
    fs::create_directories(cfg.out_dir());
    cfg.save(cfg.out_dir() / "config.txt");
}

Dataset load_dataset(const fs::path& path) {
    if (!fs::exists(path)) throw Error("dataset " + path.string() + " not found (run `ssenc gen` first)");
    return sim::read_ssid(path);
}

// Calls f(model) with the model stored in `path`, whatever its kind and precision.
template <class F>
void with_checkpoint(const fs::path& path, F&& f) {
    if (!fs::exists(path)) throw Error("checkpoint " + path.string() + " not found");
    const CheckpointInfo info = peek_checkpoint(path);
    if (info.magic == "SSCK") {
        if (info.scalar_bytes == 8) f(load_checkpoint<double>(path));
        else f(load_checkpoint<float>(path));
    } else {
        if (info.scalar_bytes == 8) f(load_baseline_checkpoint<double>(path));
        else f(load_baseline_checkpoint<float>(path));
    }
}

template <class T, class Model>
TrainSummary run_training(Model model, const Dataset& train, const Dataset& val, const TrainConfig& tc) {
    auto res = ssenc::train(model, train, val, tc);
    TrainSummary s;
    s.best_epoch = res.best_epoch;
    s.best_val_nrms = res.best_val_nrms;
    s.epochs = res.log.epochs.size();
    s.checkpoint = tc.checkpoint_path;
    s.log = tc.log_path;
    if (res.best_epoch == 0) {
        // No epoch improved on (or ran after) the initialization.
        try {
            s.best_val_nrms = validation_nrms<T>(model, normalize<T>(val, model.norm), val, tc.sigma_y);
        } catch (const DivergenceError&) {
            s.best_val_nrms = std::numeric_limits<double>::infinity();
        }
        save_checkpoint(model, tc.checkpoint_path, {0, s.best_val_nrms});
    }
    res.log.write_csv(tc.log_path);
    return s;
}

template <class T>
TrainSummary train_method(const RunConfig& cfg, const Dataset& train, const Dataset& val, const TrainConfig& tc) {
    const NormStats norm = compute_norm(train, cfg.norm_mode());
    if (tc.method == Method::Proposed) {
        SsEncoderModel<T> model(cfg.hyper(), norm);
        model.init(tc.seed);
        return run_training<T>(std::move(model), train, val, tc);
    }
    IoAutoencoderModel<T> model(cfg.baseline_hyper(), norm);
    model.init(tc.seed);
    return run_training<T>(std::move(model), train, val, tc);
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

fs::path resolve(const RunConfig& cfg, const fs::path& given, const std::string& key) {
    return given.empty() ? cfg.path(key) : given;
}

template <class Model>
void check_model_data(const Model& m, const Dataset& data, const fs::path& source) {
    check_dataset_matches(data, m.hyper.n_u, m.hyper.n_y, source);
}

std::vector<std::size_t> strip_columns(const RunConfig& cfg, std::size_t t_start, std::size_t n_samples) {
    std::vector<std::size_t> cols;
    for (int t : cfg.get_int_list("strip_times")) {
        if (t < 0 || static_cast<std::size_t>(t) < t_start || static_cast<std::size_t>(t) >= n_samples)
            throw IndexError("strip time " + std::to_string(t) + " outside the simulated range [" +
                             std::to_string(t_start) + ", " + std::to_string(n_samples - 1) + "]");
        cols.push_back(static_cast<std::size_t>(t) - t_start);
    }
    return cols;
}

} // namespace

void check_dataset_matches(const Dataset& data, int n_u, int n_y, const fs::path& source) {
    if (data.n_u != n_u || data.n_y() != n_y) {
        std::ostringstream msg;
        msg << source.string() << ": frames of " << data.n_X << "x" << data.n_Y << " pixels and " << data.n_u
            << " inputs do not match the model (" << n_y << " pixels, " << n_u << " inputs)";
        throw DimensionError(msg.str());
    }
}

GenOutputs cmd_gen(const RunConfig& cfg) {
    prepare_out_dir(cfg);
    const auto ball = cfg.ball();
    const auto cam = cfg.camera();
    const double a = cfg.get_real("noise_ratio");
    if (a < 0.0) throw ConfigError("noise_ratio must be non-negative");
    GenOutputs out{cfg.path("train_file"), cfg.path("val_file"), cfg.path("test_file")};
    sim::write_ssid(sim::generate_dataset(cfg.get_uint("n_train"), a, cfg.get_uint("train_seed"), ball, cam),
                    out.train);
    sim::write_ssid(sim::generate_dataset(cfg.get_uint("n_val"), a, cfg.get_uint("val_seed"), ball, cam), out.val);
    sim::write_ssid(sim::generate_dataset(cfg.get_uint("n_test"), 0.0, cfg.get_uint("test_seed"), ball, cam),
                    out.test);
    return out;
}

TrainSummary cmd_train(const RunConfig& cfg) {
    prepare_out_dir(cfg);
    const TrainConfig tc = cfg.train_config();
    const Dataset train = load_dataset(cfg.path("train_file"));
    const Dataset val = load_dataset(cfg.path("val_file"));
    const int n_y = cfg.camera().n_pixels();
    check_dataset_matches(train, 2, n_y, cfg.path("train_file"));
    check_dataset_matches(val, 2, n_y, cfg.path("val_file"));
    return tc.precision == Precision::F32 ? train_method<float>(cfg, train, val, tc)
                                          : train_method<double>(cfg, train, val, tc);
}

EvalOutputs cmd_eval(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& dataset) {
    prepare_out_dir(cfg);
    const fs::path ckpt = resolve(cfg, checkpoint, "checkpoint");
    const fs::path data_path = resolve(cfg, dataset, "test_file");
    const Dataset data = load_dataset(data_path);
    EvalOutputs out;
    out.dir = cfg.out_dir();
    const double sigma = cfg.get_real("sigma_y");
    const int n_max = static_cast<int>(cfg.get_int("n_max"));
    with_checkpoint(ckpt, [&](const auto& model) {
        check_model_data(model, data, data_path);
        out.report = evaluate(model, data, n_max, sigma);
    });
    out.spikes = find_spikes(out.report.per_frame_rms, cfg.get_real("spike_factor"));
    for (auto& s : out.spikes) s += out.report.t_start;

    write_eval_csv(out.dir / "eval.csv", out.report);
    write_per_frame_csv(out.dir / "per_frame_rms.csv", out.report);
    write_nstep_csv(out.dir / "nstep_nrms.csv", out.report.nstep_nrms);
    {
        std::ofstream os(out.dir / "spikes.csv");
        os << std::setprecision(17) << "t,rms\n";
        for (auto t : out.spikes) os << t << "," << out.report.per_frame_rms[Eigen::Index(t - out.report.t_start)] << "\n";
    }
    const auto cols = strip_columns(cfg, out.report.t_start, data.n_samples);
    render_strip(frames_matrix(data, out.report.t_start), out.report.simulated, data.n_X, data.n_Y, cols,
                 out.dir / "strip.pgm", static_cast<int>(cfg.get_int("strip_scale")));
    return out;
}

std::vector<double> cmd_nstep(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& dataset) {
    prepare_out_dir(cfg);
    const fs::path ckpt = resolve(cfg, checkpoint, "checkpoint");
    const fs::path data_path = resolve(cfg, dataset, "test_file");
    const Dataset data = load_dataset(data_path);
    std::vector<double> out;
    with_checkpoint(ckpt, [&](const auto& model) {
        check_model_data(model, data, data_path);
        out = nstep_nrms(model, data, static_cast<int>(cfg.get_int("n_max")), cfg.get_real("sigma_y"));
    });
    write_nstep_csv(cfg.out_dir() / "nstep_nrms.csv", out);
    return out;
}

fs::path cmd_strip(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& dataset) {
    prepare_out_dir(cfg);
    const fs::path ckpt = resolve(cfg, checkpoint, "checkpoint");
    const fs::path data_path = resolve(cfg, dataset, "test_file");
    const Dataset data = load_dataset(data_path);
    const fs::path out = cfg.out_dir() / "strip.pgm";
    with_checkpoint(ckpt, [&](const auto& model) {
        check_model_data(model, data, data_path);
        const std::size_t t0 = history_length(model.hyper);
        const FrameMatrix sim = simulate_model(model, data);
        render_strip(frames_matrix(data, t0), sim, data.n_X, data.n_Y, strip_columns(cfg, t0, data.n_samples), out,
                     static_cast<int>(cfg.get_int("strip_scale")));
    });
    return out;
}

std::vector<Table1Row> cmd_table1(const RunConfig& cfg) {
    prepare_out_dir(cfg);
    const fs::path root = cfg.out_dir();
    const fs::path test_path = root / "test.ssid";
    sim::write_ssid(sim::generate_dataset(cfg.get_uint("n_test"), 0.0, cfg.get_uint("test_seed"), cfg.ball(),
                                          cfg.camera()),
                    test_path);

    std::vector<Table1Row> rows;
    for (double a : cfg.get_real_list("noise_levels")) {
        Table1Row row;
        row.noise_ratio = a;
        std::ostringstream tag;
        tag << "a_" << a;
        RunConfig level = cfg;
        level.set("out_dir", (root / tag.str()).string());
        level.set("noise_ratio", fmt(a));
        level.set("test_file", test_path.string());
        cmd_gen(level);
        for (const char* method : {"baseline", "proposed"}) {
            RunConfig run = level;
            run.set("out_dir", (root / tag.str() / method).string());
            run.set("method", method);
            run.set("train_file", level.path("train_file").string());
            run.set("val_file", level.path("val_file").string());
            if (cfg.get_bool("verbose")) std::cerr << "table1: a = " << a << ", " << method << "\n";
            cmd_train(run);
            double v = std::numeric_limits<double>::infinity();
            try {
                v = cmd_eval(run).report.sim_nrms;
            } catch (const DivergenceError& e) {
                std::cerr << "warning: table1: a = " << a << ", " << method << ": simulation diverged (" << e.what()
                          << "), recorded as inf\n";
            }
            (std::string(method) == "baseline" ? row.baseline_nrms : row.proposed_nrms) = v;
        }
        rows.push_back(row);
        std::ofstream os(root / "table1.csv", std::ios::trunc);
        os << std::setprecision(17) << "noise_ratio,baseline_nrms,proposed_nrms\n";
        for (const auto& r : rows) os << r.noise_ratio << "," << r.baseline_nrms << "," << r.proposed_nrms << "\n";
    }
    return rows;
}

} // namespace ssenc
