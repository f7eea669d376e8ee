// ssenc: data generation, training and evaluation of state-space encoder
// models on the ball-in-box video benchmark.
//
//   ssenc gen    [--config FILE] [--set key=value ...]
//   ssenc train  [--config FILE] [--set key=value ...]
//   ssenc eval   [--checkpoint PATH] [--data PATH] ...
//   ssenc nstep  [--checkpoint PATH] [--data PATH] ...
//   ssenc strip  [--checkpoint PATH] [--data PATH] ...
//   ssenc table1 ...
//   ssenc keys

#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ssenc/commands.hpp"
#include "ssenc/config.hpp"

namespace {

struct Common {
    std::string config_file;
    std::vector<std::string> overrides;
    std::string checkpoint;
    std::string data;
};

void add_common(CLI::App* cmd, Common& c, bool model_io) {
    cmd->add_option("-c,--config", c.config_file, "key=value configuration file");
    cmd->add_option("-s,--set", c.overrides, "override a config key (key=value), repeatable");
    if (model_io) {
        cmd->add_option("--checkpoint", c.checkpoint, "checkpoint (default: <out_dir>/<checkpoint>)");
        cmd->add_option("--data", c.data, "dataset (default: <out_dir>/<test_file>)");
    }
}

ssenc::RunConfig build_config(const Common& c) {
    ssenc::RunConfig cfg = c.config_file.empty() ? ssenc::RunConfig{} : ssenc::RunConfig::load(c.config_file);
    for (const auto& o : c.overrides) cfg.apply_override(o);
    return cfg;
}

void print_keys() {
    for (const auto& k : ssenc::RunConfig::keys())
        std::cout << std::left << std::setw(18) << k.name << " = " << std::setw(34) << k.default_value << "# "
                  << k.doc << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"State-space encoder identification from video"};
    app.require_subcommand(1);
    Common c;

    auto* gen = app.add_subcommand("gen", "generate train/val/test datasets");
    auto* train = app.add_subcommand("train", "train the configured method");
    auto* eval = app.add_subcommand("eval", "simulation NRMS, per-frame RMS, n-step NRMS and a frame strip");
    auto* nstep = app.add_subcommand("nstep", "n-step-ahead prediction NRMS");
    auto* strip = app.add_subcommand("strip", "measured vs simulated frame strip (PGM)");
    auto* table1 = app.add_subcommand("table1", "noise-level x method NRMS grid");
    auto* keys = app.add_subcommand("keys", "list config keys with defaults");
    for (auto* cmd : {gen, train, table1}) add_common(cmd, c, false);
    for (auto* cmd : {eval, nstep, strip}) add_common(cmd, c, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (keys->parsed()) {
            print_keys();
            return 0;
        }
        const ssenc::RunConfig cfg = build_config(c);
        if (gen->parsed()) {
            const auto out = ssenc::cmd_gen(cfg);
            std::cout << out.train.string() << "\n" << out.val.string() << "\n" << out.test.string() << "\n";
        } else if (train->parsed()) {
            const auto s = ssenc::cmd_train(cfg);
            std::cout << "best epoch " << s.best_epoch << " of " << s.epochs << ", validation NRMS "
                      << s.best_val_nrms << "\ncheckpoint " << s.checkpoint.string() << "\n";
        } else if (eval->parsed()) {
            const auto out = ssenc::cmd_eval(cfg, c.checkpoint, c.data);
            std::cout << "simulation NRMS " << out.report.sim_nrms << "\n";
            if (!out.report.nstep_nrms.empty())
                std::cout << "NRMS_1 " << out.report.nstep_nrms.front() << ", NRMS_" << out.report.nstep_nrms.size()
                          << " " << out.report.nstep_nrms.back() << "\n";
            std::cout << out.spikes.size() << " error spikes\n";
        } else if (nstep->parsed()) {
            const auto v = ssenc::cmd_nstep(cfg, c.checkpoint, c.data);
            for (std::size_t i = 0; i < v.size(); ++i) std::cout << i + 1 << " " << v[i] << "\n";
        } else if (strip->parsed()) {
            std::cout << ssenc::cmd_strip(cfg, c.checkpoint, c.data).string() << "\n";
        } else if (table1->parsed()) {
            std::cout << "noise_ratio baseline proposed\n";
            for (const auto& r : ssenc::cmd_table1(cfg))
                std::cout << r.noise_ratio << " " << r.baseline_nrms << " " << r.proposed_nrms << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "ssenc: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
