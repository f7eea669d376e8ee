#pragma once

// Command implementations behind the `ssenc` tool. Each command writes its
// outputs below cfg.out_dir() and echoes the effective configuration to
// <out_dir>/config.txt.

#include <filesystem>
#include <string>
#include <vector>

#include "ssenc/config.hpp"
#include "ssenc/metrics.hpp"

namespace ssenc {

struct GenOutputs {
    std::filesystem::path train, val, test;
};

/// Noisy training and validation sets at cfg noise_ratio, noiseless test set.
GenOutputs cmd_gen(const RunConfig& cfg);

struct TrainSummary {
    double best_val_nrms = 0.0;
    int best_epoch = 0;
    std::size_t epochs = 0;
    std::filesystem::path checkpoint;
    std::filesystem::path log;
};

/// Trains the configured method on train_file/val_file. A checkpoint of the
/// initial model is written when no epoch improves on it.
TrainSummary cmd_train(const RunConfig& cfg);

struct EvalOutputs {
    EvalReport report;
    std::vector<std::size_t> spikes;  // frame indices t with a per-frame RMS spike
    std::filesystem::path dir;
};

/// eval.csv, per_frame_rms.csv, nstep_nrms.csv, spikes.csv and strip.pgm in
/// out_dir. Empty paths default to the configured checkpoint and test_file.
EvalOutputs cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint = {},
                     const std::filesystem::path& dataset = {});

std::vector<double> cmd_nstep(const RunConfig& cfg, const std::filesystem::path& checkpoint = {},
                              const std::filesystem::path& dataset = {});

std::filesystem::path cmd_strip(const RunConfig& cfg, const std::filesystem::path& checkpoint = {},
                                const std::filesystem::path& dataset = {});

struct Table1Row {
    double noise_ratio = 0.0;
    double baseline_nrms = 0.0;
    double proposed_nrms = 0.0;
};

/// Trains and evaluates both methods at every noise level; writes table1.csv.
std::vector<Table1Row> cmd_table1(const RunConfig& cfg);

/// Sanity check of a dataset against a checkpoint's widths.
void check_dataset_matches(const Dataset& data, int n_u, int n_y, const std::filesystem::path& source);

} // namespace ssenc
