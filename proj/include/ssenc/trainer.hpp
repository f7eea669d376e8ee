#pragma once

// Batched multiple-shooting training with per-epoch validation simulation and
// best-model checkpointing.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ssenc/baseline.hpp"
#include "ssenc/dataset.hpp"
#include "ssenc/model.hpp"
#include "ssenc/rng.hpp"

namespace ssenc {

enum class Method : std::uint8_t { Proposed, Baseline };
enum class Precision : std::uint8_t { F32, F64 };
enum class BaselineSchedule : std::uint8_t { Joint, Sequential };

struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;      // sample-weighted mean batch loss
    double val_nrms = 0.0;  // free-run simulation NRMS on the validation set
    double seconds = 0.0;
    bool best = false;
    std::size_t skipped_batches = 0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;

    /// epoch,loss,val_nrms,seconds,best
    void write_csv(const std::filesystem::path& path) const;
};

struct TrainConfig {
    int batch_size = 256;
    double learning_rate = 1e-3;
    int max_epochs = 100;
    std::uint64_t seed = 0;
    double noise_ratio = 0.0;
    Method method = Method::Proposed;
    Precision precision = Precision::F32;
    double sigma_y = 0.204;

    bool strict = false;   // rethrow divergence instead of skipping the batch
    bool dry_run = false;  // evaluate batches without updating parameters
    std::filesystem::path checkpoint_path;  // written on every new best; empty = none
    std::filesystem::path log_path;         // CSV rewritten after every epoch; empty = none
    bool verbose = false;

    BaselineWeights baseline_weights;
    BaselineSchedule baseline_schedule = BaselineSchedule::Joint;

    std::function<void(const EpochRecord&)> on_epoch;

    void validate() const;
};

/// Random permutation of `valid_starts` cut into consecutive batches of
/// `batch_size` (the last one may be short).
std::vector<std::vector<std::size_t>> make_epoch_batches(std::span<const std::size_t> valid_starts, int batch_size,
                                                         Rng& rng);

template <class Model>
struct TrainResult {
    Model model;  // parameters of the epoch with the lowest validation NRMS
    TrainLog log;
    double best_val_nrms = std::numeric_limits<double>::infinity();
    int best_epoch = 0;  // 0 = initial parameters
};

/// `model.norm` is used to normalize both datasets.
template <class T>
TrainResult<SsEncoderModel<T>> train(SsEncoderModel<T> model, const Dataset& train_data, const Dataset& val_data,
                                     const TrainConfig& config);

template <class T>
TrainResult<IoAutoencoderModel<T>> train(IoAutoencoderModel<T> model, const Dataset& train_data,
                                         const Dataset& val_data, const TrainConfig& config);

/// Free-run simulation NRMS (pixel units) used for model selection.
template <class T>
double validation_nrms(const SsEncoderModel<T>& model, const SeriesData<T>& val, const Dataset& val_raw,
                       double sigma_y = 0.204);
template <class T>
double validation_nrms(const IoAutoencoderModel<T>& model, const SeriesData<T>& val, const Dataset& val_raw,
                       double sigma_y = 0.204);

} // namespace ssenc
