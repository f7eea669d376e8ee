#include "ssenc/trainer.hpp"

#include <array>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "ssenc/error.hpp"
#include "ssenc/metrics.hpp"

namespace ssenc {

using nn::Vec;

void TrainLog::write_csv(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    os << std::setprecision(17);
    os << "epoch,loss,val_nrms,seconds,best\n";
    for (const auto& r : epochs)
        os << r.epoch << "," << r.loss << "," << r.val_nrms << "," << r.seconds << "," << (r.best ? 1 : 0) << "\n";
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (max_epochs < 0) throw ConfigError("max_epochs must be non-negative");
    if (!(sigma_y > 0.0)) throw ConfigError("sigma_y must be positive");
}

std::vector<std::vector<std::size_t>> make_epoch_batches(std::span<const std::size_t> valid_starts, int batch_size,
                                                         Rng& rng) {
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    std::vector<std::size_t> order(valid_starts.begin(), valid_starts.end());
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    std::vector<std::vector<std::size_t>> batches;
    const auto bs = static_cast<std::size_t>(batch_size);
    for (std::size_t i = 0; i < order.size(); i += bs)
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                             order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + bs)));
    return batches;
}

template <class T>
double validation_nrms(const SsEncoderModel<T>& model, const SeriesData<T>& val, const Dataset& val_raw,
                       double sigma_y) {
    const std::size_t t0 = history_length(model.hyper);
    const FrameMatrix sim = denormalize_frames<T>(simulate_normalized(model, val, t0), model.norm);
    return nrms(sim, frames_matrix(val_raw, t0), sigma_y);
}

template <class T>
double validation_nrms(const IoAutoencoderModel<T>& model, const SeriesData<T>& val, const Dataset& val_raw,
                       double sigma_y) {
    const std::size_t t0 = history_length(model.hyper);
    const FrameMatrix sim = denormalize_frames<T>(baseline_simulate_normalized(model, val, t0), model.norm);
    return nrms(sim, frames_matrix(val_raw, t0), sigma_y);
}

namespace {

// Per-method hooks used by the shared training loop.
template <class T>
struct ProposedHooks {
    using Model = SsEncoderModel<T>;
    static constexpr const char* name = "proposed";

    static StartRange starts(const Model& m, std::size_t n) { return valid_start_indices(n, m.hyper.window()); }

    static std::array<Vec<T>*, 3> params(Model& m) {
        return {&m.e_net.params().values, &m.f_net.params().values, &m.h_net.params().values};
    }

    static std::pair<double, std::array<Vec<T>, 3>> loss_grad(const Model& m, const SeriesData<T>& data,
                                                              std::span<const std::size_t> batch, int /*epoch*/,
                                                              const TrainConfig& /*cfg*/,
                                                              std::array<bool, 3>& frozen) {
        frozen = {false, false, false};
        const auto ws = slice_sections(data, m.hyper.window(), batch);
        auto lg = section_loss_grad<T>(m, ws);
        return {lg.loss, {std::move(lg.grad.e), std::move(lg.grad.f), std::move(lg.grad.h)}};
    }
};

template <class T>
struct BaselineHooks {
    using Model = IoAutoencoderModel<T>;
    static constexpr const char* name = "baseline";

    static StartRange starts(const Model& m, std::size_t n) { return baseline_valid_targets(n, m.hyper.n); }

    static std::array<Vec<T>*, 3> params(Model& m) {
        return {&m.enc_net.params().values, &m.dec_net.params().values, &m.narx_net.params().values};
    }

    static std::pair<double, std::array<Vec<T>, 3>> loss_grad(const Model& m, const SeriesData<T>& data,
                                                              std::span<const std::size_t> batch, int epoch,
                                                              const TrainConfig& cfg, std::array<bool, 3>& frozen) {
        BaselineWeights w = cfg.baseline_weights;
        frozen = {false, false, false};
        if (cfg.baseline_schedule == BaselineSchedule::Sequential) {
            // First half of the budget fits the autoencoder, second half the NARX map.
            const int switch_epoch = (cfg.max_epochs + 1) / 2;
            if (epoch <= switch_epoch) {
                w.prediction = 0.0;
                frozen = {false, false, true};
            } else {
                w.reconstruction = 0.0;
                frozen = {true, true, false};
            }
        }
        const auto ws = slice_baseline_windows(data, m.hyper.n, batch);
        auto lg = baseline_loss_grad<T>(m, ws, w);
        return {lg.loss, {std::move(lg.grad.enc), std::move(lg.grad.dec), std::move(lg.grad.narx)}};
    }
};

template <class T, class Hooks>
TrainResult<typename Hooks::Model> train_impl(typename Hooks::Model model, const Dataset& train_raw,
                                              const Dataset& val_raw, const TrainConfig& cfg) {
    using Model = typename Hooks::Model;
    using Clock = std::chrono::steady_clock;
    cfg.validate();

    const SeriesData<T> train_data = normalize<T>(train_raw, model.norm);
    const SeriesData<T> val_data = normalize<T>(val_raw, model.norm);
    const std::vector<std::size_t> starts = Hooks::starts(model, train_data.n_samples()).to_vector();

    TrainResult<Model> result{model, {}, std::numeric_limits<double>::infinity(), 0};
    if (cfg.max_epochs == 0) return result;

    std::array<nn::AdamState<T>, 3> adam;
    {
        auto p = Hooks::params(model);
        for (std::size_t i = 0; i < 3; ++i) adam[i] = nn::AdamState<T>(p[i]->size(), cfg.learning_rate);
    }
    Rng rng(substream_seed(cfg.seed, 0xBA7C4));

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = Clock::now();
        EpochRecord rec;
        rec.epoch = epoch;
        double weighted = 0.0;
        std::size_t counted = 0;
        for (const auto& batch : make_epoch_batches(starts, cfg.batch_size, rng)) {
            std::array<bool, 3> frozen{};
            try {
                auto [loss, grads] = Hooks::loss_grad(model, train_data, batch, epoch, cfg, frozen);
                for (const auto& g : grads)
                    if (!g.allFinite()) throw DivergenceError("non-finite gradient");
                weighted += loss * static_cast<double>(batch.size());
                counted += batch.size();
                if (cfg.dry_run) continue;
                auto p = Hooks::params(model);
                for (std::size_t i = 0; i < 3; ++i)
                    if (!frozen[i]) nn::adam_step<T>(*p[i], grads[i], adam[i]);
            } catch (const DivergenceError& e) {
                if (cfg.strict) throw;
                ++rec.skipped_batches;
                std::cerr << "warning: epoch " << epoch << ": skipped divergent batch (" << e.what() << ")\n";
            }
        }
        rec.loss = counted > 0 ? weighted / static_cast<double>(counted) : std::numeric_limits<double>::quiet_NaN();
        try {
            rec.val_nrms = validation_nrms(model, val_data, val_raw, cfg.sigma_y);
        } catch (const DivergenceError& e) {
            if (cfg.strict) throw;
            rec.val_nrms = std::numeric_limits<double>::infinity();
            std::cerr << "warning: epoch " << epoch << ": validation simulation diverged (" << e.what() << ")\n";
        }
        if (std::isfinite(rec.val_nrms) && rec.val_nrms < result.best_val_nrms) {
            rec.best = true;
            result.best_val_nrms = rec.val_nrms;
            result.best_epoch = epoch;
            result.model = model;
            if (!cfg.checkpoint_path.empty()) save_checkpoint(model, cfg.checkpoint_path, {epoch, rec.val_nrms});
        }
        rec.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        result.log.epochs.push_back(rec);
        if (!cfg.log_path.empty()) result.log.write_csv(cfg.log_path);
        if (cfg.verbose)
            std::cerr << Hooks::name << " epoch " << epoch << "/" << cfg.max_epochs << "  loss " << rec.loss
                      << "  val_nrms " << rec.val_nrms << (rec.best ? " *" : "") << "  " << std::fixed
                      << std::setprecision(1) << rec.seconds << "s" << std::defaultfloat << std::setprecision(6)
                      << "\n";
        if (cfg.on_epoch) cfg.on_epoch(rec);
    }
    return result;
}

} // namespace

template <class T>
TrainResult<SsEncoderModel<T>> train(SsEncoderModel<T> model, const Dataset& train_data, const Dataset& val_data,
                                     const TrainConfig& config) {
    return train_impl<T, ProposedHooks<T>>(std::move(model), train_data, val_data, config);
}

template <class T>
TrainResult<IoAutoencoderModel<T>> train(IoAutoencoderModel<T> model, const Dataset& train_data,
                                         const Dataset& val_data, const TrainConfig& config) {
    return train_impl<T, BaselineHooks<T>>(std::move(model), train_data, val_data, config);
}

#define SSENC_INSTANTIATE_TRAINER(T)                                                                             \
    template TrainResult<SsEncoderModel<T>> train<T>(SsEncoderModel<T>, const Dataset&, const Dataset&,         \
                                                     const TrainConfig&);                                        \
    template TrainResult<IoAutoencoderModel<T>> train<T>(IoAutoencoderModel<T>, const Dataset&, const Dataset&, \
                                                         const TrainConfig&);                                    \
    template double validation_nrms<T>(const SsEncoderModel<T>&, const SeriesData<T>&, const Dataset&, double); \
    template double validation_nrms<T>(const IoAutoencoderModel<T>&, const SeriesData<T>&, const Dataset&,      \
                                       double);

SSENC_INSTANTIATE_TRAINER(float)
SSENC_INSTANTIATE_TRAINER(double)

} // namespace ssenc
