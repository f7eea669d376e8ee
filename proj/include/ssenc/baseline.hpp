#pragma once

// IO-autoencoder baseline: a frame autoencoder (enc: n_y -> n_z, dec: n_z -> n_y)
// with a NARX predictor in latent space,
//   z_t = narx(z_{t-n} .. z_{t-1}, u_{t-n} .. u_{t-1}),   y^_t = dec(z_t).

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "ssenc/dataset.hpp"
#include "ssenc/model.hpp"
#include "ssenc/nn.hpp"

namespace ssenc {

struct IoAutoencoderHyper {
    int n_z = 6;
    int n = 5;
    int n_u = 2;
    int n_y = 625;
    std::vector<int> hidden{64, 64};
    nn::InitScheme init = nn::InitScheme::RootFanIn;

    int narx_inputs() const { return n * n_z + n * n_u; }
    void validate() const;
    bool operator==(const IoAutoencoderHyper&) const = default;
};

template <class T>
struct IoAutoencoderModel {
    IoAutoencoderHyper hyper;
    NormStats norm;
    nn::Mlp<T> enc_net;   // n_y -> n_z
    nn::Mlp<T> dec_net;   // n_z -> n_y
    nn::Mlp<T> narx_net;  // n*n_z + n*n_u -> n_z

    IoAutoencoderModel() = default;
    IoAutoencoderModel(const IoAutoencoderHyper& hyper, NormStats norm);

    void init(std::uint64_t seed);
};

template <class T>
struct BaselineGrad {
    nn::Vec<T> enc, dec, narx;
};

template <class T>
struct BaselineLossGrad {
    double loss = 0.0;
    BaselineGrad<T> grad;
};

/// Relative weights of the reconstruction and one-step prediction terms.
struct BaselineWeights {
    double reconstruction = 1.0;
    double prediction = 1.0;
};

/// Target index t with the n frames and inputs preceding it. `frames` covers
/// y[t - n .. t] (history then target), `history_u` covers u[t - n .. t - 1].
template <class T>
struct BaselineWindow {
    std::size_t t = 0;
    std::span<const T> frames;
    std::span<const T> history_u;
};

/// [n, n_samples - 1].
StartRange baseline_valid_targets(std::size_t n_samples, int n);

template <class T>
BaselineWindow<T> slice_baseline_window(const SeriesData<T>& data, int n, std::size_t t);

template <class T>
std::vector<BaselineWindow<T>> slice_baseline_windows(const SeriesData<T>& data, int n,
                                                      std::span<const std::size_t> targets);

/// (latent, reconstruction) of one normalized frame.
template <class T>
std::pair<nn::Vec<T>, nn::Vec<T>> autoencode(const IoAutoencoderModel<T>& model, std::span<const T> frame);

/// Next latent from n latents and n inputs, both oldest-first.
template <class T>
nn::Vec<T> narx_predict(const IoAutoencoderModel<T>& model, std::span<const T> z_history,
                        std::span<const T> u_history);

/// V = 1/(2B) sum_b [ w_r/(n+1) sum_{j} ||dec(enc(y_j)) - y_j||^2
///                    + w_p ||dec(narx(enc(y_{t-n..t-1}), u_{t-n..t-1})) - y_t||^2 ]
template <class T>
double baseline_loss(const IoAutoencoderModel<T>& model, std::span<const BaselineWindow<T>> windows,
                     const BaselineWeights& weights = {});

template <class T>
BaselineLossGrad<T> baseline_loss_grad(const IoAutoencoderModel<T>& model,
                                       std::span<const BaselineWindow<T>> windows,
                                       const BaselineWeights& weights = {});

/// Latent history seeded from measured frames y[t_i - n .. t_i - 1], then
/// predicted latents are fed back. visit(k, preds) receives normalized
/// predictions of y[t_i + k] (k + 1 NARX calls) for the prefix of `starts`
/// whose target exists.
template <class T>
void rollout_from_starts(const IoAutoencoderModel<T>& model, const SeriesData<T>& data,
                         std::span<const std::size_t> starts, int horizon,
                         const std::function<void(int, const nn::Mat<T>&)>& visit);

/// Free-run simulation on normalized data for t = t_start .. n_samples - 1.
template <class T>
nn::Mat<T> baseline_simulate_normalized(const IoAutoencoderModel<T>& model, const SeriesData<T>& data,
                                        std::size_t t_start);

/// As baseline_simulate_normalized on a raw dataset; output in pixel units.
template <class T>
nn::Mat<double> baseline_simulate(const IoAutoencoderModel<T>& model, const Dataset& data, std::size_t t_start);

struct NStepPredictions {
    std::vector<std::size_t> targets;  // index of the predicted sample for each column
    nn::Mat<double> frames;            // pixel units, one column per start
};

/// Prediction of y[t_i + n_steps - 1] from measured history ending at t_i - 1,
/// for every start t_i in [n, n_samples - n_steps].
template <class T>
NStepPredictions baseline_nstep(const IoAutoencoderModel<T>& model, const Dataset& data, int n_steps);

template <class T>
void save_checkpoint(const IoAutoencoderModel<T>& model, const std::filesystem::path& path,
                     const CheckpointMeta& meta = {});

template <class T>
IoAutoencoderModel<T> load_baseline_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);

extern template struct IoAutoencoderModel<float>;
extern template struct IoAutoencoderModel<double>;

} // namespace ssenc
