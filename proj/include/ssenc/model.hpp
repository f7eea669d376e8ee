#pragma once

// State-space encoder model:
//   x_{t_i}     = e(y[t_i-n_a .. t_i-1], u[t_i-n_b .. t_i-1])
//   x_{k+1}     = f(x_k, u_{t_i+k})
//   y^_{t_i+k}  = h(x_k)
// trained on the multiple-shooting section loss
//   V = 1/(2 N (T+1)) sum_i sum_{k=k0}^{T+k0} ||y^_{t_i+k} - y_{t_i+k}||^2.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "ssenc/dataset.hpp"
#include "ssenc/nn.hpp"

namespace ssenc {

struct SsEncoderHyper {
    int n_x = 6;
    int n_a = 5;
    int n_b = 5;
    int T = 50;
    int k0 = 0;
    int n_u = 2;
    int n_y = 625;
    std::vector<int> hidden{64, 64};
    nn::InitScheme init = nn::InitScheme::RootFanIn;

    WindowShape window() const { return {n_a, n_b, T, k0}; }
    int encoder_inputs() const { return n_a * n_y + n_b * n_u; }
    void validate() const;
    bool operator==(const SsEncoderHyper&) const = default;
};

template <class T>
struct SsEncoderModel {
    SsEncoderHyper hyper;
    NormStats norm;
    nn::Mlp<T> e_net;  // n_a*n_y + n_b*n_u -> n_x
    nn::Mlp<T> f_net;  // n_x + n_u -> n_x
    nn::Mlp<T> h_net;  // n_x -> n_y

    SsEncoderModel() = default;
    /// All parameters zero; call init() for the random initialization.
    SsEncoderModel(const SsEncoderHyper& hyper, NormStats norm);

    void init(std::uint64_t seed);

    template <class U>
    SsEncoderModel<U> cast() const {
        SsEncoderModel<U> out(hyper, norm);
        out.e_net = e_net.template cast<U>();
        out.f_net = f_net.template cast<U>();
        out.h_net = h_net.template cast<U>();
        return out;
    }
};

/// Gradient of a scalar with respect to every parameter, one flat vector per network.
template <class T>
struct ModelGrad {
    nn::Vec<T> e, f, h;
};

template <class T>
struct LossGrad {
    double loss = 0.0;
    ModelGrad<T> grad;
};

/// x = e(concat(history_y, history_u)); both histories oldest-first and normalized.
template <class T>
nn::Vec<T> encode_state(const SsEncoderModel<T>& model, std::span<const T> history_y, std::span<const T> history_u);

/// Predicted normalized frames y^_{t_i -> t_i + k}, k = k0 .. T + k0, one per column.
template <class T>
nn::Mat<T> rollout_section(const SsEncoderModel<T>& model, const SectionWindow<T>& window);

template <class T>
double section_loss(const SsEncoderModel<T>& model, std::span<const SectionWindow<T>> windows);

/// Section loss and its exact gradient by backpropagation through the rollout.
/// Per-window contributions are reduced in window order.
template <class T>
LossGrad<T> section_loss_grad(const SsEncoderModel<T>& model, std::span<const SectionWindow<T>> windows);

/// Free-run simulation on normalized data: one encoder call at t_start from
/// measured history, then f/h recursion with measured inputs to the end.
/// Returns normalized frames for t = t_start .. n_samples - 1.
template <class T>
nn::Mat<T> simulate_normalized(const SsEncoderModel<T>& model, const SeriesData<T>& data, std::size_t t_start);

/// As simulate_normalized on a raw dataset; output in pixel units.
template <class T>
nn::Mat<double> simulate(const SsEncoderModel<T>& model, const Dataset& data, std::size_t t_start);

/// Encoder applied at every start in `starts` (ascending), then open-loop
/// rollout. `visit(k, preds)` receives normalized predictions of y[t_i + k]
/// for k = 0 .. horizon; column j belongs to starts[j], and only the prefix of
/// starts with t_i + k < n_samples is present.
template <class T>
void rollout_from_starts(const SsEncoderModel<T>& model, const SeriesData<T>& data,
                         std::span<const std::size_t> starts, int horizon,
                         const std::function<void(int, const nn::Mat<T>&)>& visit);

struct CheckpointMeta {
    long epoch = -1;
    double val_nrms = std::numeric_limits<double>::quiet_NaN();
};

struct CheckpointInfo {
    std::string magic;     // "SSCK" or "IOCK"
    int scalar_bytes = 4;  // 4 (f32) or 8 (f64)
};

CheckpointInfo peek_checkpoint(const std::filesystem::path& path);

template <class T>
void save_checkpoint(const SsEncoderModel<T>& model, const std::filesystem::path& path,
                     const CheckpointMeta& meta = {});

template <class T>
SsEncoderModel<T> load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);

extern template struct SsEncoderModel<float>;
extern template struct SsEncoderModel<double>;

} // namespace ssenc
