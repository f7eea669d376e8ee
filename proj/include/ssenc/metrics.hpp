#pragma once

// Evaluation quantities: simulation NRMS, per-frame RMS, n-step-ahead NRMS,
// CSV emitters and PGM frame strips.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ssenc/baseline.hpp"
#include "ssenc/dataset.hpp"
#include "ssenc/error.hpp"
#include "ssenc/model.hpp"

namespace ssenc {

inline constexpr double kSigmaY = 0.204;

using FrameMatrix = Eigen::MatrixXd;  // n_y x n_frames, pixel units

/// RMS over all pixels and frames of (predictions - targets), divided by sigma_y.
double nrms(const Eigen::Ref<const FrameMatrix>& predictions, const Eigen::Ref<const FrameMatrix>& targets,
            double sigma_y = kSigmaY);

/// ||y_t - y^_t||_2 / sqrt(n_y) for every frame t.
Eigen::VectorXd per_frame_rms(const Eigen::Ref<const FrameMatrix>& predictions,
                              const Eigen::Ref<const FrameMatrix>& targets);

inline std::size_t history_length(const SsEncoderHyper& hp) {
    return static_cast<std::size_t>(std::max(hp.n_a, hp.n_b));
}
inline std::size_t history_length(const IoAutoencoderHyper& hp) { return static_cast<std::size_t>(hp.n); }

template <class T>
FrameMatrix simulate_model(const SsEncoderModel<T>& model, const Dataset& data) {
    return simulate(model, data, history_length(model.hyper));
}
template <class T>
FrameMatrix simulate_model(const IoAutoencoderModel<T>& model, const Dataset& data) {
    return baseline_simulate(model, data, history_length(model.hyper));
}

namespace detail {

template <class T, class Model>
std::vector<double> nstep_nrms_impl(const Model& model, const Dataset& data, int n_max, double sigma_y) {
    if (n_max < 1) throw ConfigError("nstep_nrms: n_max must be at least 1");
    const std::size_t hist = history_length(model.hyper);
    const std::size_t n = data.n_samples;
    if (n < hist + static_cast<std::size_t>(n_max) + 1)
        throw ConfigError("nstep_nrms: dataset of " + std::to_string(n) + " samples is too short for n_max = " +
                          std::to_string(n_max));
    const SeriesData<T> series = normalize<T>(data, model.norm);
    std::vector<std::size_t> starts;
    for (std::size_t t = hist; t + 1 < n; ++t) starts.push_back(t);
    std::vector<double> sq(static_cast<std::size_t>(n_max), 0.0);
    std::vector<std::size_t> count(static_cast<std::size_t>(n_max), 0);
    const FrameMatrix frames = frames_matrix(data);
    rollout_from_starts<T>(model, series, starts, n_max, [&](int k, const nn::Mat<T>& p) {
        if (k == 0) return;
        const FrameMatrix pix = denormalize_frames<T>(p, model.norm);
        double s = 0.0;
        for (Eigen::Index j = 0; j < pix.cols(); ++j)
            s += (pix.col(j) - frames.col(static_cast<Eigen::Index>(starts[j]) + k)).squaredNorm();
        sq[k - 1] = s;
        count[k - 1] = static_cast<std::size_t>(pix.cols());
    });
    std::vector<double> out(sq.size());
    for (std::size_t i = 0; i < sq.size(); ++i)
        out[i] = std::sqrt(sq[i] / (static_cast<double>(count[i]) * data.n_y())) / sigma_y;
    return out;
}

} // namespace detail

/// NRMS_n for n = 1 .. n_max (element n - 1). The state is estimated from
/// measured history ending at t_i - 1 and the prediction of y[t_i + n] is
/// compared over every pixel and every start max_history <= t_i <= N - n - 1.
template <class T>
std::vector<double> nstep_nrms(const SsEncoderModel<T>& model, const Dataset& data, int n_max = 50,
                               double sigma_y = kSigmaY) {
    return detail::nstep_nrms_impl<T>(model, data, n_max, sigma_y);
}
template <class T>
std::vector<double> nstep_nrms(const IoAutoencoderModel<T>& model, const Dataset& data, int n_max = 50,
                               double sigma_y = kSigmaY) {
    return detail::nstep_nrms_impl<T>(model, data, n_max, sigma_y);
}

struct EvalReport {
    std::size_t t_start = 0;
    double sim_nrms = 0.0;
    Eigen::VectorXd per_frame_rms;  // frame t_start + i at index i
    std::vector<double> nstep_nrms;  // n = 1 .. n_max
    FrameMatrix simulated;           // pixel units, frames t_start ..
};

template <class Model>
EvalReport evaluate(const Model& model, const Dataset& data, int n_max = 50, double sigma_y = kSigmaY) {
    EvalReport r;
    r.t_start = history_length(model.hyper);
    r.simulated = simulate_model(model, data);
    const FrameMatrix targets = frames_matrix(data, r.t_start);
    r.sim_nrms = nrms(r.simulated, targets, sigma_y);
    r.per_frame_rms = per_frame_rms(r.simulated, targets);
    if (n_max > 0) r.nstep_nrms = nstep_nrms(model, data, n_max, sigma_y);
    return r;
}

/// Indices i where series[i] > factor * median(series), excluding neighbours
/// that belong to the same excursion (only the local maximum is kept).
std::vector<std::size_t> find_spikes(const Eigen::Ref<const Eigen::VectorXd>& series, double factor);

double median(std::vector<double> values);

// CSV emitters.
void write_eval_csv(const std::filesystem::path& path, const EvalReport& report);
void write_per_frame_csv(const std::filesystem::path& path, const EvalReport& report);
void write_nstep_csv(const std::filesystem::path& path, std::span<const double> nstep);

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major
};

/// Intensity to byte: round(clamp(v, 0, 1) * 255), halves rounded away from zero.
std::uint8_t to_gray_byte(double v);

/// Two rows of frames: measured on top, simulated below, one column of frames
/// per entry of `columns` (column indices into both matrices). Each pixel is
/// repeated `scale` times in both directions.
GrayImage make_strip(const Eigen::Ref<const FrameMatrix>& measured, const Eigen::Ref<const FrameMatrix>& simulated,
                     int n_X, int n_Y, std::span<const std::size_t> columns, int scale = 1);

void write_pgm(const GrayImage& image, const std::filesystem::path& path);
GrayImage read_pgm(const std::filesystem::path& path);

void render_strip(const Eigen::Ref<const FrameMatrix>& measured, const Eigen::Ref<const FrameMatrix>& simulated,
                  int n_X, int n_Y, std::span<const std::size_t> columns, const std::filesystem::path& path,
                  int scale = 1);

} // namespace ssenc
