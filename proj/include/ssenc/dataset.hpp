#pragma once

// Normalization statistics, normalized in-memory series, and section windows.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ssenc/nn.hpp"
#include "ssenc/simulator.hpp"

namespace ssenc {

using sim::Dataset;

enum class NormMode : std::uint8_t { Scalar, PerPixel };

inline constexpr double kStdFloor = 1e-8;

struct NormStats {
    NormMode mode = NormMode::Scalar;
    std::vector<double> u_mean, u_std;  // one entry per input channel
    std::vector<double> y_mean, y_std;  // one entry per pixel (all equal in Scalar mode)

    int n_u() const { return static_cast<int>(u_mean.size()); }
    int n_y() const { return static_cast<int>(y_mean.size()); }
    bool operator==(const NormStats&) const = default;
};

/// Means and standard deviations (population) of `data`. Standard deviations
/// below kStdFloor are floored; each floored channel produces one warning,
/// appended to `warnings` or printed to stderr when `warnings` is null.
NormStats compute_norm(const Dataset& data, NormMode mode = NormMode::Scalar,
                       std::vector<std::string>* warnings = nullptr);

/// Identity statistics (zero mean, unit std).
NormStats identity_norm(int n_u, int n_y);

/// Normalized copy of a dataset, one sample per column.
template <class T>
struct SeriesData {
    nn::Mat<T> u;  // n_u x n_samples
    nn::Mat<T> y;  // n_y x n_samples
    int n_X = 0;
    int n_Y = 0;

    std::size_t n_samples() const { return static_cast<std::size_t>(u.cols()); }
    int n_u() const { return static_cast<int>(u.rows()); }
    int n_y() const { return static_cast<int>(y.rows()); }
};

template <class T>
SeriesData<T> normalize(const Dataset& data, const NormStats& norm);

/// Pixel-unit frames (double) from normalized frames, one frame per column.
template <class T>
nn::Mat<double> denormalize_frames(const Eigen::Ref<const nn::Mat<T>>& frames, const NormStats& norm);

/// Normalized frames from pixel-unit frames.
nn::Mat<double> normalize_frames(const Eigen::Ref<const nn::Mat<double>>& frames, const NormStats& norm);

/// Raw frames of `data` as an n_y x n_samples matrix in pixel units.
nn::Mat<double> frames_matrix(const Dataset& data, std::size_t first = 0, std::size_t count = std::size_t(-1));

struct WindowShape {
    int n_a = 5;
    int n_b = 5;
    int T = 50;
    int k0 = 0;

    int history() const { return n_a > n_b ? n_a : n_b; }
};

/// Inclusive range of admissible section starts.
struct StartRange {
    std::size_t first = 0;
    std::size_t last = 0;

    std::size_t count() const { return last - first + 1; }
    bool contains(std::size_t t) const { return t >= first && t <= last; }
    std::vector<std::size_t> to_vector() const;
};

/// [max(n_a, n_b), n_samples - T - k0 - 1]. Throws ConfigError when the
/// dataset is too short to hold at least one section.
StartRange valid_start_indices(std::size_t n_samples, const WindowShape& shape);

/// Views into a SeriesData for a single section start t_i. Overlapping sections
/// alias the same memory.
template <class T>
struct SectionWindow {
    std::size_t t_i = 0;
    std::span<const T> history_y;  // y[t_i - n_a .. t_i - 1], oldest first
    std::span<const T> history_u;  // u[t_i - n_b .. t_i - 1], oldest first
    std::span<const T> future_u;   // u[t_i .. t_i + T + k0 - 1]
    std::span<const T> targets;    // y[t_i + k0 .. t_i + T + k0]
};

template <class T>
SectionWindow<T> slice_section(const SeriesData<T>& data, const WindowShape& shape, std::size_t t_i);

template <class T>
std::vector<SectionWindow<T>> slice_sections(const SeriesData<T>& data, const WindowShape& shape,
                                             std::span<const std::size_t> starts);

} // namespace ssenc
