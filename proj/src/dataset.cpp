#include "ssenc/dataset.hpp"

#include <cmath>
#include <iostream>

#include "ssenc/error.hpp"

namespace ssenc {

namespace {

void floor_std(std::vector<double>& stds, const char* what, std::vector<std::string>* warnings, bool once) {
    bool warned = false;
    for (std::size_t i = 0; i < stds.size(); ++i) {
        if (stds[i] >= kStdFloor) continue;
        stds[i] = kStdFloor;
        if (once && warned) continue;
        warned = true;
        std::string msg = std::string("constant ") + what + " channel " + std::to_string(i) +
                          ": standard deviation floored at 1e-8";
        if (warnings)
            warnings->push_back(std::move(msg));
        else
            std::cerr << "warning: " << msg << "\n";
    }
}

} // namespace

NormStats compute_norm(const Dataset& data, NormMode mode, std::vector<std::string>* warnings) {
    data.validate();
    if (data.n_samples == 0) throw ConfigError("compute_norm: empty dataset");
    const std::size_t n = data.n_samples;
    const int n_u = data.n_u;
    const int n_y = data.n_y();
    NormStats s;
    s.mode = mode;

    // Two-pass moments in double for stability.
    s.u_mean.assign(n_u, 0.0);
    s.u_std.assign(n_u, 0.0);
    for (std::size_t t = 0; t < n; ++t)
        for (int c = 0; c < n_u; ++c) s.u_mean[c] += data.u[t * n_u + c];
    for (auto& m : s.u_mean) m /= static_cast<double>(n);
    for (std::size_t t = 0; t < n; ++t)
        for (int c = 0; c < n_u; ++c) {
            const double d = data.u[t * n_u + c] - s.u_mean[c];
            s.u_std[c] += d * d;
        }
    for (auto& v : s.u_std) v = std::sqrt(v / static_cast<double>(n));
    floor_std(s.u_std, "input", warnings, false);

    if (mode == NormMode::Scalar) {
        double sum = 0.0;
        for (float v : data.y) sum += v;
        const double mean = sum / static_cast<double>(data.y.size());
        double ss = 0.0;
        for (float v : data.y) ss += (v - mean) * (v - mean);
        std::vector<double> sd{std::sqrt(ss / static_cast<double>(data.y.size()))};
        floor_std(sd, "output", warnings, false);
        s.y_mean.assign(n_y, mean);
        s.y_std.assign(n_y, sd[0]);
    } else {
        s.y_mean.assign(n_y, 0.0);
        s.y_std.assign(n_y, 0.0);
        for (std::size_t t = 0; t < n; ++t)
            for (int p = 0; p < n_y; ++p) s.y_mean[p] += data.y[t * n_y + p];
        for (auto& m : s.y_mean) m /= static_cast<double>(n);
        for (std::size_t t = 0; t < n; ++t)
            for (int p = 0; p < n_y; ++p) {
                const double d = data.y[t * n_y + p] - s.y_mean[p];
                s.y_std[p] += d * d;
            }
        for (auto& v : s.y_std) v = std::sqrt(v / static_cast<double>(n));
        floor_std(s.y_std, "pixel", warnings, true);
    }
    return s;
}

NormStats identity_norm(int n_u, int n_y) {
    NormStats s;
    s.u_mean.assign(n_u, 0.0);
    s.u_std.assign(n_u, 1.0);
    s.y_mean.assign(n_y, 0.0);
    s.y_std.assign(n_y, 1.0);
    return s;
}

template <class T>
SeriesData<T> normalize(const Dataset& data, const NormStats& norm) {
    data.validate();
    if (norm.n_u() != data.n_u || norm.n_y() != data.n_y())
        throw DimensionError("normalization statistics do not match dataset dimensions");
    const auto n = static_cast<Eigen::Index>(data.n_samples);
    SeriesData<T> out;
    out.n_X = data.n_X;
    out.n_Y = data.n_Y;
    out.u.resize(data.n_u, n);
    out.y.resize(data.n_y(), n);
    for (Eigen::Index t = 0; t < n; ++t) {
        for (int c = 0; c < data.n_u; ++c)
            out.u(c, t) = static_cast<T>((data.u[t * data.n_u + c] - norm.u_mean[c]) / norm.u_std[c]);
        const float* frame = data.y.data() + t * data.n_y();
        for (int p = 0; p < data.n_y(); ++p)
            out.y(p, t) = static_cast<T>((frame[p] - norm.y_mean[p]) / norm.y_std[p]);
    }
    return out;
}

template <class T>
nn::Mat<double> denormalize_frames(const Eigen::Ref<const nn::Mat<T>>& frames, const NormStats& norm) {
    if (frames.rows() != norm.n_y()) throw DimensionError("denormalize: frame width does not match statistics");
    const Eigen::Map<const Eigen::VectorXd> mean(norm.y_mean.data(), norm.n_y());
    const Eigen::Map<const Eigen::VectorXd> sd(norm.y_std.data(), norm.n_y());
    nn::Mat<double> out = frames.template cast<double>();
    out.array().colwise() *= sd.array();
    out.colwise() += mean;
    return out;
}

nn::Mat<double> normalize_frames(const Eigen::Ref<const nn::Mat<double>>& frames, const NormStats& norm) {
    if (frames.rows() != norm.n_y()) throw DimensionError("normalize: frame width does not match statistics");
    const Eigen::Map<const Eigen::VectorXd> mean(norm.y_mean.data(), norm.n_y());
    const Eigen::Map<const Eigen::VectorXd> sd(norm.y_std.data(), norm.n_y());
    nn::Mat<double> out = frames;
    out.colwise() -= mean;
    out.array().colwise() /= sd.array();
    return out;
}

nn::Mat<double> frames_matrix(const Dataset& data, std::size_t first, std::size_t count) {
    if (first > data.n_samples) throw IndexError("frames_matrix: first index past the end");
    count = std::min(count, data.n_samples - first);
    const Eigen::Map<const Eigen::MatrixXf> all(data.y.data() + first * data.n_y(), data.n_y(),
                                                static_cast<Eigen::Index>(count));
    return all.cast<double>();
}

std::vector<std::size_t> StartRange::to_vector() const {
    std::vector<std::size_t> v(count());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = first + i;
    return v;
}

StartRange valid_start_indices(std::size_t n_samples, const WindowShape& shape) {
    if (shape.n_a < 0 || shape.n_b < 0 || shape.T < 0 || shape.k0 < 0)
        throw ConfigError("window sizes must be non-negative");
    const std::size_t hist = static_cast<std::size_t>(shape.history());
    const std::size_t span = static_cast<std::size_t>(shape.T) + static_cast<std::size_t>(shape.k0);
    if (n_samples <= hist + span + 1)
        throw ConfigError("dataset of " + std::to_string(n_samples) + " samples is too short for history " +
                          std::to_string(hist) + " and section length T + k0 = " + std::to_string(span));
    return {hist, n_samples - span - 1};
}

template <class T>
SectionWindow<T> slice_section(const SeriesData<T>& data, const WindowShape& shape, std::size_t t_i) {
    const StartRange range = valid_start_indices(data.n_samples(), shape);
    if (!range.contains(t_i))
        throw IndexError("section start " + std::to_string(t_i) + " outside valid range [" +
                         std::to_string(range.first) + ", " + std::to_string(range.last) + "]");
    const std::size_t ny = static_cast<std::size_t>(data.n_y());
    const std::size_t nu = static_cast<std::size_t>(data.n_u());
    const T* y = data.y.data();
    const T* u = data.u.data();
    SectionWindow<T> w;
    w.t_i = t_i;
    w.history_y = {y + (t_i - shape.n_a) * ny, shape.n_a * ny};
    w.history_u = {u + (t_i - shape.n_b) * nu, shape.n_b * nu};
    w.future_u = {u + t_i * nu, static_cast<std::size_t>(shape.T + shape.k0) * nu};
    w.targets = {y + (t_i + shape.k0) * ny, static_cast<std::size_t>(shape.T + 1) * ny};
    return w;
}

template <class T>
std::vector<SectionWindow<T>> slice_sections(const SeriesData<T>& data, const WindowShape& shape,
                                             std::span<const std::size_t> starts) {
    std::vector<SectionWindow<T>> out;
    out.reserve(starts.size());
    for (std::size_t t : starts) out.push_back(slice_section(data, shape, t));
    return out;
}

template SeriesData<float> normalize<float>(const Dataset&, const NormStats&);
template SeriesData<double> normalize<double>(const Dataset&, const NormStats&);
template nn::Mat<double> denormalize_frames<float>(const Eigen::Ref<const nn::Mat<float>>&, const NormStats&);
template nn::Mat<double> denormalize_frames<double>(const Eigen::Ref<const nn::Mat<double>>&, const NormStats&);
template SectionWindow<float> slice_section<float>(const SeriesData<float>&, const WindowShape&, std::size_t);
template SectionWindow<double> slice_section<double>(const SeriesData<double>&, const WindowShape&, std::size_t);
template std::vector<SectionWindow<float>> slice_sections<float>(const SeriesData<float>&, const WindowShape&,
                                                                 std::span<const std::size_t>);
template std::vector<SectionWindow<double>> slice_sections<double>(const SeriesData<double>&, const WindowShape&,
                                                                   std::span<const std::size_t>);

} // namespace ssenc
