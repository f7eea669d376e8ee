#include "ssenc/metrics.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace ssenc {

namespace {

void check_same_shape(const Eigen::Ref<const FrameMatrix>& a, const Eigen::Ref<const FrameMatrix>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        std::ostringstream msg;
        msg << "shape mismatch: " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x" << b.cols();
        throw DimensionError(msg.str());
    }
}

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    return os;
}

} // namespace

double nrms(const Eigen::Ref<const FrameMatrix>& predictions, const Eigen::Ref<const FrameMatrix>& targets,
            double sigma_y) {
    check_same_shape(predictions, targets);
    if (predictions.size() == 0) throw DimensionError("nrms of an empty set");
    const double mse = (predictions - targets).squaredNorm() / static_cast<double>(predictions.size());
    return std::sqrt(mse) / sigma_y;
}

Eigen::VectorXd per_frame_rms(const Eigen::Ref<const FrameMatrix>& predictions,
                              const Eigen::Ref<const FrameMatrix>& targets) {
    check_same_shape(predictions, targets);
    return (predictions - targets).colwise().norm().transpose() / std::sqrt(static_cast<double>(predictions.rows()));
}

double median(std::vector<double> values) {
    if (values.empty()) throw DimensionError("median of an empty set");
    const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
    std::nth_element(values.begin(), mid, values.end());
    if (values.size() % 2 == 1) return *mid;
    const double upper = *mid;
    const double lower = *std::max_element(values.begin(), mid);
    return 0.5 * (lower + upper);
}

std::vector<std::size_t> find_spikes(const Eigen::Ref<const Eigen::VectorXd>& series, double factor) {
    std::vector<std::size_t> spikes;
    if (series.size() == 0) return spikes;
    const double threshold = factor * median(std::vector<double>(series.data(), series.data() + series.size()));
    const auto n = static_cast<std::size_t>(series.size());
    std::size_t i = 0;
    while (i < n) {
        if (!(series[i] > threshold)) {
            ++i;
            continue;
        }
        std::size_t best = i;
        while (i < n && series[i] > threshold) {
            if (series[i] > series[best]) best = i;
            ++i;
        }
        spikes.push_back(best);
    }
    return spikes;
}

void write_eval_csv(const std::filesystem::path& path, const EvalReport& report) {
    auto os = open_csv(path);
    os << "metric,value\n";
    os << "sim_nrms," << report.sim_nrms << "\n";
    os << "t_start," << report.t_start << "\n";
    os << "frames," << report.per_frame_rms.size() << "\n";
    if (!report.nstep_nrms.empty()) {
        os << "nstep_nrms_1," << report.nstep_nrms.front() << "\n";
        os << "nstep_nrms_" << report.nstep_nrms.size() << "," << report.nstep_nrms.back() << "\n";
    }
}

void write_per_frame_csv(const std::filesystem::path& path, const EvalReport& report) {
    auto os = open_csv(path);
    os << "t,rms\n";
    for (Eigen::Index i = 0; i < report.per_frame_rms.size(); ++i)
        os << report.t_start + static_cast<std::size_t>(i) << "," << report.per_frame_rms[i] << "\n";
}

void write_nstep_csv(const std::filesystem::path& path, std::span<const double> nstep) {
    auto os = open_csv(path);
    os << "n,nrms\n";
    for (std::size_t i = 0; i < nstep.size(); ++i) os << i + 1 << "," << nstep[i] << "\n";
}

std::uint8_t to_gray_byte(double v) {
    if (!(v > 0.0)) return 0;  // also maps NaN to black
    if (v >= 1.0) return 255;
    return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

GrayImage make_strip(const Eigen::Ref<const FrameMatrix>& measured, const Eigen::Ref<const FrameMatrix>& simulated,
                     int n_X, int n_Y, std::span<const std::size_t> columns, int scale) {
    check_same_shape(measured, simulated);
    if (measured.rows() != static_cast<Eigen::Index>(n_X) * n_Y)
        throw DimensionError("frame width does not match n_X * n_Y");
    if (scale < 1) throw ConfigError("strip scale must be at least 1");
    if (columns.empty()) throw ConfigError("strip needs at least one frame");
    for (std::size_t c : columns)
        if (c >= static_cast<std::size_t>(measured.cols()))
            throw IndexError("strip frame index " + std::to_string(c) + " out of range");

    GrayImage img;
    img.width = static_cast<int>(columns.size()) * n_X * scale;
    img.height = 2 * n_Y * scale;
    img.pixels.assign(static_cast<std::size_t>(img.width) * img.height, 0);
    for (int row = 0; row < 2; ++row) {
        const auto& src = row == 0 ? measured : simulated;
        for (std::size_t f = 0; f < columns.size(); ++f) {
            const auto col = static_cast<Eigen::Index>(columns[f]);
            for (int iy = 0; iy < n_Y; ++iy)
                for (int ix = 0; ix < n_X; ++ix) {
                    const std::uint8_t v = to_gray_byte(src(iy * n_X + ix, col));
                    for (int sy = 0; sy < scale; ++sy)
                        for (int sx = 0; sx < scale; ++sx) {
                            const std::size_t y = static_cast<std::size_t>((row * n_Y + iy) * scale + sy);
                            const std::size_t x = static_cast<std::size_t>((static_cast<int>(f) * n_X + ix) * scale + sx);
                            img.pixels[y * img.width + x] = v;
                        }
                }
        }
    }
    return img;
}

void write_pgm(const GrayImage& image, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    os << "P5\n" << image.width << " " << image.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
    if (!os) throw Error("write failed: " + path.string());
}

GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path.string());
    std::string magic;
    is >> magic;
    if (magic != "P5") throw FormatError(path.string() + ": not a binary PGM (P5)");
    auto next_int = [&]() {
        is >> std::ws;
        while (is.peek() == '#') {
            std::string comment;
            std::getline(is, comment);
            is >> std::ws;
        }
        int v = -1;
        is >> v;
        if (!is) throw FormatError(path.string() + ": malformed PGM header");
        return v;
    };
    GrayImage img;
    img.width = next_int();
    img.height = next_int();
    const int maxval = next_int();
    if (img.width < 1 || img.height < 1 || maxval != 255) throw FormatError(path.string() + ": unsupported PGM");
    is.get();  // single whitespace before the raster
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
    is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (!is) throw FormatError(path.string() + ": truncated PGM raster");
    return img;
}

void render_strip(const Eigen::Ref<const FrameMatrix>& measured, const Eigen::Ref<const FrameMatrix>& simulated,
                  int n_X, int n_Y, std::span<const std::size_t> columns, const std::filesystem::path& path,
                  int scale) {
    write_pgm(make_strip(measured, simulated, n_X, n_Y, columns, scale), path);
}

} // namespace ssenc
