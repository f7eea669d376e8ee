#include "ssenc/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ssenc/binio.hpp"
#include "ssenc/error.hpp"

namespace ssenc::sim {

void BallParams::validate() const {
    if (!(beta >= 0.0) || !(gamma > 0.0) || !(k_force > 0.0) || !(radius > 0.0) || !(dt > 0.0))
        throw ConfigError("ball parameters must be positive (beta may be zero)");
}

double grid_coord(int i, int n, GridConvention grid) {
    if (grid == GridConvention::CellCenters) return (i + 0.5) / n;
    return n > 1 ? static_cast<double>(i) / (n - 1) : 0.5;
}

namespace {

double wall_force(double p, double beta) {
    const double q = 1.0 - p;
    return beta * (1.0 / (p * p) - 1.0 / (q * q));
}

void check_inside(const BallState& s, long step) {
    if (!(s.px > 0.0 && s.px < 1.0 && s.py > 0.0 && s.py < 1.0)) {
        std::ostringstream msg;
        msg << "ball left the open unit box at (" << s.px << ", " << s.py << ")";
        if (step >= 0) msg << " at step " << step;
        throw SingularityError(msg.str(), step);
    }
}

BallState add_scaled(const BallState& s, const std::array<double, 4>& d, double h) {
    return {s.px + h * d[0], s.py + h * d[1], s.vx + h * d[2], s.vy + h * d[3]};
}

} // namespace

std::array<double, 4> dynamics_rhs(const BallState& s, const Input& u, const BallParams& p) {
    check_inside(s, -1);
    const double ax = wall_force(s.px, p.beta) - p.gamma * s.vx + p.k_force * u[0];
    const double ay = wall_force(s.py, p.beta) - p.gamma * s.vy + p.k_force * u[1];
    return {s.vx, s.vy, ax, ay};
}

BallState rk4_step(const BallState& s, const Input& u, const BallParams& p, long step) {
    try {
        const double h = p.dt;
        const auto k1 = dynamics_rhs(s, u, p);
        const auto k2 = dynamics_rhs(add_scaled(s, k1, h / 2), u, p);
        const auto k3 = dynamics_rhs(add_scaled(s, k2, h / 2), u, p);
        const auto k4 = dynamics_rhs(add_scaled(s, k3, h), u, p);
        BallState out = s;
        out.px += h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
        out.py += h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
        out.vx += h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]);
        out.vy += h / 6 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3]);
        check_inside(out, step);
        return out;
    } catch (const SingularityError& e) {
        if (e.step() >= 0 || step < 0) throw;
        throw SingularityError(std::string(e.what()) + " during step " + std::to_string(step), step);
    }
}

std::vector<double> render_frame(const BallState& s, const BallParams& p, const CameraParams& cam,
                                 double noise_sigma, Rng* rng) {
    if (noise_sigma > 0.0 && rng == nullptr) throw ConfigError("render_frame: noise requested without an rng");
    std::vector<double> pixels(static_cast<std::size_t>(cam.n_pixels()));
    const double inv_r2 = 1.0 / (p.radius * p.radius);
    for (int iy = 0; iy < cam.n_Y; ++iy) {
        const double dy = grid_coord(iy, cam.n_Y, cam.grid) - s.py;
        for (int ix = 0; ix < cam.n_X; ++ix) {
            const double dx = grid_coord(ix, cam.n_X, cam.grid) - s.px;
            double v = std::max(0.0, 1.0 - (dx * dx + dy * dy) * inv_r2);
            if (noise_sigma > 0.0) v += noise_sigma * rng->normal();
            pixels[static_cast<std::size_t>(iy * cam.n_X + ix)] = v;
        }
    }
    return pixels;
}

void Dataset::validate() const {
    if (n_u < 1 || n_X < 1 || n_Y < 1) throw FormatError("dataset has non-positive dimensions");
    if (u.size() != n_samples * static_cast<std::size_t>(n_u))
        throw FormatError("dataset input array length does not match n_samples * n_u");
    if (y.size() != n_samples * static_cast<std::size_t>(n_y()))
        throw FormatError("dataset frame array length does not match n_samples * n_X * n_Y");
}

Trajectory simulate_trajectory(std::size_t n_samples, std::uint64_t seed, const BallParams& p) {
    p.validate();
    Trajectory traj;
    traj.states.reserve(n_samples);
    traj.inputs.reserve(n_samples);
    Rng rng(substream_seed(seed, 0));
    BallState s;
    for (std::size_t t = 0; t < n_samples; ++t) {
        traj.states.push_back(s);
        const double ux = rng.uniform(-1.0, 1.0);
        const double uy = rng.uniform(-1.0, 1.0);
        traj.inputs.push_back({ux, uy});
        if (t + 1 < n_samples) s = rk4_step(s, traj.inputs.back(), p, static_cast<long>(t));
    }
    return traj;
}

Dataset generate_dataset(std::size_t n_samples, double noise_ratio, std::uint64_t seed, const BallParams& p,
                         const CameraParams& cam) {
    if (n_samples < 1) throw ConfigError("generate_dataset: n_samples must be at least 1");
    if (!(noise_ratio >= 0.0)) throw ConfigError("generate_dataset: noise ratio must be non-negative");
    const Trajectory traj = simulate_trajectory(n_samples, seed, p);

    Dataset data;
    data.n_samples = n_samples;
    data.n_u = 2;
    data.n_X = cam.n_X;
    data.n_Y = cam.n_Y;
    data.noise_ratio = noise_ratio;
    data.seed = seed;
    data.sigma_ref = cam.sigma_ref;
    data.u.resize(n_samples * 2);
    data.y.resize(n_samples * static_cast<std::size_t>(cam.n_pixels()));

    const double sigma = cam.sigma_ref * noise_ratio;
    for (std::size_t t = 0; t < n_samples; ++t) {
        data.u[2 * t] = static_cast<float>(traj.inputs[t][0]);
        data.u[2 * t + 1] = static_cast<float>(traj.inputs[t][1]);
        Rng noise(substream_seed(seed, t + 1));
        const auto frame = render_frame(traj.states[t], p, cam, sigma, &noise);
        std::transform(frame.begin(), frame.end(), data.y.begin() + static_cast<std::ptrdiff_t>(t * frame.size()),
                       [](double v) { return static_cast<float>(v); });
    }
    return data;
}

std::uintmax_t ssid_file_size(std::size_t n_samples, int n_u, int n_X, int n_Y) {
    return kSsidHeaderBytes + 4ull * n_samples * (static_cast<std::uintmax_t>(n_u) + static_cast<std::uintmax_t>(n_X) * n_Y);
}

void write_ssid(const Dataset& data, const std::filesystem::path& path) {
    data.validate();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    binio::Writer w(os);
    w.magic("SSID");
    w.put<std::uint32_t>(kSsidVersion);
    w.put<std::uint64_t>(data.n_samples);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(data.n_u));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(data.n_X));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(data.n_Y));
    w.put<double>(data.noise_ratio);
    w.put<std::uint64_t>(data.seed);
    w.put_array<float>(data.u);
    w.put_array<float>(data.y);
    w.check(path.string());
}

Dataset read_ssid(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path.string());
    binio::Reader r(is, path.string());
    r.expect_magic("SSID");
    const auto version = r.get<std::uint32_t>();
    if (version != kSsidVersion)
        throw FormatError(path.string() + ": unsupported SSID version " + std::to_string(version));
    Dataset data;
    data.n_samples = r.get<std::uint64_t>();
    data.n_u = static_cast<int>(r.get<std::uint32_t>());
    data.n_X = static_cast<int>(r.get<std::uint32_t>());
    data.n_Y = static_cast<int>(r.get<std::uint32_t>());
    data.noise_ratio = r.get<double>();
    data.seed = r.get<std::uint64_t>();
    if (data.n_u < 1 || data.n_X < 1 || data.n_Y < 1 || data.n_u > 4096 || data.n_X > 65536 || data.n_Y > 65536)
        throw FormatError(path.string() + ": implausible dimensions in SSID header");
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (!ec && size != ssid_file_size(data.n_samples, data.n_u, data.n_X, data.n_Y))
        throw FormatError(path.string() + ": file size does not match SSID header");
    data.u.resize(data.n_samples * static_cast<std::size_t>(data.n_u));
    data.y.resize(data.n_samples * static_cast<std::size_t>(data.n_y()));
    r.get_array<float>(data.u);
    r.get_array<float>(data.y);
    return data;
}

} // namespace ssenc::sim
