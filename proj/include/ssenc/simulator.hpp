#pragma once

// Ball-in-a-box benchmark: wall-repulsion dynamics, RK4 with zero-order-hold
// inputs, a 25x25 pixel camera, and the SSID dataset file format.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ssenc/rng.hpp"

namespace ssenc::sim {

struct BallParams {
    double beta = 1.0 / 200.0;  // wall repulsion
    double gamma = 0.79;        // friction
    double k_force = 0.25;      // input gain
    double radius = 0.25;       // rendered ball radius
    double dt = 0.3;            // sample time

    void validate() const;
};

struct BallState {
    double px = 0.5;
    double py = 0.5;
    double vx = 0.0;
    double vy = 0.0;
};

using Input = std::array<double, 2>;

enum class GridConvention : std::uint8_t {
    Inclusive,    // X_i = i / (n - 1): first and last samples on the walls
    CellCenters,  // X_i = (i + 0.5) / n
};

struct CameraParams {
    int n_X = 25;
    int n_Y = 25;
    GridConvention grid = GridConvention::Inclusive;
    double sigma_ref = 0.204;  // reference output std used to scale the noise

    int n_pixels() const { return n_X * n_Y; }
};

/// Sample coordinate of pixel column/row `i` out of `n`.
double grid_coord(int i, int n, GridConvention grid);

/// Time derivative (vx, vy, ax, ay). Throws SingularityError outside the open box.
std::array<double, 4> dynamics_rhs(const BallState& s, const Input& u, const BallParams& p);

/// One classic RK4 step of length p.dt with u held constant. `step` is only
/// used to label errors.
BallState rk4_step(const BallState& s, const Input& u, const BallParams& p, long step = -1);

/// Camera image, row-major with X varying fastest: pixel (ix, iy) lives at
/// index iy * n_X + ix. Noise is N(0, noise_sigma^2) per pixel.
std::vector<double> render_frame(const BallState& s, const BallParams& p, const CameraParams& cam,
                                 double noise_sigma = 0.0, Rng* rng = nullptr);

struct Dataset {
    std::size_t n_samples = 0;
    int n_u = 2;
    int n_X = 25;
    int n_Y = 25;
    double noise_ratio = 0.0;
    std::uint64_t seed = 0;
    double sigma_ref = 0.204;
    std::vector<float> u;  // n_samples x n_u, row-major
    std::vector<float> y;  // n_samples x (n_X * n_Y), row-major

    int n_y() const { return n_X * n_Y; }
    std::span<const float> input(std::size_t t) const { return {u.data() + t * n_u, static_cast<std::size_t>(n_u)}; }
    std::span<const float> frame(std::size_t t) const {
        return {y.data() + t * n_y(), static_cast<std::size_t>(n_y())};
    }
    void validate() const;
};

struct Trajectory {
    std::vector<BallState> states;  // state at each sample instant, states[0] = centre at rest
    std::vector<Input> inputs;      // inputs[t] moves states[t] to states[t + 1]
};

/// Uniform random inputs on [-1, 1]^2 from the box centre at rest.
Trajectory simulate_trajectory(std::size_t n_samples, std::uint64_t seed, const BallParams& p);

/// Frame t shows the state before input t is applied. Noise std is
/// cam.sigma_ref * noise_ratio; each frame draws from its own substream of
/// `seed`, so the inputs and trajectory do not depend on the noise level.
Dataset generate_dataset(std::size_t n_samples, double noise_ratio, std::uint64_t seed, const BallParams& p = {},
                         const CameraParams& cam = {});

// SSID binary format (little-endian):
//   "SSID" | u32 version=1 | u64 n_samples | u32 n_u | u32 n_X | u32 n_Y |
//   f64 noise_ratio | u64 seed | f32 u[n_samples*n_u] | f32 y[n_samples*n_X*n_Y]
inline constexpr std::uint32_t kSsidVersion = 1;
inline constexpr std::size_t kSsidHeaderBytes = 44;

std::uintmax_t ssid_file_size(std::size_t n_samples, int n_u, int n_X, int n_Y);
void write_ssid(const Dataset& data, const std::filesystem::path& path);
Dataset read_ssid(const std::filesystem::path& path);

} // namespace ssenc::sim
