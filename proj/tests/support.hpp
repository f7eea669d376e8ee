#pragma once

// Independent straight-line oracles and generators used by the tests. Nothing
// here calls the batched code paths it is compared against.

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ssenc/baseline.hpp"
#include "ssenc/dataset.hpp"
#include "ssenc/model.hpp"
#include "ssenc/nn.hpp"
#include "ssenc/rng.hpp"

namespace oracle {

using ssenc::nn::Mlp;
using DVec = std::vector<double>;

// Loop-by-loop MLP evaluation straight from the tensor maps.
template <class T>
DVec mlp(const Mlp<T>& net, const DVec& x) {
    const auto& shapes = net.shapes();
    DVec a = x;
    for (std::size_t l = 0; l < shapes.size(); ++l) {
        const auto W = net.weight(l);
        const auto b = net.bias(l);
        DVec z(static_cast<std::size_t>(shapes[l].n_out));
        for (int i = 0; i < shapes[l].n_out; ++i) {
            double s = static_cast<double>(b(i, 0));
            for (int j = 0; j < shapes[l].n_in; ++j) s += static_cast<double>(W(i, j)) * a[static_cast<std::size_t>(j)];
            z[static_cast<std::size_t>(i)] = l + 1 < shapes.size() ? std::tanh(s) : s;
        }
        a = std::move(z);
    }
    const auto B = net.bypass();
    for (int i = 0; i < net.n_out(); ++i)
        for (int j = 0; j < net.n_in(); ++j) a[static_cast<std::size_t>(i)] += static_cast<double>(B(i, j)) * x[static_cast<std::size_t>(j)];
    return a;
}

inline DVec concat(DVec a, const DVec& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

inline DVec column(const ssenc::nn::Mat<double>& m, Eigen::Index c) {
    return DVec(m.col(c).data(), m.col(c).data() + m.rows());
}

// Encoder input built index by index: y[t-n_a] .. y[t-1], then u[t-n_b] .. u[t-1].
inline DVec encoder_input(const ssenc::SeriesData<double>& d, const ssenc::SsEncoderHyper& hp, std::size_t t) {
    DVec in;
    for (int j = hp.n_a; j >= 1; --j) in = concat(in, column(d.y, static_cast<Eigen::Index>(t) - j));
    for (int j = hp.n_b; j >= 1; --j) in = concat(in, column(d.u, static_cast<Eigen::Index>(t) - j));
    return in;
}

// Predicted frames for k = k0 .. T + k0 by plain recursion.
inline std::vector<DVec> rollout(const ssenc::SsEncoderModel<double>& m, const ssenc::SeriesData<double>& d,
                                 std::size_t t) {
    const auto& hp = m.hyper;
    DVec x = mlp(m.e_net, encoder_input(d, hp, t));
    std::vector<DVec> out;
    for (int k = 0; k <= hp.T + hp.k0; ++k) {
        if (k >= hp.k0) out.push_back(mlp(m.h_net, x));
        if (k < hp.T + hp.k0) x = mlp(m.f_net, concat(x, column(d.u, static_cast<Eigen::Index>(t) + k)));
    }
    return out;
}

inline double section_loss(const ssenc::SsEncoderModel<double>& m, const ssenc::SeriesData<double>& d,
                           const std::vector<std::size_t>& starts) {
    double s = 0.0;
    for (std::size_t t : starts) {
        const auto preds = rollout(m, d, t);
        for (std::size_t k = 0; k < preds.size(); ++k) {
            const auto target = column(d.y, static_cast<Eigen::Index>(t + static_cast<std::size_t>(m.hyper.k0) + k));
            for (std::size_t p = 0; p < target.size(); ++p) s += (preds[k][p] - target[p]) * (preds[k][p] - target[p]);
        }
    }
    return s / (2.0 * static_cast<double>(starts.size()) * (m.hyper.T + 1));
}

// Central finite differences of f with respect to every entry of v.
inline Eigen::VectorXd fd_gradient(Eigen::VectorXd& v, const std::function<double()>& f, double h = 1e-5) {
    Eigen::VectorXd g(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double keep = v[i];
        v[i] = keep + h;
        const double fp = f();
        v[i] = keep - h;
        const double fm = f();
        v[i] = keep;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// Largest violation of |a - b| <= max(abs_floor, rel * max(|a|, |b|)), as a
// multiple of the allowance (<= 1 passes).
inline double worst_mismatch(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double rel = 1e-5,
                             double abs_floor = 1e-8) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double allow = std::max(abs_floor, rel * std::max(std::abs(a[i]), std::abs(b[i])));
        worst = std::max(worst, std::abs(a[i] - b[i]) / allow);
    }
    return worst;
}

inline ssenc::SeriesData<double> random_series(ssenc::Rng& rng, int n_u, int n_y, std::size_t n) {
    ssenc::SeriesData<double> d;
    d.u.resize(n_u, static_cast<Eigen::Index>(n));
    d.y.resize(n_y, static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < d.u.size(); ++i) d.u.data()[i] = rng.uniform(-1, 1);
    for (Eigen::Index i = 0; i < d.y.size(); ++i) d.y.data()[i] = rng.normal();
    d.n_X = n_y;
    d.n_Y = 1;
    return d;
}

inline ssenc::Dataset random_dataset(ssenc::Rng& rng, int n_u, int n_X, int n_Y, std::size_t n) {
    ssenc::Dataset d;
    d.n_samples = n;
    d.n_u = n_u;
    d.n_X = n_X;
    d.n_Y = n_Y;
    d.u.resize(n * static_cast<std::size_t>(n_u));
    d.y.resize(n * static_cast<std::size_t>(n_X * n_Y));
    for (auto& v : d.u) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : d.y) v = static_cast<float>(rng.uniform(0, 1));
    return d;
}

// Random tiny model with parameters drawn wider than the default init so the
// tanh layers are exercised away from their linear regime.
inline ssenc::SsEncoderModel<double> tiny_model(ssenc::Rng& rng, int n_x, int n_y, int n_u, int n_a, int n_b, int T,
                                                int k0, std::vector<int> hidden) {
    ssenc::SsEncoderHyper hp;
    hp.n_x = n_x;
    hp.n_y = n_y;
    hp.n_u = n_u;
    hp.n_a = n_a;
    hp.n_b = n_b;
    hp.T = T;
    hp.k0 = k0;
    hp.hidden = std::move(hidden);
    ssenc::SsEncoderModel<double> m(hp, ssenc::identity_norm(n_u, n_y));
    for (auto* net : {&m.e_net, &m.f_net, &m.h_net})
        for (Eigen::Index i = 0; i < net->n_params(); ++i) net->params().values[i] = rng.uniform(-0.7, 0.7);
    return m;
}

inline std::filesystem::path temp_path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "ssenc_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

} // namespace oracle
