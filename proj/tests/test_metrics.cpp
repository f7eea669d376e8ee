#include <doctest.h>

#include <fstream>
#include <sstream>

#include "ssenc/error.hpp"
#include "ssenc/metrics.hpp"
#include "support.hpp"

using namespace ssenc;
using oracle::DVec;

namespace {

DVec to_pixels(const DVec& yn, const NormStats& s) {
    DVec out(yn.size());
    for (std::size_t p = 0; p < yn.size(); ++p) out[p] = yn[p] * s.y_std[p] + s.y_mean[p];
    return out;
}

// Sum of squared one-step errors: state from history ending at t - 1, one
// transition, compared to y[t + 1].
double direct_one_step(const SsEncoderModel<double>& m, const Dataset& raw, std::size_t& count) {
    const auto d = normalize<double>(raw, m.norm);
    const auto frames = frames_matrix(raw);
    const std::size_t hist = history_length(m.hyper);
    double s = 0.0;
    count = 0;
    for (std::size_t t = hist; t + 1 < raw.n_samples; ++t) {
        const DVec x = oracle::mlp(m.e_net, oracle::encoder_input(d, m.hyper, t));
        const DVec x1 = oracle::mlp(m.f_net, oracle::concat(x, oracle::column(d.u, Eigen::Index(t))));
        const DVec y = to_pixels(oracle::mlp(m.h_net, x1), m.norm);
        for (std::size_t p = 0; p < y.size(); ++p) s += std::pow(y[p] - frames(Eigen::Index(p), Eigen::Index(t + 1)), 2);
        ++count;
    }
    return s;
}

double direct_one_step(const IoAutoencoderModel<double>& m, const Dataset& raw, std::size_t& count) {
    const auto d = normalize<double>(raw, m.norm);
    const auto frames = frames_matrix(raw);
    const auto n = static_cast<std::size_t>(m.hyper.n);
    double s = 0.0;
    count = 0;
    for (std::size_t t = n; t + 1 < raw.n_samples; ++t) {
        DVec zh;
        for (std::size_t j = t - n; j < t; ++j) zh = oracle::concat(zh, oracle::mlp(m.enc_net, oracle::column(d.y, Eigen::Index(j))));
        auto uh = [&](std::size_t end) {
            DVec h;
            for (std::size_t j = end - n; j < end; ++j) h = oracle::concat(h, oracle::column(d.u, Eigen::Index(j)));
            return h;
        };
        const DVec z0 = oracle::mlp(m.narx_net, oracle::concat(zh, uh(t)));
        DVec zh1(zh.begin() + m.hyper.n_z, zh.end());
        zh1 = oracle::concat(zh1, z0);
        const DVec z1 = oracle::mlp(m.narx_net, oracle::concat(zh1, uh(t + 1)));
        const DVec y = to_pixels(oracle::mlp(m.dec_net, z1), m.norm);
        for (std::size_t p = 0; p < y.size(); ++p) s += std::pow(y[p] - frames(Eigen::Index(p), Eigen::Index(t + 1)), 2);
        ++count;
    }
    return s;
}

} // namespace

TEST_SUITE("metrics") {

TEST_CASE("nrms: zero, constant offset, linear scaling, shape mismatch") {
    Rng rng(1);
    Eigen::MatrixXd a(9, 13);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(0, 1);
    CHECK(nrms(a, a) == 0.0);
    const Eigen::MatrixXd shifted = a.array() + 0.1;
    CHECK(nrms(shifted, a) == doctest::Approx(0.1 / 0.204).epsilon(1e-12));
    CHECK(nrms(shifted, a, 0.5) == doctest::Approx(0.2).epsilon(1e-12));

    Eigen::MatrixXd e(9, 13);
    for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = rng.normal();
    const double base = nrms(a + e, a);
    for (double c : {0.5, 2.0, 7.0}) CHECK(nrms(a + c * e, a) == doctest::Approx(c * base).epsilon(1e-12));
    CHECK_THROWS_AS(nrms(a.leftCols(12), a), DimensionError);
}

TEST_CASE("per_frame_rms: closed form and consistency with nrms") {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(4, 3);
    Eigen::MatrixXd p = t;
    p.col(1).setConstant(0.5);
    p(0, 2) = 2.0;
    const Eigen::VectorXd r = per_frame_rms(p, t);
    CHECK(r[0] == 0.0);
    CHECK(r[1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r[2] == doctest::Approx(1.0).epsilon(1e-15));

    Rng rng(2);
    Eigen::MatrixXd a(25, 200), b(25, 200);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        a.data()[i] = rng.uniform(0, 1);
        b.data()[i] = rng.uniform(0, 1);
    }
    const Eigen::VectorXd f = per_frame_rms(a, b);
    const double agg = std::sqrt(f.squaredNorm() / double(f.size()));
    CHECK(agg == doctest::Approx(nrms(a, b) * kSigmaY).epsilon(1e-10));
    CHECK((f.array() >= 0.0).all());
}

TEST_CASE("evaluate: per-frame series aggregates to the simulation NRMS") {
    Rng rng(3);
    const Dataset raw = oracle::random_dataset(rng, 2, 3, 2, 80);
    auto m = oracle::tiny_model(rng, 3, 6, 2, 3, 2, 5, 0, {6, 6});
    m.norm = compute_norm(raw, NormMode::PerPixel);
    const EvalReport r = evaluate(m, raw, 10);
    CHECK(r.t_start == 3);
    CHECK(r.per_frame_rms.size() == 77);
    const double agg = std::sqrt(r.per_frame_rms.squaredNorm() / double(r.per_frame_rms.size()));
    CHECK(agg == doctest::Approx(r.sim_nrms * kSigmaY).epsilon(1e-10));
    CHECK(r.nstep_nrms.size() == 10);
    for (double v : r.nstep_nrms) CHECK(v >= 0.0);
}

TEST_CASE("nstep_nrms at n = 1 matches a direct one-step computation") {
    Rng rng(4);
    const Dataset raw = oracle::random_dataset(rng, 2, 2, 3, 60);
    SUBCASE("state-space encoder") {
        auto m = oracle::tiny_model(rng, 3, 6, 2, 4, 2, 5, 0, {5, 4});
        m.norm = compute_norm(raw, NormMode::PerPixel);
        std::size_t count = 0;
        const double s = direct_one_step(m, raw, count);
        CHECK(count == 60 - 4 - 1);
        const double want = std::sqrt(s / (double(count) * 6)) / kSigmaY;
        CHECK(nstep_nrms(m, raw, 5)[0] == doctest::Approx(want).epsilon(1e-10));
    }
    SUBCASE("io autoencoder") {
        IoAutoencoderHyper hp;
        hp.n_z = 2;
        hp.n = 3;
        hp.n_y = 6;
        hp.hidden = {5, 5};
        IoAutoencoderModel<double> m(hp, compute_norm(raw, NormMode::PerPixel));
        for (auto* net : {&m.enc_net, &m.dec_net, &m.narx_net})
            for (auto& v : net->params().values) v = rng.uniform(-0.6, 0.6);
        std::size_t count = 0;
        const double s = direct_one_step(m, raw, count);
        const double want = std::sqrt(s / (double(count) * 6)) / kSigmaY;
        CHECK(nstep_nrms(m, raw, 5)[0] == doctest::Approx(want).epsilon(1e-10));
    }
    auto m = oracle::tiny_model(rng, 3, 6, 2, 4, 2, 5, 0, {5, 4});
    CHECK_THROWS_AS(nstep_nrms(m, raw, 0), ConfigError);
    CHECK_THROWS_AS(nstep_nrms(m, raw, 56), ConfigError);
}

TEST_CASE("perfect model gives zero errors") {
    // Constant frames and a model whose decoder outputs that constant.
    Rng rng(5);
    Dataset raw = oracle::random_dataset(rng, 2, 2, 2, 40);
    for (std::size_t t = 0; t < raw.n_samples; ++t)
        for (int p = 0; p < 4; ++p) raw.y[t * 4 + std::size_t(p)] = 0.25f * float(p);
    SsEncoderHyper hp;
    hp.n_x = 2;
    hp.n_y = 4;
    hp.n_a = hp.n_b = 2;
    hp.T = 5;
    hp.hidden = {3, 3};
    SsEncoderModel<double> m(hp, identity_norm(2, 4));
    for (int p = 0; p < 4; ++p) m.h_net.bias(m.h_net.shapes().size() - 1)(p, 0) = 0.25 * p;
    const EvalReport r = evaluate(m, raw, 5);
    CHECK(r.sim_nrms < 1e-6);
    for (double v : r.nstep_nrms) CHECK(v < 1e-6);
    CHECK(r.per_frame_rms.maxCoeff() < 1e-6);
}

TEST_CASE("median and find_spikes") {
    CHECK(median({3, 1, 2}) == 2.0);
    CHECK(median({4, 1, 3, 2}) == 2.5);
    CHECK_THROWS_AS(median({}), DimensionError);

    Eigen::VectorXd s = Eigen::VectorXd::Ones(100);
    s[10] = 6.0;
    s[40] = 7.0;
    s[41] = 9.0;
    s[42] = 5.5;
    s[99] = 5.0;  // equal to the threshold: not a spike
    const auto spikes = find_spikes(s, 5.0);
    REQUIRE(spikes.size() == 2);
    CHECK(spikes[0] == 10);
    CHECK(spikes[1] == 41);
    CHECK(find_spikes(Eigen::VectorXd::Ones(10), 5.0).empty());
    CHECK(find_spikes(Eigen::VectorXd(), 5.0).empty());
}

TEST_CASE("to_gray_byte rounding and clamping") {
    CHECK(to_gray_byte(0.5) == 128);
    CHECK(to_gray_byte(0.0) == 0);
    CHECK(to_gray_byte(1.0) == 255);
    CHECK(to_gray_byte(-0.3) == 0);
    CHECK(to_gray_byte(1.7) == 255);
    CHECK(to_gray_byte(std::nan("")) == 0);
    CHECK(to_gray_byte(10.0 / 255.0) == 10);
}

TEST_CASE("strip layout and PGM round trip") {
    const int nX = 3, nY = 2;
    Eigen::MatrixXd meas(6, 4), sim(6, 4);
    for (Eigen::Index c = 0; c < 4; ++c)
        for (Eigen::Index p = 0; p < 6; ++p) {
            meas(p, c) = (10.0 * c + p) / 255.0;
            sim(p, c) = (100.0 + 10.0 * c + p) / 255.0;
        }
    const std::vector<std::size_t> cols{1, 3};
    const GrayImage img = make_strip(meas, sim, nX, nY, cols, 2);
    CHECK(img.width == 2 * nX * 2);
    CHECK(img.height == 2 * nY * 2);
    auto at = [&](int x, int y) { return int(img.pixels[std::size_t(y * img.width + x)]); };
    // Top row, frame column 1, pixel (ix = 2, iy = 1) repeated 2x2.
    CHECK(at(2 * 2, 1 * 2) == 10 + 1 * 3 + 2);
    CHECK(at(2 * 2 + 1, 1 * 2 + 1) == 15);
    // Second frame (column 3), ix = 0, iy = 0.
    CHECK(at(nX * 2, 0) == 30);
    // Bottom row holds the simulated frames.
    CHECK(at(0, nY * 2) == 110);
    CHECK(at(nX * 2 + 2, nY * 2 + 2) == 100 + 30 + 3 + 1);

    const auto path = oracle::temp_path("strip.pgm");
    write_pgm(img, path);
    const GrayImage back = read_pgm(path);
    CHECK(back.width == img.width);
    CHECK(back.height == img.height);
    CHECK(back.pixels == img.pixels);
    {
        std::ifstream is(path, std::ios::binary);
        std::string magic;
        is >> magic;
        CHECK(magic == "P5");
    }

    render_strip(meas, sim, nX, nY, cols, path, 1);
    const GrayImage small = read_pgm(path);
    CHECK(small.width == 2 * nX);
    for (std::size_t i = 0; i < small.pixels.size(); ++i) {
        const int x = int(i) % small.width, y = int(i) / small.width;
        const auto c = cols[std::size_t(x / nX)];
        const double v = (y < nY ? meas : sim)((y % nY) * nX + x % nX, Eigen::Index(c));
        CHECK(std::abs(small.pixels[i] / 255.0 - v) <= 0.5 / 255.0 + 1e-12);
    }

    CHECK_THROWS_AS(make_strip(meas, sim, 2, 2, cols), DimensionError);
    const std::vector<std::size_t> bad{4};
    CHECK_THROWS_AS(make_strip(meas, sim, nX, nY, bad), IndexError);
    CHECK_THROWS_AS(make_strip(meas, sim.leftCols(3), nX, nY, cols), DimensionError);
}

TEST_CASE("CSV emitters") {
    EvalReport r;
    r.t_start = 5;
    r.sim_nrms = 0.25;
    r.per_frame_rms = Eigen::VectorXd::LinSpaced(4, 0.0, 0.3);
    r.nstep_nrms = {0.1, 0.2, 0.3};
    const auto dir = oracle::temp_path("csv");
    std::filesystem::create_directories(dir);
    write_eval_csv(dir / "eval.csv", r);
    write_per_frame_csv(dir / "frames.csv", r);
    write_nstep_csv(dir / "nstep.csv", r.nstep_nrms);
    auto lines = [](const std::filesystem::path& p) {
        std::ifstream is(p);
        std::vector<std::string> out;
        for (std::string l; std::getline(is, l);) out.push_back(l);
        return out;
    };
    const auto e = lines(dir / "eval.csv");
    CHECK(e[0] == "metric,value");
    CHECK(e[1].rfind("sim_nrms,0.25", 0) == 0);
    const auto f = lines(dir / "frames.csv");
    CHECK(f.size() == 5);
    CHECK(f[1].rfind("5,", 0) == 0);
    CHECK(f[4].rfind("8,", 0) == 0);
    const auto n = lines(dir / "nstep.csv");
    CHECK(n.size() == 4);
    CHECK(n[1].rfind("1,", 0) == 0);
    CHECK(n[3].rfind("3,", 0) == 0);
}

}  // TEST_SUITE
