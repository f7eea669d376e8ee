#include <doctest.h>

#include <fstream>
#include <numeric>

#include "ssenc/error.hpp"
#include "ssenc/metrics.hpp"
#include "ssenc/model.hpp"
#include "support.hpp"

using namespace ssenc;
using Eigen::VectorXd;

namespace {

std::vector<std::size_t> all_starts(const SeriesData<double>& d, const SsEncoderHyper& hp) {
    return valid_start_indices(d.n_samples(), hp.window()).to_vector();
}

VectorXd flat(const ModelGrad<double>& g) {
    VectorXd out(g.e.size() + g.f.size() + g.h.size());
    out << g.e, g.f, g.h;
    return out;
}

} // namespace

TEST_SUITE("model") {

TEST_CASE("encoder: zero params, bypass selection, naive oracle, concat order") {
    Rng rng(1);
    auto m = oracle::tiny_model(rng, 2, 3, 1, 2, 3, 4, 0, {5, 5});
    const auto d = oracle::random_series(rng, 1, 3, 30);
    const auto w = slice_section(d, m.hyper.window(), 7);

    const auto check_oracle = [&]() {
        const VectorXd x = encode_state<double>(m, w.history_y, w.history_u);
        const auto want = oracle::mlp(m.e_net, oracle::encoder_input(d, m.hyper, 7));
        for (int i = 0; i < m.hyper.n_x; ++i) CHECK(x[i] == doctest::Approx(want[std::size_t(i)]).epsilon(1e-12));
    };
    check_oracle();

    SsEncoderModel<double> zero(m.hyper, m.norm);
    CHECK(encode_state<double>(zero, w.history_y, w.history_u).isZero(0.0));

    // Bypass rows picking y[t-1] pixel 2 and u[t-3].
    zero.e_net.bypass()(0, 1 * 3 + 2) = 1.0;
    zero.e_net.bypass()(1, 2 * 3 + 0) = 1.0;
    const VectorXd x = encode_state<double>(zero, w.history_y, w.history_u);
    CHECK(x[0] == d.y(2, 6));
    CHECK(x[1] == d.u(0, 4));

    CHECK_THROWS_AS(encode_state<double>(m, w.history_y.subspan(1), w.history_u), DimensionError);
}

TEST_CASE("rollout matches the naive recursion") {
    Rng rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const int k0 = static_cast<int>(rng.below(2));
        auto m = oracle::tiny_model(rng, 3, 4, 2, 2, 1, 3, k0, {6, 4});
        const auto d = oracle::random_series(rng, 2, 4, 25);
        for (std::size_t t : {std::size_t(2), std::size_t(9), std::size_t(25 - 3 - k0 - 1)}) {
            const auto preds = rollout_section(m, slice_section(d, m.hyper.window(), t));
            const auto want = oracle::rollout(m, d, t);
            REQUIRE(preds.cols() == static_cast<Eigen::Index>(want.size()));
            CHECK(preds.cols() == m.hyper.T + 1);
            for (std::size_t k = 0; k < want.size(); ++k)
                for (int p = 0; p < 4; ++p)
                    CHECK(preds(p, Eigen::Index(k)) == doctest::Approx(want[k][std::size_t(p)]).epsilon(1e-10));
        }
    }
}

TEST_CASE("rollout: constant decoder and hand-chained T = 1") {
    Rng rng(3);
    auto m = oracle::tiny_model(rng, 2, 3, 1, 1, 1, 5, 0, {4, 4});
    const auto d = oracle::random_series(rng, 1, 3, 20);
    SsEncoderModel<double> c = m;
    c.f_net.params().values.setZero();
    c.h_net.params().values.setZero();
    c.h_net.bias(2) << 1.5, -2, 0.25;
    const auto preds = rollout_section(c, slice_section(d, c.hyper.window(), 4));
    for (Eigen::Index k = 0; k < preds.cols(); ++k) CHECK(preds.col(k) == c.h_net.bias(2).col(0));

    SsEncoderHyper hp1 = m.hyper;
    hp1.T = 1;
    SsEncoderModel<double> m1(hp1, m.norm);
    m1.e_net = m.e_net;
    m1.f_net = m.f_net;
    m1.h_net = m.h_net;
    const auto w = slice_section(d, hp1.window(), 4);
    const VectorXd x0 = encode_state<double>(m1, w.history_y, w.history_u);
    VectorXd fin(3);
    fin << x0, d.u(0, 4);
    const VectorXd x1 = m1.f_net.forward(fin);
    const auto p1 = rollout_section(m1, w);
    CHECK(p1.col(0) == m1.h_net.forward(x0));
    CHECK(p1.col(1) == m1.h_net.forward(x1));
}

TEST_CASE("rollout is deterministic and reports divergence") {
    Rng rng(4);
    auto m = oracle::tiny_model(rng, 2, 3, 1, 2, 2, 4, 0, {4, 4});
    const auto d = oracle::random_series(rng, 1, 3, 20);
    const auto w = slice_section(d, m.hyper.window(), 5);
    CHECK(rollout_section(m, w) == rollout_section(m, w));

    m.f_net.bypass().setConstant(1e300);
    CHECK_THROWS_AS(rollout_section(m, w), DivergenceError);
}

TEST_CASE("section loss: closed forms") {
    Rng rng(5);
    // Single window, T = 0, scalar output with error d: V = d^2 / 2.
    auto m = oracle::tiny_model(rng, 1, 1, 1, 1, 1, 0, 0, {3, 3});
    auto d = oracle::random_series(rng, 1, 1, 5);
    const auto w = slice_section(d, m.hyper.window(), 2);
    const double pred = rollout_section(m, w)(0, 0);
    const double err = pred - d.y(0, 2);
    const std::vector<SectionWindow<double>> one{w};
    CHECK(section_loss<double>(m, one) == doctest::Approx(err * err / 2).epsilon(1e-14));

    // Perfect predictions give zero.
    d.y(0, 2) = pred;
    const std::vector<SectionWindow<double>> exact{slice_section(d, m.hyper.window(), 2)};
    CHECK(section_loss<double>(m, exact) == 0.0);

    CHECK_THROWS_AS(section_loss<double>(m, std::span<const SectionWindow<double>>{}), ConfigError);
}

TEST_CASE("section loss matches the naive oracle") {
    Rng rng(6);
    auto m = oracle::tiny_model(rng, 2, 3, 1, 2, 2, 4, 1, {5, 3});
    const auto d = oracle::random_series(rng, 1, 3, 40);
    const auto starts = all_starts(d, m.hyper);
    const auto ws = slice_sections(d, m.hyper.window(), starts);
    CHECK(section_loss<double>(m, ws) == doctest::Approx(oracle::section_loss(m, d, starts)).epsilon(1e-12));
    CHECK(section_loss_grad<double>(m, ws).loss == doctest::Approx(section_loss<double>(m, ws)).epsilon(1e-13));
}

TEST_CASE("batch decomposition of loss and gradient") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        auto m = oracle::tiny_model(rng, 2, 3, 1, 2, 2, 4, 0, {4, 4});
        const auto d = oracle::random_series(rng, 1, 3, 60);
        auto starts = all_starts(d, m.hyper);
        starts.resize(2 * (starts.size() / 2));
        for (std::size_t i = starts.size(); i > 1; --i) std::swap(starts[i - 1], starts[rng.below(i)]);
        const std::size_t half = starts.size() / 2;
        const auto ws = slice_sections(d, m.hyper.window(), starts);
        const std::span<const SectionWindow<double>> all(ws), b1 = all.first(half), b2 = all.subspan(half);
        const auto g = section_loss_grad<double>(m, all);
        const auto g1 = section_loss_grad<double>(m, b1);
        const auto g2 = section_loss_grad<double>(m, b2);
        CHECK(g.loss == doctest::Approx((g1.loss + g2.loss) / 2).epsilon(1e-12));
        const VectorXd mean = (flat(g1.grad) + flat(g2.grad)) / 2;
        CHECK(oracle::worst_mismatch(flat(g.grad), mean, 1e-10, 1e-14) <= 1.0);
    }
}

TEST_CASE("section_loss_grad matches central finite differences") {
    Rng rng(8);
    for (int trial = 0; trial < 6; ++trial) {
        const int k0 = static_cast<int>(rng.below(2));
        auto m = oracle::tiny_model(rng, 2, 3, 1, 1 + int(rng.below(3)), 1 + int(rng.below(3)), 4, k0,
                                    {1 + int(rng.below(8)), 1 + int(rng.below(8))});
        const auto d = oracle::random_series(rng, 1, 3, 24);
        std::vector<std::size_t> starts = all_starts(d, m.hyper);
        starts.resize(std::min<std::size_t>(starts.size(), 5));
        const auto ws = slice_sections(d, m.hyper.window(), starts);
        const auto lg = section_loss_grad<double>(m, ws);
        auto loss = [&]() { return section_loss<double>(m, ws); };
        CHECK(oracle::worst_mismatch(lg.grad.e, oracle::fd_gradient(m.e_net.params().values, loss)) <= 1.0);
        CHECK(oracle::worst_mismatch(lg.grad.f, oracle::fd_gradient(m.f_net.params().values, loss)) <= 1.0);
        CHECK(oracle::worst_mismatch(lg.grad.h, oracle::fd_gradient(m.h_net.params().values, loss)) <= 1.0);
    }
}

TEST_CASE("unused encoder output gets an exactly zero gradient") {
    Rng rng(9);
    auto m = oracle::tiny_model(rng, 2, 3, 1, 2, 2, 4, 0, {4, 4});
    // h ignores the state (only its bias survives), so nothing depends on e.
    for (std::size_t l = 0; l < m.h_net.n_layers(); ++l) m.h_net.weight(l).setZero();
    m.h_net.bypass().setZero();
    const auto d = oracle::random_series(rng, 1, 3, 30);
    const auto ws = slice_sections(d, m.hyper.window(), all_starts(d, m.hyper));
    const auto lg = section_loss_grad<double>(m, ws);
    CHECK(lg.grad.e.isZero(0.0));
    CHECK(lg.grad.f.isZero(0.0));
}

TEST_CASE("permuting pixels consistently leaves the loss unchanged") {
    Rng rng(10);
    auto m = oracle::tiny_model(rng, 2, 4, 1, 2, 1, 3, 0, {5, 5});
    const auto d = oracle::random_series(rng, 1, 4, 30);
    std::vector<int> perm{2, 0, 3, 1};

    auto pm = m;
    auto pd = d;
    for (int p = 0; p < 4; ++p) pd.y.row(perm[std::size_t(p)]) = d.y.row(p);
    // h output rows and the encoder's y-history columns follow the permutation.
    const std::size_t last = pm.h_net.n_layers() - 1;
    for (int p = 0; p < 4; ++p) {
        pm.h_net.weight(last).row(perm[std::size_t(p)]) = m.h_net.weight(last).row(p);
        pm.h_net.bias(last).row(perm[std::size_t(p)]) = m.h_net.bias(last).row(p);
        pm.h_net.bypass().row(perm[std::size_t(p)]) = m.h_net.bypass().row(p);
        for (int j = 0; j < m.hyper.n_a; ++j) {
            pm.e_net.weight(0).col(j * 4 + perm[std::size_t(p)]) = m.e_net.weight(0).col(j * 4 + p);
            pm.e_net.bypass().col(j * 4 + perm[std::size_t(p)]) = m.e_net.bypass().col(j * 4 + p);
        }
    }
    const auto starts = all_starts(d, m.hyper);
    const double v = section_loss<double>(m, slice_sections(d, m.hyper.window(), starts));
    const double pv = section_loss<double>(pm, slice_sections(pd, pm.hyper.window(), starts));
    CHECK(pv == doctest::Approx(v).epsilon(1e-12));
}

TEST_CASE("simulate equals a full-length rollout and starts from measured history") {
    Rng rng(11);
    auto base = oracle::tiny_model(rng, 2, 3, 1, 2, 2, 4, 0, {4, 4});
    const auto d = oracle::random_series(rng, 1, 3, 30);
    const std::size_t t0 = 2;
    const auto sim = simulate_normalized(base, d, t0);
    CHECK(sim.cols() == 28);

    SsEncoderHyper full = base.hyper;
    full.T = 26;  // longest section the start-range rule admits
    SsEncoderModel<double> m(full, base.norm);
    m.e_net = base.e_net;
    m.f_net = base.f_net;
    m.h_net = base.h_net;
    const auto preds = rollout_section(m, slice_section(d, full.window(), t0));
    const Eigen::MatrixXd head = sim.leftCols(27);
    CHECK(oracle::worst_mismatch(head.reshaped(), preds.reshaped(), 1e-12, 1e-14) <= 1.0);

    CHECK_THROWS(simulate_normalized(base, d, 1));
}

TEST_CASE("simulate in pixel units denormalizes with the stored statistics") {
    Rng rng(12);
    const Dataset raw = oracle::random_dataset(rng, 2, 3, 2, 40);
    SsEncoderHyper hp;
    hp.n_x = 2;
    hp.n_y = 6;
    hp.T = 4;
    hp.hidden = {4, 4};
    SsEncoderModel<double> m(hp, compute_norm(raw));
    m.init(3);
    const auto pix = simulate(m, raw, 5);
    const auto norm = simulate_normalized(m, normalize<double>(raw, m.norm), 5);
    const auto back = normalize_frames(pix, m.norm);
    CHECK(oracle::worst_mismatch(back.reshaped(), norm.reshaped(), 1e-12, 1e-12) <= 1.0);
}

TEST_CASE("untrained model simulation NRMS is at least 100%") {
    const Dataset train = sim::generate_dataset(2000, 0.0, 21);
    const Dataset test = sim::generate_dataset(600, 0.0, 22);
    SsEncoderModel<float> m(SsEncoderHyper{}, compute_norm(train));
    m.init(5);
    const double v = nrms(simulate_model(m, test), frames_matrix(test, 5));
    MESSAGE("untrained NRMS " << v);
    CHECK(v >= 1.0);
}

TEST_CASE("checkpoint round trip is bit exact; corruption is rejected") {
    Rng rng(13);
    const Dataset raw = oracle::random_dataset(rng, 2, 5, 5, 50);
    SsEncoderHyper hp;
    hp.n_y = 25;
    hp.hidden = {7, 3};
    hp.n_a = 3;
    hp.init = nn::InitScheme::FanIn;
    SsEncoderModel<float> m(hp, compute_norm(raw, NormMode::PerPixel));
    m.init(99);

    const auto path = oracle::temp_path("m.ssck");
    save_checkpoint(m, path, {7, 0.125});
    CheckpointMeta meta;
    const auto r = load_checkpoint<float>(path, &meta);
    CHECK(meta.epoch == 7);
    CHECK(meta.val_nrms == 0.125);
    CHECK(r.hyper == m.hyper);
    CHECK(r.norm == m.norm);
    CHECK(r.e_net.params().values == m.e_net.params().values);
    CHECK(r.f_net.params().values == m.f_net.params().values);
    CHECK(r.h_net.params().values == m.h_net.params().values);
    CHECK(peek_checkpoint(path).magic == "SSCK");
    CHECK(peek_checkpoint(path).scalar_bytes == 4);

    SsEncoderModel<double> md = m.cast<double>();
    md.e_net.params().values[0] = 1.0 / 3.0;
    save_checkpoint(md, path);
    CHECK(peek_checkpoint(path).scalar_bytes == 8);
    CHECK(load_checkpoint<double>(path).e_net.params().values == md.e_net.params().values);
    save_checkpoint(m, path);

    std::string bytes;
    {
        std::ifstream is(path, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(is), {});
    }
    const auto bad = oracle::temp_path("bad.ssck");
    auto write = [&](const std::string& b) {
        std::ofstream(bad, std::ios::binary | std::ios::trunc).write(b.data(), std::streamsize(b.size()));
    };
    std::string bm = bytes;
    bm[1] = 'Z';
    write(bm);
    CHECK_THROWS_AS(load_checkpoint<float>(bad), FormatError);
    std::string bv = bytes;
    bv[4] = 9;
    write(bv);
    CHECK_THROWS_AS(load_checkpoint<float>(bad), FormatError);
    for (std::size_t cut : {bytes.size() - 1, bytes.size() / 2, std::size_t(10)}) {
        write(bytes.substr(0, cut));
        CHECK_THROWS_AS(load_checkpoint<float>(bad), FormatError);
    }
    write(bytes + "!");
    CHECK_THROWS_AS(load_checkpoint<float>(bad), FormatError);
    CHECK_THROWS_AS(load_baseline_checkpoint<float>(path), FormatError);
}

}  // TEST_SUITE
