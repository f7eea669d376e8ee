#include <doctest.h>

#include <fstream>
#include <numeric>
#include <set>

#include "ssenc/error.hpp"
#include "ssenc/metrics.hpp"
#include "ssenc/trainer.hpp"
#include "support.hpp"

using namespace ssenc;

namespace {

// Lightly damped 2-state linear system observed through 4 "pixels".
Dataset linear_system_data(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Dataset d;
    d.n_samples = n;
    d.n_u = 1;
    d.n_X = 2;
    d.n_Y = 2;
    d.u.resize(n);
    d.y.resize(4 * n);
    double x0 = 0.0, x1 = 0.0;
    const double C[4][2] = {{1.0, 0.0}, {0.0, 1.0}, {0.5, 0.5}, {-0.3, 0.8}};
    for (std::size_t t = 0; t < n; ++t) {
        const double u = rng.uniform(-1, 1);
        d.u[t] = static_cast<float>(u);
        for (int p = 0; p < 4; ++p) d.y[4 * t + std::size_t(p)] = static_cast<float>(C[p][0] * x0 + C[p][1] * x1);
        const double n0 = 0.9 * x0 + 0.2 * x1;
        const double n1 = -0.2 * x0 + 0.9 * x1 + 0.5 * u;
        x0 = n0;
        x1 = n1;
    }
    return d;
}

SsEncoderModel<double> small_model(const Dataset& train, int n_x = 2) {
    SsEncoderHyper hp;
    hp.n_x = n_x;
    hp.n_y = 4;
    hp.n_u = 1;
    hp.n_a = hp.n_b = 3;
    hp.T = 10;
    hp.hidden = {8, 8};
    SsEncoderModel<double> m(hp, compute_norm(train));
    m.init(11);
    return m;
}

double frame_std(const Dataset& d) {
    const auto f = frames_matrix(d);
    const double mean = f.mean();
    return std::sqrt((f.array() - mean).square().mean());
}

} // namespace

TEST_SUITE("trainer") {

TEST_CASE("epoch batches: sizes, coverage and determinism") {
    std::vector<std::size_t> starts(10);
    std::iota(starts.begin(), starts.end(), 5);
    Rng a(1), b(1), c(2);
    const auto ba = make_epoch_batches(starts, 4, a);
    REQUIRE(ba.size() == 3);
    CHECK(ba[0].size() == 4);
    CHECK(ba[1].size() == 4);
    CHECK(ba[2].size() == 2);
    std::multiset<std::size_t> seen;
    for (const auto& batch : ba) seen.insert(batch.begin(), batch.end());
    CHECK(seen == std::multiset<std::size_t>(starts.begin(), starts.end()));
    CHECK(make_epoch_batches(starts, 4, b) == ba);
    CHECK(make_epoch_batches(starts, 4, c) != ba);
    CHECK_THROWS_AS(make_epoch_batches(starts, 0, a), ConfigError);

    // Default geometry: 29945 starts in batches of 256.
    const auto r = valid_start_indices(30000, WindowShape{5, 5, 50, 0}).to_vector();
    Rng d(3);
    const auto full = make_epoch_batches(r, 256, d);
    CHECK(full.size() == 117);
    CHECK(full.back().size() == 29945 - 116 * 256);
    CHECK(full.back().size() == 249);
    std::size_t total = 0;
    for (const auto& batch : full) total += batch.size();
    CHECK(total == 29945);
}

TEST_CASE("config validation") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.learning_rate = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.max_epochs = -1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("zero epochs return the initial model and an empty log") {
    const Dataset tr = linear_system_data(200, 1), va = linear_system_data(100, 2);
    const auto m = small_model(tr);
    TrainConfig c;
    c.max_epochs = 0;
    const auto r = train(m, tr, va, c);
    CHECK(r.log.epochs.empty());
    CHECK(r.best_epoch == 0);
    CHECK(r.model.e_net.params().values == m.e_net.params().values);
}

TEST_CASE("dry run: mean batch loss equals the full multiple-shooting loss") {
    const Dataset tr = linear_system_data(120, 1), va = linear_system_data(60, 2);
    const auto m = small_model(tr);
    TrainConfig c;
    c.max_epochs = 2;
    c.batch_size = 7;
    c.dry_run = true;
    const auto r = train(m, tr, va, c);
    const auto data = normalize<double>(tr, m.norm);
    const auto starts = valid_start_indices(tr.n_samples, m.hyper.window()).to_vector();
    const double full = oracle::section_loss(m, data, starts);
    REQUIRE(r.log.epochs.size() == 2);
    for (const auto& e : r.log.epochs) CHECK(e.loss == doctest::Approx(full).epsilon(1e-10));
    CHECK(r.log.epochs[0].val_nrms == r.log.epochs[1].val_nrms);
    CHECK(r.model.f_net.params().values == m.f_net.params().values);
}

TEST_CASE("training is deterministic and keeps the best epoch") {
    const Dataset tr = linear_system_data(400, 1), va = linear_system_data(150, 2);
    const auto m = small_model(tr);
    TrainConfig c;
    c.max_epochs = 6;
    c.batch_size = 32;
    c.learning_rate = 3e-3;
    c.seed = 5;
    c.checkpoint_path = oracle::temp_path("trainer_best.ckpt");
    std::filesystem::remove(c.checkpoint_path);
    const auto r1 = train(m, tr, va, c);
    const auto r2 = train(m, tr, va, c);
    REQUIRE(r1.log.epochs.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(r1.log.epochs[i].loss == r2.log.epochs[i].loss);
        CHECK(r1.log.epochs[i].val_nrms == r2.log.epochs[i].val_nrms);
    }
    CHECK(r1.model.h_net.params().values == r2.model.h_net.params().values);

    double best = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    for (const auto& e : r1.log.epochs) {
        CHECK(e.best == (e.val_nrms < best));
        if (e.val_nrms < best) {
            best = e.val_nrms;
            best_epoch = e.epoch;
        }
    }
    CHECK(r1.best_epoch == best_epoch);
    CHECK(r1.best_val_nrms == best);

    const auto val = normalize<double>(va, r1.model.norm);
    CHECK(validation_nrms(r1.model, val, va) == best);
    CheckpointMeta meta;
    const auto loaded = load_checkpoint<double>(c.checkpoint_path, &meta);
    CHECK(meta.epoch == best_epoch);
    CHECK(loaded.f_net.params().values == r1.model.f_net.params().values);

    c.seed = 6;
    CHECK(train(m, tr, va, c).log.epochs[0].loss != r1.log.epochs[0].loss);
}

TEST_CASE("learns a linear system to below 10% NRMS") {
    const Dataset tr = linear_system_data(2000, 1), va = linear_system_data(500, 2);
    const auto m = small_model(tr);
    TrainConfig c;
    c.max_epochs = 50;
    c.batch_size = 64;
    c.learning_rate = 3e-3;
    c.sigma_y = frame_std(va);
    const auto r = train(m, tr, va, c);
    MESSAGE("linear system validation NRMS " << r.best_val_nrms << " at epoch " << r.best_epoch);
    CHECK(r.best_val_nrms < 0.10);
    CHECK(r.log.epochs.back().loss < r.log.epochs.front().loss);
}

TEST_CASE("divergent batches are skipped, or rethrown in strict mode") {
    const Dataset tr = linear_system_data(120, 1), va = linear_system_data(60, 2);
    SsEncoderHyper hp;
    hp.n_x = 2;
    hp.n_y = 4;
    hp.n_u = 1;
    hp.n_a = hp.n_b = 3;
    hp.T = 10;
    hp.hidden = {4, 4};
    SsEncoderModel<float> m(hp, compute_norm(tr));
    m.init(1);
    m.f_net.bypass().leftCols(2).setConstant(1e30f);  // state blows up within the section
    TrainConfig c;
    c.max_epochs = 1;
    c.batch_size = 16;
    const auto r = train(m, tr, va, c);
    REQUIRE(r.log.epochs.size() == 1);
    const std::size_t n_batches = (valid_start_indices(120, hp.window()).count() + 15) / 16;
    CHECK(r.log.epochs[0].skipped_batches == n_batches);
    CHECK(std::isinf(r.log.epochs[0].val_nrms));
    CHECK(r.best_epoch == 0);
    CHECK(r.model.f_net.params().values == m.f_net.params().values);

    c.strict = true;
    CHECK_THROWS_AS(train(m, tr, va, c), DivergenceError);
}

TEST_CASE("baseline training runs and logs") {
    const Dataset tr = linear_system_data(300, 1), va = linear_system_data(100, 2);
    IoAutoencoderHyper hp;
    hp.n_z = 2;
    hp.n = 3;
    hp.n_u = 1;
    hp.n_y = 4;
    hp.hidden = {8, 8};
    IoAutoencoderModel<double> m(hp, compute_norm(tr));
    m.init(2);
    TrainConfig c;
    c.max_epochs = 3;
    c.batch_size = 32;
    c.method = Method::Baseline;
    for (auto sched : {BaselineSchedule::Joint, BaselineSchedule::Sequential}) {
        c.baseline_schedule = sched;
        const auto r = train(m, tr, va, c);
        CHECK(r.log.epochs.size() == 3);
        for (const auto& e : r.log.epochs) CHECK(std::isfinite(e.loss));
    }
}

TEST_CASE("log CSV") {
    TrainLog log;
    log.epochs.push_back({1, 2.5, 0.5, 0.1, true, 0});
    log.epochs.push_back({2, 2.0, 0.6, 0.1, false, 0});
    const auto p = oracle::temp_path("log.csv");
    log.write_csv(p);
    std::ifstream is(p);
    std::string header, row1, row2, extra;
    std::getline(is, header);
    std::getline(is, row1);
    std::getline(is, row2);
    CHECK(header == "epoch,loss,val_nrms,seconds,best");
    CHECK(row1.rfind("1,2.5,0.5,", 0) == 0);
    CHECK(row2.substr(row2.size() - 2) == ",0");
    CHECK(!std::getline(is, extra));
}

}  // TEST_SUITE
