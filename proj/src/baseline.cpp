#include "ssenc/baseline.hpp"

#include <algorithm>
#include <fstream>

#include "checkpoint_io.hpp"
#include "ssenc/error.hpp"
#include "ssenc/rng.hpp"

namespace ssenc {

using nn::Mat;
using nn::Vec;

void IoAutoencoderHyper::validate() const {
    if (n_z < 1) throw ConfigError("n_z must be at least 1");
    if (n < 1) throw ConfigError("NARX order n must be at least 1");
    if (n_u < 1 || n_y < 1) throw ConfigError("n_u and n_y must be at least 1");
    for (int h : hidden)
        if (h < 1) throw ConfigError("hidden widths must be positive");
}

template <class T>
IoAutoencoderModel<T>::IoAutoencoderModel(const IoAutoencoderHyper& h, NormStats n)
    : hyper(h),
      norm(std::move(n)),
      enc_net(h.n_y, h.n_z, h.hidden),
      dec_net(h.n_z, h.n_y, h.hidden),
      narx_net(h.narx_inputs(), h.n_z, h.hidden) {
    hyper.validate();
    if (norm.n_u() != hyper.n_u || norm.n_y() != hyper.n_y)
        throw DimensionError("normalization statistics do not match model widths");
}

template <class T>
void IoAutoencoderModel<T>::init(std::uint64_t seed) {
    enc_net.init(substream_seed(seed, 11), hyper.init);
    dec_net.init(substream_seed(seed, 12), hyper.init);
    narx_net.init(substream_seed(seed, 13), hyper.init);
}

StartRange baseline_valid_targets(std::size_t n_samples, int n) {
    if (n < 1) throw ConfigError("NARX order n must be at least 1");
    if (n_samples <= static_cast<std::size_t>(n))
        throw ConfigError("dataset of " + std::to_string(n_samples) + " samples is too short for NARX order " +
                          std::to_string(n));
    return {static_cast<std::size_t>(n), n_samples - 1};
}

template <class T>
BaselineWindow<T> slice_baseline_window(const SeriesData<T>& data, int n, std::size_t t) {
    const StartRange range = baseline_valid_targets(data.n_samples(), n);
    if (!range.contains(t))
        throw IndexError("baseline target " + std::to_string(t) + " outside valid range [" +
                         std::to_string(range.first) + ", " + std::to_string(range.last) + "]");
    const auto ny = static_cast<std::size_t>(data.n_y());
    const auto nu = static_cast<std::size_t>(data.n_u());
    BaselineWindow<T> w;
    w.t = t;
    w.frames = {data.y.data() + (t - n) * ny, static_cast<std::size_t>(n + 1) * ny};
    w.history_u = {data.u.data() + (t - n) * nu, static_cast<std::size_t>(n) * nu};
    return w;
}

template <class T>
std::vector<BaselineWindow<T>> slice_baseline_windows(const SeriesData<T>& data, int n,
                                                      std::span<const std::size_t> targets) {
    std::vector<BaselineWindow<T>> out;
    out.reserve(targets.size());
    for (std::size_t t : targets) out.push_back(slice_baseline_window(data, n, t));
    return out;
}

template <class T>
std::pair<Vec<T>, Vec<T>> autoencode(const IoAutoencoderModel<T>& model, std::span<const T> frame) {
    if (frame.size() != static_cast<std::size_t>(model.hyper.n_y))
        throw DimensionError("autoencode: frame width " + std::to_string(frame.size()) + ", expected " +
                             std::to_string(model.hyper.n_y));
    Vec<T> z = model.enc_net.forward(Eigen::Map<const Vec<T>>(frame.data(), model.hyper.n_y));
    Vec<T> rec = model.dec_net.forward(z);
    return {std::move(z), std::move(rec)};
}

template <class T>
Vec<T> narx_predict(const IoAutoencoderModel<T>& model, std::span<const T> z_history, std::span<const T> u_history) {
    const auto& hp = model.hyper;
    if (z_history.size() != static_cast<std::size_t>(hp.n) * hp.n_z)
        throw DimensionError("narx_predict: latent history must hold n latents");
    if (u_history.size() != static_cast<std::size_t>(hp.n) * hp.n_u)
        throw DimensionError("narx_predict: input history must hold n inputs");
    Vec<T> in(hp.narx_inputs());
    std::copy(z_history.begin(), z_history.end(), in.data());
    std::copy(u_history.begin(), u_history.end(), in.data() + z_history.size());
    return model.narx_net.forward(in);
}

namespace {

template <class T>
double baseline_batch(const IoAutoencoderModel<T>& m, std::span<const BaselineWindow<T>> ws,
                      const BaselineWeights& wt, BaselineGrad<T>* grad) {
    const auto& hp = m.hyper;
    if (ws.empty()) throw ConfigError("baseline loss needs at least one window");
    const auto ny = static_cast<std::size_t>(hp.n_y);
    for (const auto& w : ws)
        if (w.frames.size() != (hp.n + 1) * ny || w.history_u.size() != static_cast<std::size_t>(hp.n) * hp.n_u)
            throw DimensionError("baseline window does not match model hyperparameters");

    const auto B = static_cast<Eigen::Index>(ws.size());
    const Eigen::Index per = hp.n + 1;
    const bool want_grad = grad != nullptr;

    Mat<T> frames(hp.n_y, per * B);
    for (Eigen::Index b = 0; b < B; ++b)
        frames.middleCols(b * per, per) = Eigen::Map<const Mat<T>>(ws[b].frames.data(), hp.n_y, per);

    nn::MlpTape<T> enc_tape, dec_tape_rec, narx_tape, dec_tape_pred;
    const Mat<T> z = m.enc_net.forward_batch(frames, want_grad ? &enc_tape : nullptr);
    Mat<T> rec = m.dec_net.forward_batch(z, want_grad ? &dec_tape_rec : nullptr);
    rec -= frames;

    const Eigen::Index zh = static_cast<Eigen::Index>(hp.n) * hp.n_z;
    const Eigen::Index uh = static_cast<Eigen::Index>(hp.n) * hp.n_u;
    Mat<T> narx_in(zh + uh, B);
    for (Eigen::Index b = 0; b < B; ++b) {
        narx_in.col(b).head(zh) = Eigen::Map<const Vec<T>>(z.col(b * per).data(), zh);
        narx_in.col(b).tail(uh) = Eigen::Map<const Vec<T>>(ws[b].history_u.data(), uh);
    }
    const Mat<T> zp = m.narx_net.forward_batch(narx_in, want_grad ? &narx_tape : nullptr);
    Mat<T> pred = m.dec_net.forward_batch(zp, want_grad ? &dec_tape_pred : nullptr);
    for (Eigen::Index b = 0; b < B; ++b) pred.col(b) -= frames.col(b * per + hp.n);

    double total = 0.0;
    for (Eigen::Index b = 0; b < B; ++b) {
        const double r = static_cast<double>(rec.middleCols(b * per, per).squaredNorm());
        const double p = static_cast<double>(pred.col(b).squaredNorm());
        total += wt.reconstruction * r / static_cast<double>(per) + wt.prediction * p;
    }
    const double loss = total / (2.0 * static_cast<double>(B));
    if (!std::isfinite(loss)) throw DivergenceError("non-finite baseline loss");

    if (want_grad) {
        rec *= static_cast<T>(wt.reconstruction / (static_cast<double>(per) * B));
        Mat<T> gz = m.dec_net.backward_batch(z, dec_tape_rec, rec, grad->dec, true);
        pred *= static_cast<T>(wt.prediction / static_cast<double>(B));
        const Mat<T> gzp = m.dec_net.backward_batch(zp, dec_tape_pred, pred, grad->dec, true);
        const Mat<T> g_in = m.narx_net.backward_batch(narx_in, narx_tape, gzp, grad->narx, true);
        for (Eigen::Index b = 0; b < B; ++b)
            Eigen::Map<Vec<T>>(gz.col(b * per).data(), zh) += g_in.col(b).head(zh);
        m.enc_net.backward_batch(frames, enc_tape, gz, grad->enc, false);
    }
    return loss;
}

} // namespace

template <class T>
double baseline_loss(const IoAutoencoderModel<T>& model, std::span<const BaselineWindow<T>> windows,
                     const BaselineWeights& weights) {
    return baseline_batch<T>(model, windows, weights, nullptr);
}

template <class T>
BaselineLossGrad<T> baseline_loss_grad(const IoAutoencoderModel<T>& model, std::span<const BaselineWindow<T>> windows,
                                       const BaselineWeights& weights) {
    BaselineLossGrad<T> out;
    out.grad.enc = Vec<T>::Zero(model.enc_net.n_params());
    out.grad.dec = Vec<T>::Zero(model.dec_net.n_params());
    out.grad.narx = Vec<T>::Zero(model.narx_net.n_params());
    out.loss = baseline_batch<T>(model, windows, weights, &out.grad);
    return out;
}

template <class T>
void rollout_from_starts(const IoAutoencoderModel<T>& model, const SeriesData<T>& data,
                         std::span<const std::size_t> starts, int horizon,
                         const std::function<void(int, const Mat<T>&)>& visit) {
    const auto& hp = model.hyper;
    if (data.n_y() != hp.n_y || data.n_u() != hp.n_u)
        throw DimensionError("dataset widths do not match baseline model");
    if (starts.empty()) return;
    const std::size_t n_samples = data.n_samples();
    for (std::size_t j = 0; j < starts.size(); ++j) {
        if (starts[j] < static_cast<std::size_t>(hp.n) || starts[j] >= n_samples)
            throw IndexError("baseline rollout start " + std::to_string(starts[j]) + " outside [" +
                             std::to_string(hp.n) + ", " + std::to_string(n_samples - 1) + "]");
        if (j > 0 && starts[j] <= starts[j - 1]) throw ConfigError("rollout starts must be strictly ascending");
    }
    const auto M = static_cast<Eigen::Index>(starts.size());
    const Eigen::Index zh = static_cast<Eigen::Index>(hp.n) * hp.n_z;
    const Eigen::Index uh = static_cast<Eigen::Index>(hp.n) * hp.n_u;

    Mat<T> frames(hp.n_y, hp.n * M);
    for (Eigen::Index j = 0; j < M; ++j)
        frames.middleCols(j * hp.n, hp.n) = data.y.middleCols(starts[j] - hp.n, hp.n);
    const Mat<T> z = model.enc_net.forward_batch(frames);
    Mat<T> hist(zh, M);
    for (Eigen::Index j = 0; j < M; ++j) hist.col(j) = Eigen::Map<const Vec<T>>(z.col(j * hp.n).data(), zh);

    Eigen::Index active = M;
    for (int k = 0; k <= horizon; ++k) {
        while (active > 0 && starts[active - 1] + k >= n_samples) --active;
        if (active == 0) break;
        Mat<T> in(zh + uh, active);
        in.topRows(zh) = hist.leftCols(active);
        for (Eigen::Index j = 0; j < active; ++j)
            in.col(j).tail(uh) = Eigen::Map<const Vec<T>>(data.u.col(starts[j] + k - hp.n).data(), uh);
        const Mat<T> zn = model.narx_net.forward_batch(in);
        if (!zn.allFinite())
            throw DivergenceError("non-finite latent at t = " + std::to_string(starts[0] + k),
                                  static_cast<long>(starts[0] + k));
        visit(k, model.dec_net.forward_batch(zn));
        if (k == horizon) break;
        if (hp.n > 1) {
            Mat<T> shifted = hist.block(hp.n_z, 0, zh - hp.n_z, active);
            hist.topLeftCorner(zh - hp.n_z, active) = shifted;
        }
        hist.block(zh - hp.n_z, 0, hp.n_z, active) = zn;
    }
}

template <class T>
Mat<T> baseline_simulate_normalized(const IoAutoencoderModel<T>& model, const SeriesData<T>& data,
                                    std::size_t t_start) {
    if (t_start < static_cast<std::size_t>(model.hyper.n)) throw IndexError("simulation start must be at least n");
    if (t_start >= data.n_samples()) throw IndexError("simulation start past the end of the data");
    const int horizon = static_cast<int>(data.n_samples() - 1 - t_start);
    Mat<T> out(model.hyper.n_y, horizon + 1);
    const std::size_t start = t_start;
    rollout_from_starts<T>(model, data, std::span<const std::size_t>(&start, 1), horizon,
                           [&](int k, const Mat<T>& p) { out.col(k) = p.col(0); });
    return out;
}

template <class T>
Mat<double> baseline_simulate(const IoAutoencoderModel<T>& model, const Dataset& data, std::size_t t_start) {
    const SeriesData<T> series = normalize<T>(data, model.norm);
    return denormalize_frames<T>(baseline_simulate_normalized(model, series, t_start), model.norm);
}

template <class T>
NStepPredictions baseline_nstep(const IoAutoencoderModel<T>& model, const Dataset& data, int n_steps) {
    if (n_steps < 1) throw ConfigError("baseline_nstep: n_steps must be at least 1");
    const std::size_t first = static_cast<std::size_t>(model.hyper.n);
    if (data.n_samples < first + static_cast<std::size_t>(n_steps))
        throw ConfigError("baseline_nstep: dataset too short for " + std::to_string(n_steps) + " steps");
    const SeriesData<T> series = normalize<T>(data, model.norm);
    std::vector<std::size_t> starts;
    for (std::size_t t = first; t + n_steps <= data.n_samples; ++t) starts.push_back(t);
    NStepPredictions out;
    for (std::size_t t : starts) out.targets.push_back(t + n_steps - 1);
    rollout_from_starts<T>(model, series, starts, n_steps - 1, [&](int k, const Mat<T>& p) {
        if (k == n_steps - 1) out.frames = denormalize_frames<T>(p, model.norm);
    });
    return out;
}

template <class T>
void save_checkpoint(const IoAutoencoderModel<T>& model, const std::filesystem::path& path,
                     const CheckpointMeta& meta) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    binio::Writer w(os);
    detail::write_envelope<T>(w, "IOCK");
    const auto& hp = model.hyper;
    for (int v : {hp.n_z, hp.n, hp.n_u, hp.n_y}) w.put<std::int32_t>(v);
    detail::write_hidden(w, hp.hidden, hp.init);
    detail::write_norm(w, model.norm);
    detail::write_meta(w, meta);
    w.put<std::uint32_t>(3);
    detail::write_net(w, "enc", model.enc_net);
    detail::write_net(w, "dec", model.dec_net);
    detail::write_net(w, "narx", model.narx_net);
    w.check(path.string());
}

template <class T>
IoAutoencoderModel<T> load_baseline_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path.string());
    binio::Reader r(is, path.string());
    const int bytes = detail::read_envelope(r, "IOCK");
    IoAutoencoderHyper hp;
    for (int* v : {&hp.n_z, &hp.n, &hp.n_u, &hp.n_y}) *v = r.get<std::int32_t>();
    detail::read_hidden(r, hp.hidden, hp.init);
    try {
        hp.validate();
    } catch (const ConfigError& e) {
        throw FormatError(path.string() + ": invalid hyperparameters: " + e.what());
    }
    if (hp.n_y > (1 << 24) || hp.n_z > (1 << 16) || hp.n > 4096)
        throw FormatError(path.string() + ": implausible hyperparameters");
    NormStats norm = detail::read_norm(r);
    const CheckpointMeta m = detail::read_meta(r);
    if (norm.n_u() != hp.n_u || norm.n_y() != hp.n_y)
        throw FormatError(path.string() + ": normalization block does not match hyperparameters");
    IoAutoencoderModel<T> model(hp, std::move(norm));
    if (r.get<std::uint32_t>() != 3) throw FormatError(path.string() + ": expected three networks");
    detail::read_net(r, "enc", model.enc_net, bytes);
    detail::read_net(r, "dec", model.dec_net, bytes);
    detail::read_net(r, "narx", model.narx_net, bytes);
    detail::expect_end(is, path.string());
    if (meta) *meta = m;
    return model;
}

#define SSENC_INSTANTIATE_BASELINE(T)                                                                           \
    template struct IoAutoencoderModel<T>;                                                                      \
    template BaselineWindow<T> slice_baseline_window<T>(const SeriesData<T>&, int, std::size_t);               \
    template std::vector<BaselineWindow<T>> slice_baseline_windows<T>(const SeriesData<T>&, int,               \
                                                                      std::span<const std::size_t>);            \
    template std::pair<Vec<T>, Vec<T>> autoencode<T>(const IoAutoencoderModel<T>&, std::span<const T>);        \
    template Vec<T> narx_predict<T>(const IoAutoencoderModel<T>&, std::span<const T>, std::span<const T>);     \
    template double baseline_loss<T>(const IoAutoencoderModel<T>&, std::span<const BaselineWindow<T>>,         \
                                     const BaselineWeights&);                                                   \
    template BaselineLossGrad<T> baseline_loss_grad<T>(const IoAutoencoderModel<T>&,                           \
                                                       std::span<const BaselineWindow<T>>,                      \
                                                       const BaselineWeights&);                                 \
    template void rollout_from_starts<T>(const IoAutoencoderModel<T>&, const SeriesData<T>&,                   \
                                         std::span<const std::size_t>, int,                                     \
                                         const std::function<void(int, const Mat<T>&)>&);                       \
    template Mat<T> baseline_simulate_normalized<T>(const IoAutoencoderModel<T>&, const SeriesData<T>&,        \
                                                    std::size_t);                                               \
    template Mat<double> baseline_simulate<T>(const IoAutoencoderModel<T>&, const Dataset&, std::size_t);      \
    template NStepPredictions baseline_nstep<T>(const IoAutoencoderModel<T>&, const Dataset&, int);            \
    template void save_checkpoint<T>(const IoAutoencoderModel<T>&, const std::filesystem::path&,               \
                                     const CheckpointMeta&);                                                    \
    template IoAutoencoderModel<T> load_baseline_checkpoint<T>(const std::filesystem::path&, CheckpointMeta*);

SSENC_INSTANTIATE_BASELINE(float)
SSENC_INSTANTIATE_BASELINE(double)

} // namespace ssenc
