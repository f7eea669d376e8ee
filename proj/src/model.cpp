#include "ssenc/model.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "checkpoint_io.hpp"
#include "ssenc/error.hpp"
#include "ssenc/rng.hpp"

namespace ssenc {

using nn::Mat;
using nn::Vec;

void SsEncoderHyper::validate() const {
    if (n_x < 1) throw ConfigError("n_x must be at least 1");
    if (n_a < 1 || n_b < 1) throw ConfigError("n_a and n_b must be at least 1");
    if (T < 0) throw ConfigError("T must be non-negative");
    if (k0 < 0) throw ConfigError("k0 must be non-negative");
    if (n_u < 1 || n_y < 1) throw ConfigError("n_u and n_y must be at least 1");
    for (int h : hidden)
        if (h < 1) throw ConfigError("hidden widths must be positive");
}

template <class T>
SsEncoderModel<T>::SsEncoderModel(const SsEncoderHyper& h, NormStats n)
    : hyper(h),
      norm(std::move(n)),
      e_net(h.encoder_inputs(), h.n_x, h.hidden),
      f_net(h.n_x + h.n_u, h.n_x, h.hidden),
      h_net(h.n_x, h.n_y, h.hidden) {
    hyper.validate();
    if (norm.n_u() != hyper.n_u || norm.n_y() != hyper.n_y)
        throw DimensionError("normalization statistics do not match model widths");
}

template <class T>
void SsEncoderModel<T>::init(std::uint64_t seed) {
    e_net.init(substream_seed(seed, 1), hyper.init);
    f_net.init(substream_seed(seed, 2), hyper.init);
    h_net.init(substream_seed(seed, 3), hyper.init);
}

namespace {

template <class T>
void check_window(const SsEncoderHyper& hp, const SectionWindow<T>& w) {
    const auto ny = static_cast<std::size_t>(hp.n_y);
    const auto nu = static_cast<std::size_t>(hp.n_u);
    if (w.history_y.size() != hp.n_a * ny || w.history_u.size() != hp.n_b * nu ||
        w.future_u.size() != static_cast<std::size_t>(hp.T + hp.k0) * nu ||
        w.targets.size() != static_cast<std::size_t>(hp.T + 1) * ny)
        throw DimensionError("section window does not match model hyperparameters");
}

template <class T>
Mat<T> encoder_inputs(const SsEncoderHyper& hp, std::span<const SectionWindow<T>> ws) {
    const Eigen::Index ny_hist = static_cast<Eigen::Index>(hp.n_a) * hp.n_y;
    const Eigen::Index nu_hist = static_cast<Eigen::Index>(hp.n_b) * hp.n_u;
    Mat<T> in(ny_hist + nu_hist, static_cast<Eigen::Index>(ws.size()));
    for (std::size_t b = 0; b < ws.size(); ++b) {
        const auto col = static_cast<Eigen::Index>(b);
        in.col(col).head(ny_hist) = Eigen::Map<const Vec<T>>(ws[b].history_y.data(), ny_hist);
        in.col(col).tail(nu_hist) = Eigen::Map<const Vec<T>>(ws[b].history_u.data(), nu_hist);
    }
    return in;
}

// Forward rollout of a batch of windows. When `grad` is non-null the reverse
// pass runs too and accumulates into it. When `preds` is non-null it receives
// the predicted frames for every k in [k0, T + k0].
template <class T>
double run_batch(const SsEncoderModel<T>& m, std::span<const SectionWindow<T>> ws, ModelGrad<T>* grad,
                 std::vector<Mat<T>>* preds, std::vector<double>* per_window = nullptr) {
    const SsEncoderHyper& hp = m.hyper;
    if (ws.empty()) throw ConfigError("section loss needs at least one window");
    for (const auto& w : ws) check_window(hp, w);
    const auto B = static_cast<Eigen::Index>(ws.size());
    const int K = hp.T + hp.k0;
    const bool want_grad = grad != nullptr;

    const Mat<T> enc_in = encoder_inputs(hp, ws);
    nn::MlpTape<T> e_tape;
    Mat<T> x = m.e_net.forward_batch(enc_in, want_grad ? &e_tape : nullptr);
    if (!x.allFinite()) throw DivergenceError("non-finite encoder state", 0);

    std::vector<Mat<T>> f_in(want_grad ? K : 0);
    std::vector<nn::MlpTape<T>> f_tapes(want_grad ? K : 0);
    std::vector<Mat<T>> h_adjoint(want_grad ? K + 1 : 0);
    std::vector<double> sq(ws.size(), 0.0);
    const T scale = static_cast<T>(1.0 / (static_cast<double>(B) * (hp.T + 1)));

    for (int k = 0; k <= K; ++k) {
        if (k >= hp.k0) {
            nn::MlpTape<T> h_tape;
            Mat<T> r = m.h_net.forward_batch(x, want_grad ? &h_tape : nullptr);
            if (preds) preds->push_back(r);
            const auto off = static_cast<std::size_t>(k - hp.k0) * hp.n_y;
            for (Eigen::Index b = 0; b < B; ++b) {
                r.col(b) -= Eigen::Map<const Vec<T>>(ws[b].targets.data() + off, hp.n_y);
                sq[b] += static_cast<double>(r.col(b).squaredNorm());
            }
            if (want_grad) {
                r *= scale;
                h_adjoint[k] = m.h_net.backward_batch(x, h_tape, r, grad->h, true);
            }
        }
        if (k < K) {
            Mat<T> in(hp.n_x + hp.n_u, B);
            in.topRows(hp.n_x) = x;
            const auto off = static_cast<std::size_t>(k) * hp.n_u;
            for (Eigen::Index b = 0; b < B; ++b)
                in.col(b).tail(hp.n_u) = Eigen::Map<const Vec<T>>(ws[b].future_u.data() + off, hp.n_u);
            x = m.f_net.forward_batch(in, want_grad ? &f_tapes[k] : nullptr);
            if (!x.allFinite())
                throw DivergenceError("non-finite state at rollout step " + std::to_string(k + 1), k + 1);
            if (want_grad) f_in[k] = std::move(in);
        }
    }

    if (want_grad) {
        Mat<T> lambda = h_adjoint[K];
        for (int k = K - 1; k >= 0; --k) {
            Mat<T> g_in = m.f_net.backward_batch(f_in[k], f_tapes[k], lambda, grad->f, true);
            lambda = g_in.topRows(hp.n_x);
            if (k >= hp.k0) lambda += h_adjoint[k];
        }
        m.e_net.backward_batch(enc_in, e_tape, lambda, grad->e, false);
    }

    double total = 0.0;
    for (double s : sq) total += s;
    if (per_window) *per_window = sq;
    const double loss = total / (2.0 * static_cast<double>(B) * (hp.T + 1));
    if (!std::isfinite(loss)) throw DivergenceError("non-finite section loss");
    return loss;
}

} // namespace

template <class T>
Vec<T> encode_state(const SsEncoderModel<T>& model, std::span<const T> history_y, std::span<const T> history_u) {
    const auto& hp = model.hyper;
    if (history_y.size() != static_cast<std::size_t>(hp.n_a) * hp.n_y)
        throw DimensionError("output history must hold n_a frames");
    if (history_u.size() != static_cast<std::size_t>(hp.n_b) * hp.n_u)
        throw DimensionError("input history must hold n_b inputs");
    Vec<T> in(hp.encoder_inputs());
    std::copy(history_y.begin(), history_y.end(), in.data());
    std::copy(history_u.begin(), history_u.end(), in.data() + history_y.size());
    return model.e_net.forward(in);
}

template <class T>
Mat<T> rollout_section(const SsEncoderModel<T>& model, const SectionWindow<T>& window) {
    std::vector<Mat<T>> preds;
    run_batch<T>(model, std::span<const SectionWindow<T>>(&window, 1), nullptr, &preds);
    Mat<T> out(model.hyper.n_y, static_cast<Eigen::Index>(preds.size()));
    for (std::size_t k = 0; k < preds.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = preds[k].col(0);
    return out;
}

template <class T>
double section_loss(const SsEncoderModel<T>& model, std::span<const SectionWindow<T>> windows) {
    return run_batch<T>(model, windows, nullptr, nullptr);
}

template <class T>
LossGrad<T> section_loss_grad(const SsEncoderModel<T>& model, std::span<const SectionWindow<T>> windows) {
    LossGrad<T> out;
    out.grad.e = Vec<T>::Zero(model.e_net.n_params());
    out.grad.f = Vec<T>::Zero(model.f_net.n_params());
    out.grad.h = Vec<T>::Zero(model.h_net.n_params());
    out.loss = run_batch<T>(model, windows, &out.grad, nullptr);
    return out;
}

template <class T>
void rollout_from_starts(const SsEncoderModel<T>& model, const SeriesData<T>& data,
                         std::span<const std::size_t> starts, int horizon,
                         const std::function<void(int, const Mat<T>&)>& visit) {
    const auto& hp = model.hyper;
    if (data.n_y() != hp.n_y || data.n_u() != hp.n_u)
        throw DimensionError("dataset widths do not match model (n_y " + std::to_string(data.n_y()) + " vs " +
                             std::to_string(hp.n_y) + ", n_u " + std::to_string(data.n_u()) + " vs " +
                             std::to_string(hp.n_u) + ")");
    if (starts.empty()) return;
    const std::size_t n = data.n_samples();
    const auto hist = static_cast<std::size_t>(std::max(hp.n_a, hp.n_b));
    for (std::size_t j = 0; j < starts.size(); ++j) {
        if (starts[j] < hist || starts[j] >= n)
            throw IndexError("rollout start " + std::to_string(starts[j]) + " outside [" + std::to_string(hist) +
                             ", " + std::to_string(n - 1) + "]");
        if (j > 0 && starts[j] <= starts[j - 1]) throw ConfigError("rollout starts must be strictly ascending");
    }
    const Eigen::Index ny_hist = static_cast<Eigen::Index>(hp.n_a) * hp.n_y;
    const Eigen::Index nu_hist = static_cast<Eigen::Index>(hp.n_b) * hp.n_u;
    const auto M = static_cast<Eigen::Index>(starts.size());

    Mat<T> enc_in(ny_hist + nu_hist, M);
    for (Eigen::Index j = 0; j < M; ++j) {
        const std::size_t t = starts[j];
        enc_in.col(j).head(ny_hist) = Eigen::Map<const Vec<T>>(data.y.col(t - hp.n_a).data(), ny_hist);
        enc_in.col(j).tail(nu_hist) = Eigen::Map<const Vec<T>>(data.u.col(t - hp.n_b).data(), nu_hist);
    }
    Mat<T> x = model.e_net.forward_batch(enc_in);
    if (!x.allFinite()) throw DivergenceError("non-finite encoder state at t = " + std::to_string(starts[0]), 0);

    Eigen::Index active = M;
    for (int k = 0; k <= horizon; ++k) {
        while (active > 0 && starts[active - 1] + k >= n) --active;
        if (active == 0) break;
        if (active < x.cols()) x.conservativeResize(Eigen::NoChange, active);
        visit(k, model.h_net.forward_batch(x));
        if (k == horizon) break;
        // Only columns whose next target exists are advanced.
        Eigen::Index next = active;
        while (next > 0 && starts[next - 1] + k + 1 >= n) --next;
        if (next == 0) break;
        Mat<T> in(hp.n_x + hp.n_u, next);
        in.topRows(hp.n_x) = x.leftCols(next);
        for (Eigen::Index j = 0; j < next; ++j) in.col(j).tail(hp.n_u) = data.u.col(starts[j] + k);
        x = model.f_net.forward_batch(in);
        if (!x.allFinite()) {
            std::ostringstream msg;
            msg << "non-finite state at t = " << starts[0] + k + 1 << " (" << k + 1 << " steps after encoder)";
            throw DivergenceError(msg.str(), static_cast<long>(starts[0] + k + 1));
        }
        active = next;
    }
}

template <class T>
Mat<T> simulate_normalized(const SsEncoderModel<T>& model, const SeriesData<T>& data, std::size_t t_start) {
    const auto hist = static_cast<std::size_t>(std::max(model.hyper.n_a, model.hyper.n_b));
    if (t_start < hist) throw IndexError("simulation start must be at least max(n_a, n_b)");
    if (t_start >= data.n_samples()) throw IndexError("simulation start past the end of the data");
    const int horizon = static_cast<int>(data.n_samples() - 1 - t_start);
    Mat<T> out(model.hyper.n_y, horizon + 1);
    const std::size_t start = t_start;
    rollout_from_starts<T>(model, data, std::span<const std::size_t>(&start, 1), horizon,
                           [&](int k, const Mat<T>& p) { out.col(k) = p.col(0); });
    return out;
}

template <class T>
Mat<double> simulate(const SsEncoderModel<T>& model, const Dataset& data, std::size_t t_start) {
    const SeriesData<T> series = normalize<T>(data, model.norm);
    return denormalize_frames<T>(simulate_normalized(model, series, t_start), model.norm);
}

CheckpointInfo peek_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path.string());
    binio::Reader r(is, path.string());
    CheckpointInfo info;
    info.magic.resize(4);
    is.read(info.magic.data(), 4);
    if (!is || (info.magic != "SSCK" && info.magic != "IOCK"))
        throw FormatError(path.string() + ": not an SSCK or IOCK checkpoint");
    const auto version = r.get<std::uint32_t>();
    if (version != detail::kCheckpointVersion)
        throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
    info.scalar_bytes = static_cast<int>(r.get<std::uint32_t>());
    if (info.scalar_bytes != 4 && info.scalar_bytes != 8) throw FormatError(path.string() + ": bad scalar width");
    return info;
}

template <class T>
void save_checkpoint(const SsEncoderModel<T>& model, const std::filesystem::path& path, const CheckpointMeta& meta) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    binio::Writer w(os);
    detail::write_envelope<T>(w, "SSCK");
    const auto& hp = model.hyper;
    for (int v : {hp.n_x, hp.n_a, hp.n_b, hp.T, hp.k0, hp.n_u, hp.n_y}) w.put<std::int32_t>(v);
    detail::write_hidden(w, hp.hidden, hp.init);
    detail::write_norm(w, model.norm);
    detail::write_meta(w, meta);
    w.put<std::uint32_t>(3);
    detail::write_net(w, "e", model.e_net);
    detail::write_net(w, "f", model.f_net);
    detail::write_net(w, "h", model.h_net);
    w.check(path.string());
}

template <class T>
SsEncoderModel<T> load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path.string());
    binio::Reader r(is, path.string());
    const int bytes = detail::read_envelope(r, "SSCK");
    SsEncoderHyper hp;
    for (int* v : {&hp.n_x, &hp.n_a, &hp.n_b, &hp.T, &hp.k0, &hp.n_u, &hp.n_y}) *v = r.get<std::int32_t>();
    detail::read_hidden(r, hp.hidden, hp.init);
    try {
        hp.validate();
    } catch (const ConfigError& e) {
        throw FormatError(path.string() + ": invalid hyperparameters: " + e.what());
    }
    if (hp.n_y > (1 << 24) || hp.n_x > (1 << 16) || hp.n_a > 4096 || hp.n_b > 4096)
        throw FormatError(path.string() + ": implausible hyperparameters");
    NormStats norm = detail::read_norm(r);
    const CheckpointMeta m = detail::read_meta(r);
    if (norm.n_u() != hp.n_u || norm.n_y() != hp.n_y)
        throw FormatError(path.string() + ": normalization block does not match hyperparameters");
    SsEncoderModel<T> model(hp, std::move(norm));
    if (r.get<std::uint32_t>() != 3) throw FormatError(path.string() + ": expected three networks");
    detail::read_net(r, "e", model.e_net, bytes);
    detail::read_net(r, "f", model.f_net, bytes);
    detail::read_net(r, "h", model.h_net, bytes);
    detail::expect_end(is, path.string());
    if (meta) *meta = m;
    return model;
}

#define SSENC_INSTANTIATE_MODEL(T)                                                                              \
    template struct SsEncoderModel<T>;                                                                          \
    template Vec<T> encode_state<T>(const SsEncoderModel<T>&, std::span<const T>, std::span<const T>);          \
    template Mat<T> rollout_section<T>(const SsEncoderModel<T>&, const SectionWindow<T>&);                      \
    template double section_loss<T>(const SsEncoderModel<T>&, std::span<const SectionWindow<T>>);              \
    template LossGrad<T> section_loss_grad<T>(const SsEncoderModel<T>&, std::span<const SectionWindow<T>>);    \
    template void rollout_from_starts<T>(const SsEncoderModel<T>&, const SeriesData<T>&,                       \
                                         std::span<const std::size_t>, int,                                     \
                                         const std::function<void(int, const Mat<T>&)>&);                       \
    template Mat<T> simulate_normalized<T>(const SsEncoderModel<T>&, const SeriesData<T>&, std::size_t);       \
    template Mat<double> simulate<T>(const SsEncoderModel<T>&, const Dataset&, std::size_t);                   \
    template void save_checkpoint<T>(const SsEncoderModel<T>&, const std::filesystem::path&,                   \
                                     const CheckpointMeta&);                                                    \
    template SsEncoderModel<T> load_checkpoint<T>(const std::filesystem::path&, CheckpointMeta*);

SSENC_INSTANTIATE_MODEL(float)
SSENC_INSTANTIATE_MODEL(double)

} // namespace ssenc
