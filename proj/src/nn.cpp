#include "ssenc/nn.hpp"

#include <cmath>
#include <sstream>

#include "ssenc/error.hpp"
#include "ssenc/rng.hpp"

namespace ssenc::nn {

std::string TensorSlot::name() const {
    switch (kind) {
    case TensorKind::Weight:
        return "layer" + std::to_string(layer) + ".weight";
    case TensorKind::Bias:
        return "layer" + std::to_string(layer) + ".bias";
    case TensorKind::Bypass:
        return "bypass.weight";
    }
    return "?";
}

double init_bound(int n_in, InitScheme scheme) {
    const double k = scheme == InitScheme::RootFanIn ? 1.0 / std::sqrt(static_cast<double>(n_in))
                                                     : 1.0 / static_cast<double>(n_in);
    return std::sqrt(k);
}

std::vector<TensorSlot> make_layout(const std::vector<LayerShape>& shapes, Eigen::Index* total) {
    if (shapes.empty()) throw DimensionError("network needs at least one layer");
    for (std::size_t l = 0; l < shapes.size(); ++l) {
        if (shapes[l].n_in < 1 || shapes[l].n_out < 1)
            throw DimensionError("layer " + std::to_string(l) + " has a non-positive width");
        if (l > 0 && shapes[l].n_in != shapes[l - 1].n_out)
            throw DimensionError("layer " + std::to_string(l) + " input width does not match previous output");
    }
    std::vector<TensorSlot> layout;
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l < shapes.size(); ++l) {
        const int layer = static_cast<int>(l);
        layout.push_back({layer, TensorKind::Weight, offset, shapes[l].n_out, shapes[l].n_in});
        offset += layout.back().size();
        layout.push_back({layer, TensorKind::Bias, offset, shapes[l].n_out, 1});
        offset += layout.back().size();
    }
    layout.push_back({-1, TensorKind::Bypass, offset, shapes.back().n_out, shapes.front().n_in});
    offset += layout.back().size();
    if (total) *total = offset;
    return layout;
}

template <class T>
ParamVector<T> init_params(const std::vector<LayerShape>& shapes, std::uint64_t seed, InitScheme scheme) {
    Eigen::Index total = 0;
    ParamVector<T> p;
    p.layout = make_layout(shapes, &total);
    p.values.resize(total);
    Rng rng(seed);
    for (const auto& slot : p.layout) {
        const int fan_in = slot.kind == TensorKind::Bypass ? shapes.front().n_in : shapes[slot.layer].n_in;
        const double bound = init_bound(fan_in, scheme);
        for (Eigen::Index i = 0; i < slot.size(); ++i)
            p.values[slot.offset + i] = static_cast<T>(rng.uniform(-bound, bound));
    }
    return p;
}

template <class T>
Mlp<T>::Mlp(int n_in, int n_out, std::vector<int> hidden) {
    int prev = n_in;
    for (int w : hidden) {
        shapes_.push_back({prev, w});
        prev = w;
    }
    shapes_.push_back({prev, n_out});
    Eigen::Index total = 0;
    params_.layout = make_layout(shapes_, &total);
    params_.values = Vec<T>::Zero(total);
}

template <class T>
std::vector<int> Mlp<T>::hidden_widths() const {
    std::vector<int> widths;
    for (std::size_t l = 0; l + 1 < shapes_.size(); ++l) widths.push_back(shapes_[l].n_out);
    return widths;
}

template <class T>
void Mlp<T>::init(std::uint64_t seed, InitScheme scheme) {
    params_ = init_params<T>(shapes_, seed, scheme);
}

template <class T>
Vec<T> Mlp<T>::forward(const Eigen::Ref<const Vec<T>>& x) const {
    if (x.size() != n_in())
        throw DimensionError("mlp input width " + std::to_string(x.size()) + ", expected " + std::to_string(n_in()));
    return forward_batch(x);
}

template <class T>
Mat<T> Mlp<T>::forward_batch(const Eigen::Ref<const Mat<T>>& x, MlpTape<T>* tape) const {
    if (x.rows() != n_in())
        throw DimensionError("mlp input width " + std::to_string(x.rows()) + ", expected " + std::to_string(n_in()));
    const std::size_t n_hidden = shapes_.size() - 1;
    MlpTape<T> local;
    MlpTape<T>& t = tape ? *tape : local;
    t.hidden.resize(n_hidden);
    for (std::size_t l = 0; l < n_hidden; ++l) {
        Mat<T>& a = t.hidden[l];
        if (l == 0)
            a.noalias() = weight(l) * x;
        else
            a.noalias() = weight(l) * t.hidden[l - 1];
        a.colwise() += bias(l).col(0);
        a = a.array().tanh();
    }
    Mat<T> out;
    if (n_hidden == 0)
        out.noalias() = weight(0) * x;
    else
        out.noalias() = weight(n_hidden) * t.hidden.back();
    out.colwise() += bias(n_hidden).col(0);
    out.noalias() += bypass() * x;
    return out;
}

template <class T>
Mat<T> Mlp<T>::backward_batch(const Eigen::Ref<const Mat<T>>& x, const MlpTape<T>& tape,
                              const Eigen::Ref<const Mat<T>>& cotangent, Eigen::Ref<Vec<T>> grad,
                              bool want_input_grad) const {
    if (cotangent.rows() != n_out() || cotangent.cols() != x.cols())
        throw DimensionError("mlp cotangent shape does not match output");
    if (grad.size() != params_.size()) throw DimensionError("gradient buffer has the wrong length");
    const std::size_t n_hidden = shapes_.size() - 1;

    auto gslot = [&](std::size_t slot) {
        const auto& s = params_.layout[slot];
        return Eigen::Map<Mat<T>>(grad.data() + s.offset, s.rows, s.cols);
    };

    Mat<T> gx;
    if (want_input_grad) gx.noalias() = bypass().transpose() * cotangent;
    gslot(2 * n_hidden + 2).noalias() += cotangent * x.transpose();

    Mat<T> delta = cotangent;
    for (std::size_t l = n_hidden + 1; l-- > 0;) {
        const bool first = l == 0;
        if (first)
            gslot(2 * l).noalias() += delta * x.transpose();
        else
            gslot(2 * l).noalias() += delta * tape.hidden[l - 1].transpose();
        gslot(2 * l + 1).col(0) += delta.rowwise().sum();
        if (first) {
            if (want_input_grad) gx.noalias() += weight(0).transpose() * delta;
            break;
        }
        Mat<T> back = weight(l).transpose() * delta;
        const auto a = tape.hidden[l - 1].array();
        delta = back.array() * (T(1) - a * a);
    }
    return gx;
}

template <class T>
std::pair<ParamVector<T>, Vec<T>> Mlp<T>::vjp(const Eigen::Ref<const Vec<T>>& x,
                                              const Eigen::Ref<const Vec<T>>& cotangent) const {
    if (x.size() != n_in()) throw DimensionError("mlp input width mismatch in vjp");
    if (cotangent.size() != n_out()) throw DimensionError("mlp cotangent width mismatch in vjp");
    MlpTape<T> tape;
    forward_batch(x, &tape);
    ParamVector<T> g = params_.zeros_like();
    Mat<T> gx = backward_batch(x, tape, cotangent, g.values, true);
    return {std::move(g), Vec<T>(gx.col(0))};
}

template <class T>
void adam_step(Eigen::Ref<Vec<T>> params, const Eigen::Ref<const Vec<T>>& grad, AdamState<T>& state) {
    if (params.size() != grad.size() || state.m.size() != params.size() || state.v.size() != params.size())
        throw DimensionError("adam: parameter, gradient and moment lengths differ");
    if (!grad.allFinite()) {
        Eigen::Index bad = 0;
        while (bad < grad.size() && std::isfinite(static_cast<double>(grad[bad]))) ++bad;
        std::ostringstream msg;
        msg << "non-finite gradient entry at index " << bad << " (value " << grad[bad] << ") in adam step "
            << state.step_count + 1;
        throw DivergenceError(msg.str(), state.step_count + 1);
    }
    ++state.step_count;
    const T b1 = static_cast<T>(state.beta1);
    const T b2 = static_cast<T>(state.beta2);
    state.m = b1 * state.m + (T(1) - b1) * grad;
    state.v = b2 * state.v + (T(1) - b2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    const T lr = static_cast<T>(state.alpha / c1);
    const T inv_c2 = static_cast<T>(1.0 / c2);
    const T eps = static_cast<T>(state.eps);
    params.array() -= lr * state.m.array() / ((state.v.array() * inv_c2).sqrt() + eps);
}

template struct ParamVector<float>;
template struct ParamVector<double>;
template class Mlp<float>;
template class Mlp<double>;
template ParamVector<float> init_params<float>(const std::vector<LayerShape>&, std::uint64_t, InitScheme);
template ParamVector<double> init_params<double>(const std::vector<LayerShape>&, std::uint64_t, InitScheme);
template void adam_step<float>(Eigen::Ref<Vec<float>>, const Eigen::Ref<const Vec<float>>&, AdamState<float>&);
template void adam_step<double>(Eigen::Ref<Vec<double>>, const Eigen::Ref<const Vec<double>>&, AdamState<double>&);

} // namespace ssenc::nn
