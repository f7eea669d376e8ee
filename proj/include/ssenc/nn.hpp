#pragma once

// Dense two-hidden-layer tanh networks with a linear bypass, their
// vector-Jacobian products, and the Adam optimizer.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace ssenc::nn {

template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

struct LayerShape {
    int n_in = 1;
    int n_out = 1;
};

enum class TensorKind : std::uint8_t { Weight, Bias, Bypass };

struct TensorSlot {
    int layer = 0;  // index into Mlp::shapes(); the bypass uses layer = -1
    TensorKind kind = TensorKind::Weight;
    Eigen::Index offset = 0;
    Eigen::Index rows = 0;
    Eigen::Index cols = 1;

    Eigen::Index size() const { return rows * cols; }
    std::string name() const;
};

/// How the half-width of the uniform initialization is derived from the fan-in.
enum class InitScheme : std::uint8_t {
    RootFanIn,  // U(-sqrt(k), sqrt(k)), k = 1/sqrt(n_in)
    FanIn,      // U(-sqrt(k), sqrt(k)), k = 1/n_in
};

double init_bound(int n_in, InitScheme scheme);

/// Flat storage of every learnable scalar of one network plus the map from
/// named tensors to their (disjoint, covering) ranges in `values`.
template <class T>
struct ParamVector {
    Vec<T> values;
    std::vector<TensorSlot> layout;

    Eigen::Index size() const { return values.size(); }

    Eigen::Map<Mat<T>> tensor(std::size_t slot) {
        const auto& s = layout.at(slot);
        return {values.data() + s.offset, s.rows, s.cols};
    }
    Eigen::Map<const Mat<T>> tensor(std::size_t slot) const {
        const auto& s = layout.at(slot);
        return {values.data() + s.offset, s.rows, s.cols};
    }

    ParamVector zeros_like() const { return {Vec<T>::Zero(values.size()), layout}; }
};

// Build the layout for an input -> hidden... -> output stack with bypass.
std::vector<TensorSlot> make_layout(const std::vector<LayerShape>& shapes, Eigen::Index* total = nullptr);

/// Draws every entry of a fresh parameter vector for `shapes` from
/// U(-sqrt(k), sqrt(k)) with k taken from the fan-in of the tensor's layer
/// (the bypass uses the network input width). Deterministic in `seed`.
template <class T>
ParamVector<T> init_params(const std::vector<LayerShape>& shapes, std::uint64_t seed,
                           InitScheme scheme = InitScheme::RootFanIn);

/// Activations kept from a batched forward pass for the backward pass.
template <class T>
struct MlpTape {
    std::vector<Mat<T>> hidden;  // tanh outputs, one matrix per hidden layer
};

/// out(x) = W_L tanh(... tanh(W_1 x + b_1) ...) + b_L + B x
///
/// Batched calls take one sample per column.
template <class T>
class Mlp {
public:
    Mlp() = default;
    Mlp(int n_in, int n_out, std::vector<int> hidden = {64, 64});

    int n_in() const { return shapes_.front().n_in; }
    int n_out() const { return shapes_.back().n_out; }
    const std::vector<LayerShape>& shapes() const { return shapes_; }
    std::vector<int> hidden_widths() const;
    std::size_t n_layers() const { return shapes_.size(); }

    ParamVector<T>& params() { return params_; }
    const ParamVector<T>& params() const { return params_; }
    Eigen::Index n_params() const { return params_.size(); }

    void init(std::uint64_t seed, InitScheme scheme = InitScheme::RootFanIn);

    Eigen::Map<Mat<T>> weight(std::size_t layer) { return params_.tensor(2 * layer); }
    Eigen::Map<const Mat<T>> weight(std::size_t layer) const { return params_.tensor(2 * layer); }
    Eigen::Map<Mat<T>> bias(std::size_t layer) { return params_.tensor(2 * layer + 1); }
    Eigen::Map<const Mat<T>> bias(std::size_t layer) const { return params_.tensor(2 * layer + 1); }
    Eigen::Map<Mat<T>> bypass() { return params_.tensor(2 * shapes_.size()); }
    Eigen::Map<const Mat<T>> bypass() const { return params_.tensor(2 * shapes_.size()); }

    Vec<T> forward(const Eigen::Ref<const Vec<T>>& x) const;
    Mat<T> forward_batch(const Eigen::Ref<const Mat<T>>& x, MlpTape<T>* tape = nullptr) const;

    /// Reverse pass for a batch recorded in `tape`. Parameter cotangents are
    /// accumulated (+=) into `grad`; returns d(out)/d(x)^T * cotangent unless
    /// `want_input_grad` is false, in which case an empty matrix is returned.
    Mat<T> backward_batch(const Eigen::Ref<const Mat<T>>& x, const MlpTape<T>& tape,
                          const Eigen::Ref<const Mat<T>>& cotangent, Eigen::Ref<Vec<T>> grad,
                          bool want_input_grad = true) const;

    /// Single-sample vector-Jacobian product: (grad wrt params, grad wrt x).
    std::pair<ParamVector<T>, Vec<T>> vjp(const Eigen::Ref<const Vec<T>>& x,
                                          const Eigen::Ref<const Vec<T>>& cotangent) const;

    template <class U>
    Mlp<U> cast() const {
        Mlp<U> out(n_in(), n_out(), hidden_widths());
        out.params().values = params_.values.template cast<U>();
        return out;
    }

private:
    std::vector<LayerShape> shapes_;
    ParamVector<T> params_;
};

template <class T>
struct AdamState {
    Vec<T> m;
    Vec<T> v;
    long step_count = 0;
    double alpha = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    explicit AdamState(Eigen::Index n, double learning_rate = 1e-3)
        : m(Vec<T>::Zero(n)), v(Vec<T>::Zero(n)), alpha(learning_rate) {}
};

/// One bias-corrected Adam update. Throws DivergenceError (and leaves params
/// and state untouched) if any gradient entry is not finite.
template <class T>
void adam_step(Eigen::Ref<Vec<T>> params, const Eigen::Ref<const Vec<T>>& grad, AdamState<T>& state);

extern template struct ParamVector<float>;
extern template struct ParamVector<double>;
extern template class Mlp<float>;
extern template class Mlp<double>;

} // namespace ssenc::nn
