#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lessvfl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { Identity, Tanh, ReLU };

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Tanh: return "tanh";
        case Activation::ReLU: return "relu";
    }
    return "?";
}

struct Layer {
    Matrix weights;  // rows = outputs, cols = inputs
    Vector bias;
    Activation activation = Activation::Identity;
};

/// Dense feed-forward network. The last layer is always affine (Identity).
struct DenseNetwork {
    std::vector<Layer> layers;

    int input_dim() const { return static_cast<int>(layers.front().weights.cols()); }
    int output_dim() const { return static_cast<int>(layers.back().weights.rows()); }

    void validate() const {
        if (layers.empty()) throw std::invalid_argument("network has no layers");
        for (size_t i = 0; i < layers.size(); ++i) {
            const Layer& l = layers[i];
            if (l.bias.size() != l.weights.rows())
                throw std::invalid_argument("layer " + std::to_string(i) + ": bias/weight row mismatch");
            if (i > 0 && l.weights.cols() != layers[i - 1].weights.rows())
                throw std::invalid_argument("layer " + std::to_string(i) + ": input dim does not match previous layer");
            if (!l.weights.allFinite() || !l.bias.allFinite())
                throw std::domain_error("layer " + std::to_string(i) + ": non-finite parameter");
        }
        if (layers.back().activation != Activation::Identity)
            throw std::invalid_argument("final layer must have identity activation");
    }
};

/// Glorot-style uniform init in [-a, a], a = sqrt(6 / (fan_in + fan_out)).
inline DenseNetwork make_network(int input_dim, const std::vector<int>& hidden_dims,
                                 int output_dim, Activation hidden_activation,
                                 std::mt19937_64& rng) {
    if (input_dim <= 0 || output_dim <= 0)
        throw std::invalid_argument("make_network: dims must be positive");
    DenseNetwork net;
    int in = input_dim;
    auto add_layer = [&](int out, Activation act) {
        const double a = std::sqrt(6.0 / (in + out));
        std::uniform_real_distribution<double> u(-a, a);
        Layer l;
        l.weights = Matrix::NullaryExpr(out, in, [&]() { return u(rng); });
        l.bias = Vector::Zero(out);
        l.activation = act;
        net.layers.push_back(std::move(l));
        in = out;
    };
    for (int h : hidden_dims) add_layer(h, hidden_activation);
    add_layer(output_dim, Activation::Identity);
    return net;
}

struct ForwardTrace {
    Matrix input;                         // batch x input_dim
    std::vector<Matrix> pre_activations;  // per layer, batch x layer_out
    std::vector<Matrix> activations;      // per layer, batch x layer_out
};

namespace detail {

inline Matrix apply_activation(Activation act, const Matrix& z) {
    switch (act) {
        case Activation::Identity: return z;
        case Activation::Tanh: return z.array().tanh();
        case Activation::ReLU: return z.cwiseMax(0.0);
    }
    throw std::logic_error("unknown activation");
}

inline Matrix activation_derivative(Activation act, const Matrix& z) {
    switch (act) {
        case Activation::Identity: return Matrix::Ones(z.rows(), z.cols());
        case Activation::Tanh: {
            Matrix t = z.array().tanh();
            return 1.0 - t.array().square();
        }
        case Activation::ReLU:
            return (z.array() > 0.0).cast<double>();
    }
    throw std::logic_error("unknown activation");
}

}  // namespace detail

/// Batch rows are samples; layer output = X W^T + b.
inline Matrix forward(const DenseNetwork& net, const Matrix& batch, ForwardTrace* trace = nullptr) {
    if (batch.cols() != net.input_dim())
        throw std::invalid_argument("forward: batch has " + std::to_string(batch.cols()) +
                                    " columns, network expects " + std::to_string(net.input_dim()));
    if (!batch.allFinite())
        throw std::domain_error("forward: non-finite input");
    if (trace) {
        trace->input = batch;
        trace->pre_activations.clear();
        trace->activations.clear();
    }
    Matrix a = batch;
    for (const Layer& l : net.layers) {
        Matrix z = (a * l.weights.transpose()).rowwise() + l.bias.transpose();
        a = detail::apply_activation(l.activation, z);
        if (trace) {
            trace->pre_activations.push_back(std::move(z));
            trace->activations.push_back(a);
        }
    }
    return a;
}

struct GradientSet {
    std::vector<Matrix> weight_grads;
    std::vector<Vector> bias_grads;
    Matrix input_grad;  // batch x input_dim

    bool all_finite() const {
        for (const auto& w : weight_grads)
            if (!w.allFinite()) return false;
        for (const auto& b : bias_grads)
            if (!b.allFinite()) return false;
        return input_grad.allFinite();
    }

    bool shapes_mirror(const DenseNetwork& net) const {
        if (weight_grads.size() != net.layers.size() || bias_grads.size() != net.layers.size())
            return false;
        for (size_t i = 0; i < net.layers.size(); ++i) {
            if (weight_grads[i].rows() != net.layers[i].weights.rows() ||
                weight_grads[i].cols() != net.layers[i].weights.cols() ||
                bias_grads[i].size() != net.layers[i].bias.size())
                return false;
        }
        return input_grad.cols() == net.input_dim();
    }
};

/// Exact gradients of <output, output_grad> summed over the batch.
/// input_grad lets a party chain the server's embedding gradient through its own net.
inline GradientSet backward(const DenseNetwork& net, const ForwardTrace& trace, const Matrix& output_grad) {
    const size_t n_layers = net.layers.size();
    if (trace.activations.size() != n_layers || trace.pre_activations.size() != n_layers)
        throw std::invalid_argument("backward: trace does not match network layer count");
    if (output_grad.rows() != trace.input.rows() || output_grad.cols() != net.output_dim())
        throw std::invalid_argument("backward: output_grad shape mismatch");

    GradientSet grads;
    grads.weight_grads.resize(n_layers);
    grads.bias_grads.resize(n_layers);

    Matrix delta = output_grad;  // last layer is identity
    for (size_t li = n_layers; li-- > 0;) {
        const Layer& l = net.layers[li];
        if (l.activation != Activation::Identity)
            delta = delta.cwiseProduct(detail::activation_derivative(l.activation, trace.pre_activations[li]));
        const Matrix& below = (li == 0) ? trace.input : trace.activations[li - 1];
        grads.weight_grads[li] = delta.transpose() * below;
        grads.bias_grads[li] = delta.colwise().sum().transpose();
        delta = delta * l.weights;  // becomes dL/d(activation below)
    }
    grads.input_grad = std::move(delta);
    return grads;
}

/// Central-difference oracle: d(loss)/d(parameter) for every parameter and input entry.
/// Test-side verification for backward(); step h is scaled by parameter magnitude.
inline GradientSet finite_diff_grad(DenseNetwork net, Matrix batch,
                                    const std::function<double(const Matrix&)>& scalar_loss,
                                    double h = 1e-6) {
    if (h <= 0.0) throw std::invalid_argument("finite_diff_grad: h must be positive");
    GradientSet grads;
    auto probe = [&](double& p) {
        const double saved = p;
        const double step = h * std::max(1.0, std::abs(saved));
        p = saved + step;
        const double up = scalar_loss(forward(net, batch));
        p = saved - step;
        const double down = scalar_loss(forward(net, batch));
        p = saved;
        return (up - down) / (2.0 * step);
    };
    for (Layer& l : net.layers) {
        Matrix wg(l.weights.rows(), l.weights.cols());
        for (Eigen::Index i = 0; i < l.weights.size(); ++i) wg.data()[i] = probe(l.weights.data()[i]);
        Vector bg(l.bias.size());
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) bg(i) = probe(l.bias.data()[i]);
        grads.weight_grads.push_back(std::move(wg));
        grads.bias_grads.push_back(std::move(bg));
    }
    grads.input_grad.resize(batch.rows(), batch.cols());
    for (Eigen::Index i = 0; i < batch.size(); ++i) grads.input_grad.data()[i] = probe(batch.data()[i]);
    return grads;
}

enum class LossKind { SquaredError, SoftmaxCrossEntropy };

/// SquaredError: (1/N) sum (f - y)^2, gradient 2(f - y)/N.
/// SoftmaxCrossEntropy: labels are class indices in column 0; loss is the batch mean.
inline std::pair<double, Matrix> loss_and_grad(LossKind kind, const Matrix& outputs, const Matrix& labels) {
    const auto n = outputs.rows();
    if (labels.rows() != n)
        throw std::invalid_argument("loss_and_grad: label/output row mismatch");
    if (n == 0) return {0.0, Matrix::Zero(0, outputs.cols())};
    switch (kind) {
        case LossKind::SquaredError: {
            if (labels.cols() != outputs.cols())
                throw std::invalid_argument("loss_and_grad: label/output column mismatch");
            Matrix diff = outputs - labels;
            const double loss = diff.squaredNorm() / static_cast<double>(n);
            return {loss, (2.0 / static_cast<double>(n)) * diff};
        }
        case LossKind::SoftmaxCrossEntropy: {
            const auto c = outputs.cols();
            Matrix grad(n, c);
            double loss = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto label = static_cast<Eigen::Index>(labels(i, 0));
                if (label < 0 || label >= c)
                    throw std::domain_error("loss_and_grad: class index " + std::to_string(label) +
                                            " out of range for " + std::to_string(c) + " outputs");
                Eigen::RowVectorXd row = outputs.row(i);
                const double m = row.maxCoeff();
                Eigen::RowVectorXd e = (row.array() - m).exp();
                const double z = e.sum();
                loss += -(row(label) - m - std::log(z));
                grad.row(i) = e / z;
                grad(i, label) -= 1.0;
            }
            return {loss / static_cast<double>(n), grad / static_cast<double>(n)};
        }
    }
    throw std::logic_error("unknown loss kind");
}

enum class OptimizerKind { Sgd, Adam };

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::Sgd;
    long step_count = 0;
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    // first/second moments, shaped like the network (Adam only)
    std::vector<Matrix> m_w, v_w;
    std::vector<Vector> m_b, v_b;
};

inline OptimizerState make_optimizer(OptimizerKind kind, const DenseNetwork& net, double learning_rate) {
    if (learning_rate < 0.0) throw std::invalid_argument("make_optimizer: learning rate must be non-negative");
    OptimizerState s;
    s.kind = kind;
    s.learning_rate = learning_rate;
    if (kind == OptimizerKind::Adam) {
        for (const Layer& l : net.layers) {
            s.m_w.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
            s.v_w.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
            s.m_b.push_back(Vector::Zero(l.bias.size()));
            s.v_b.push_back(Vector::Zero(l.bias.size()));
        }
    }
    return s;
}

inline void optimizer_step(OptimizerState& state, DenseNetwork& net, const GradientSet& grads) {
    if (!grads.shapes_mirror(net))
        throw std::invalid_argument("optimizer_step: gradient shapes do not mirror the network");
    if (!grads.all_finite())
        throw std::runtime_error("optimizer_step: non-finite gradient, update rejected");
    state.step_count += 1;
    if (state.kind == OptimizerKind::Sgd) {
        for (size_t i = 0; i < net.layers.size(); ++i) {
            net.layers[i].weights -= state.learning_rate * grads.weight_grads[i];
            net.layers[i].bias -= state.learning_rate * grads.bias_grads[i];
        }
        return;
    }
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    auto adam = [&](auto& m, auto& v, auto& param, const auto& g) {
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v.array() + (1.0 - state.beta2) * g.array().square();
        param.array() -= state.learning_rate * (m.array() / bc1) /
                         ((v.array() / bc2).sqrt() + state.epsilon);
    };
    for (size_t i = 0; i < net.layers.size(); ++i) {
        adam(state.m_w[i], state.v_w[i], net.layers[i].weights, grads.weight_grads[i]);
        adam(state.m_b[i], state.v_b[i], net.layers[i].bias, grads.bias_grads[i]);
    }
}

/// Plain gradient step, bypassing any Adam state. The gradient half of P-SGD.
inline void sgd_step(DenseNetwork& net, const GradientSet& grads, double step_size) {
    if (!grads.shapes_mirror(net))
        throw std::invalid_argument("sgd_step: gradient shapes do not mirror the network");
    if (!grads.all_finite())
        throw std::runtime_error("sgd_step: non-finite gradient, update rejected");
    for (size_t i = 0; i < net.layers.size(); ++i) {
        net.layers[i].weights -= step_size * grads.weight_grads[i];
        net.layers[i].bias -= step_size * grads.bias_grads[i];
    }
}

}  // namespace lessvfl
