#pragma once

// Fully connected networks with rectified-linear hidden units, exact
// reverse-mode gradients, Adam, and Polyak target updates. Double
// precision throughout; all kernels have a fixed summation order so
// repeated runs are bit-identical.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "goalreach/common.hpp"

namespace goalreach {

enum class OutputActivation { identity, tanh_out };

struct Mlp {
    std::vector<size_t> layer_sizes;  // [input, hidden..., output]
    std::vector<Matrix> weights;      // per layer, [out x in]
    std::vector<Vec> biases;          // per layer
    OutputActivation output_activation = OutputActivation::identity;

    size_t num_layers() const { return weights.size(); }
    size_t input_dim() const { return layer_sizes.front(); }
    size_t output_dim() const { return layer_sizes.back(); }
};

// Uniform fan-in initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for
// both weights and biases.
inline Mlp make_mlp(std::vector<size_t> layer_sizes, OutputActivation act, Rng& rng) {
    if (layer_sizes.size() < 2) throw std::invalid_argument("make_mlp: need at least two layer sizes");
    for (size_t s : layer_sizes)
        if (s == 0) throw std::invalid_argument("make_mlp: zero layer size");
    Mlp net;
    net.layer_sizes = std::move(layer_sizes);
    net.output_activation = act;
    for (size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
        const size_t in = net.layer_sizes[l];
        const size_t out = net.layer_sizes[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        Matrix w(out, in);
        for (double& x : w.data) x = rng.uniform(-bound, bound);
        Vec b(out);
        for (double& x : b) x = rng.uniform(-bound, bound);
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    return net;
}

struct MlpGrads {
    std::vector<Matrix> weights;
    std::vector<Vec> biases;

    void zero() {
        for (auto& w : weights) w.zero();
        for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
    }
};

inline MlpGrads make_grads(const Mlp& net) {
    MlpGrads g;
    for (size_t l = 0; l < net.num_layers(); ++l) {
        g.weights.emplace_back(net.weights[l].rows, net.weights[l].cols);
        g.biases.emplace_back(net.biases[l].size(), 0.0);
    }
    return g;
}

// Caches post-activation values per layer; acts[0] is the input batch.
struct MlpWorkspace {
    std::vector<Matrix> acts;
};

inline const Matrix& forward_batch(const Mlp& net, const Matrix& input, MlpWorkspace& ws) {
    if (input.cols != net.input_dim())
        throw std::invalid_argument("forward: input dim " + std::to_string(input.cols) +
                                    " != " + std::to_string(net.input_dim()));
    const size_t L = net.num_layers();
    ws.acts.resize(L + 1);
    ws.acts[0] = input;
    for (size_t l = 0; l < L; ++l) {
        const Matrix& a = ws.acts[l];
        const Matrix& w = net.weights[l];
        const Vec& b = net.biases[l];
        Matrix& z = ws.acts[l + 1];
        z = Matrix(a.rows, w.rows);
        const bool hidden = l + 1 < L;
        for (size_t r = 0; r < a.rows; ++r) {
            const double* arow = a.row(r);
            double* zrow = z.row(r);
            for (size_t n = 0; n < w.rows; ++n)
                zrow[n] = dot(w.cols, arow, w.row(n)) + b[n];
            if (hidden) {
                for (size_t n = 0; n < w.rows; ++n) zrow[n] = zrow[n] > 0.0 ? zrow[n] : 0.0;
            } else if (net.output_activation == OutputActivation::tanh_out) {
                for (size_t n = 0; n < w.rows; ++n) zrow[n] = std::tanh(zrow[n]);
            }
        }
    }
    return ws.acts[L];
}

inline Vec forward(const Mlp& net, const Vec& input) {
    Matrix x(1, input.size());
    x.set_row(0, input);
    MlpWorkspace ws;
    return forward_batch(net, x, ws).get_row(0);
}

// Accumulates parameter gradients into `grads` (callers zero them when a
// fresh gradient is wanted). `upstream` is d(loss)/d(output) and is
// consumed. If `input_grad` is non-null it receives d(loss)/d(input).
inline void backward_batch(const Mlp& net, const MlpWorkspace& ws, Matrix upstream,
                           MlpGrads& grads, Matrix* input_grad = nullptr) {
    const size_t L = net.num_layers();
    if (ws.acts.size() != L + 1) throw std::logic_error("backward: workspace not from forward");
    if (upstream.rows != ws.acts[L].rows || upstream.cols != ws.acts[L].cols)
        throw std::invalid_argument("backward: upstream shape mismatch");

    Matrix g = std::move(upstream);
    Matrix gprev;
    for (size_t l = L; l-- > 0;) {
        const Matrix& out = ws.acts[l + 1];
        // Activation derivative through the post-activation cache.
        if (l + 1 == L) {
            if (net.output_activation == OutputActivation::tanh_out)
                for (size_t i = 0; i < g.data.size(); ++i)
                    g.data[i] *= 1.0 - out.data[i] * out.data[i];
        } else {
            for (size_t i = 0; i < g.data.size(); ++i)
                if (out.data[i] <= 0.0) g.data[i] = 0.0;
        }

        const Matrix& a = ws.acts[l];
        Matrix& dw = grads.weights[l];
        Vec& db = grads.biases[l];
        for (size_t r = 0; r < g.rows; ++r) {
            const double* grow = g.row(r);
            const double* arow = a.row(r);
            for (size_t n = 0; n < g.cols; ++n) {
                if (grow[n] != 0.0) axpy(a.cols, grow[n], arow, dw.row(n));
                db[n] += grow[n];
            }
        }
        const bool need_prev = l > 0 || input_grad != nullptr;
        if (need_prev) {
            gprev = Matrix(g.rows, a.cols);
            const Matrix& w = net.weights[l];
            for (size_t r = 0; r < g.rows; ++r) {
                const double* grow = g.row(r);
                double* prow = gprev.row(r);
                for (size_t n = 0; n < g.cols; ++n)
                    if (grow[n] != 0.0) axpy(w.cols, grow[n], w.row(n), prow);
            }
            g = std::move(gprev);
        }
    }
    if (input_grad != nullptr) *input_grad = std::move(g);
}

struct BackwardResult {
    MlpGrads grads;
    Vec input_grad;
};

inline BackwardResult backward(const Mlp& net, const Vec& input, const Vec& upstream) {
    Matrix x(1, input.size());
    x.set_row(0, input);
    MlpWorkspace ws;
    forward_batch(net, x, ws);
    Matrix up(1, upstream.size());
    up.set_row(0, upstream);
    BackwardResult res;
    res.grads = make_grads(net);
    Matrix dx;
    backward_batch(net, ws, std::move(up), res.grads, &dx);
    res.input_grad = dx.get_row(0);
    return res;
}

struct AdamState {
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step = 0;
    std::vector<Matrix> m_w, v_w;
    std::vector<Vec> m_b, v_b;
};

inline AdamState make_adam(const Mlp& net, double learning_rate = 3e-4) {
    AdamState s;
    s.learning_rate = learning_rate;
    for (size_t l = 0; l < net.num_layers(); ++l) {
        s.m_w.emplace_back(net.weights[l].rows, net.weights[l].cols);
        s.v_w.emplace_back(net.weights[l].rows, net.weights[l].cols);
        s.m_b.emplace_back(net.biases[l].size(), 0.0);
        s.v_b.emplace_back(net.biases[l].size(), 0.0);
    }
    return s;
}

namespace detail {

inline void adam_apply(double* p, double* m, double* v, const double* g, size_t n,
                       const AdamState& s, double bc1, double bc2) {
    for (size_t i = 0; i < n; ++i) {
        if (!std::isfinite(g[i])) throw std::runtime_error("adam_step: non-finite gradient");
        m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
        v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= s.learning_rate * mhat / (std::sqrt(vhat) + s.epsilon);
    }
}

}  // namespace detail

inline void adam_step(AdamState& state, Mlp& params, const MlpGrads& grads) {
    if (state.m_w.size() != params.num_layers() || grads.weights.size() != params.num_layers())
        throw std::invalid_argument("adam_step: shape mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (size_t l = 0; l < params.num_layers(); ++l) {
        detail::adam_apply(params.weights[l].data.data(), state.m_w[l].data.data(),
                           state.v_w[l].data.data(), grads.weights[l].data.data(),
                           params.weights[l].data.size(), state, bc1, bc2);
        detail::adam_apply(params.biases[l].data(), state.m_b[l].data(), state.v_b[l].data(),
                           grads.biases[l].data(), params.biases[l].size(), state, bc1, bc2);
    }
}

// target <- factor * target + (1 - factor) * online
inline void polyak_update(Mlp& target, const Mlp& online, double factor) {
    if (factor < 0.0 || factor > 1.0) throw std::invalid_argument("polyak_update: factor in [0,1]");
    if (target.layer_sizes != online.layer_sizes)
        throw std::invalid_argument("polyak_update: architecture mismatch");
    for (size_t l = 0; l < target.num_layers(); ++l) {
        auto& tw = target.weights[l].data;
        const auto& ow = online.weights[l].data;
        for (size_t i = 0; i < tw.size(); ++i) tw[i] = factor * tw[i] + (1.0 - factor) * ow[i];
        auto& tb = target.biases[l];
        const auto& ob = online.biases[l];
        for (size_t i = 0; i < tb.size(); ++i) tb[i] = factor * tb[i] + (1.0 - factor) * ob[i];
    }
}

}  // namespace goalreach
