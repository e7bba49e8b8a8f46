#pragma once

// Learned one-step forward model composed into h-step rollouts, trained
// with the multi-step squared-error objective (gradients flow through the
// autoregressive composition). The network predicts observation deltas.

#include <functional>
#include <stdexcept>
#include <vector>

#include "goalreach/common.hpp"
#include "goalreach/dataset.hpp"
#include "goalreach/mlp.hpp"

namespace goalreach {

struct DynamicsConfig {
    double learning_rate = 3e-4;
    size_t batch_size = 64;
    size_t train_steps = 20000;
    int h_train = 5;
    size_t hidden_units = 64;
    size_t hidden_layers = 3;
    double train_frac = 0.9;
    double test_frac = 0.05;
};

struct ForwardModel {
    Mlp net;  // concat(obs, action) -> delta obs
    AdamState opt;
    size_t obs_dim = 0;
    size_t action_dim = 0;
    int h_train = 5;
};

inline ForwardModel make_forward_model(size_t obs_dim, size_t action_dim,
                                       const DynamicsConfig& cfg, Rng& rng) {
    if (cfg.h_train < 1) throw std::invalid_argument("dynamics: h_train must be >= 1");
    std::vector<size_t> sizes{obs_dim + action_dim};
    for (size_t l = 0; l < cfg.hidden_layers; ++l) sizes.push_back(cfg.hidden_units);
    sizes.push_back(obs_dim);
    ForwardModel m;
    m.net = make_mlp(sizes, OutputActivation::identity, rng);
    m.opt = make_adam(m.net, cfg.learning_rate);
    m.obs_dim = obs_dim;
    m.action_dim = action_dim;
    m.h_train = cfg.h_train;
    return m;
}

// Autoregressive h-step prediction: s_{k+1} = s_k + net(s_k, a_k).
inline std::vector<Obs> rollout(const ForwardModel& m, const Obs& obs,
                                const std::vector<Vec>& actions) {
    if (actions.empty()) throw std::invalid_argument("rollout: need at least one action");
    if (obs.size() != m.obs_dim) throw std::invalid_argument("rollout: obs dim mismatch");
    std::vector<Obs> preds;
    preds.reserve(actions.size());
    Obs cur = obs;
    Vec x(m.obs_dim + m.action_dim);
    for (const Vec& a : actions) {
        if (a.size() != m.action_dim) throw std::invalid_argument("rollout: action dim mismatch");
        std::copy(cur.begin(), cur.end(), x.begin());
        std::copy(a.begin(), a.end(), x.begin() + m.obs_dim);
        const Vec delta = forward(m.net, x);
        for (size_t d = 0; d < m.obs_dim; ++d) cur[d] += delta[d];
        preds.push_back(cur);
    }
    return preds;
}

namespace detail {

// Multi-step loss over a batch of windows with backpropagation through
// time. `actions[k]` / `targets[k]` hold step k for every window. Returns
// (1 / (B h)) * sum of squared errors; accumulates gradients if asked.
inline double rollout_loss(const Mlp& net, const Matrix& obs0, const std::vector<Matrix>& actions,
                           const std::vector<Matrix>& targets, MlpGrads* grads) {
    const size_t B = obs0.rows;
    const size_t h = actions.size();
    const size_t obs_dim = obs0.cols;
    if (targets.size() != h) throw std::invalid_argument("rollout_loss: actions/targets mismatch");

    std::vector<MlpWorkspace> ws(h);
    std::vector<Matrix> preds(h + 1);
    preds[0] = obs0;
    for (size_t k = 0; k < h; ++k) {
        const Matrix& delta = forward_batch(net, hcat(preds[k], actions[k]), ws[k]);
        preds[k + 1] = preds[k];
        for (size_t i = 0; i < delta.data.size(); ++i) preds[k + 1].data[i] += delta.data[i];
    }

    const double norm = 1.0 / static_cast<double>(B * h);
    double loss = 0.0;
    for (size_t k = 0; k < h; ++k)
        for (size_t i = 0; i < preds[k + 1].data.size(); ++i) {
            const double err = preds[k + 1].data[i] - targets[k].data[i];
            loss += err * err;
        }
    loss *= norm;

    if (grads != nullptr) {
        Matrix g(B, obs_dim);
        for (size_t k = h; k-- > 0;) {
            // Direct loss term at prediction k+1.
            for (size_t i = 0; i < g.data.size(); ++i)
                g.data[i] += 2.0 * norm * (preds[k + 1].data[i] - targets[k].data[i]);
            Matrix dx;
            backward_batch(net, ws[k], Matrix(g), *grads, &dx);
            if (k > 0) {
                // Identity carry plus the network's input sensitivity.
                for (size_t r = 0; r < B; ++r)
                    axpy(obs_dim, 1.0, dx.row(r), g.row(r));
            }
        }
    }
    return loss;
}

}  // namespace detail

inline double dynamics_train_step(ForwardModel& m, const OfflineDataset& ds,
                                  const std::vector<size_t>& train_traj, size_t batch_size,
                                  int h_train, Rng& rng) {
    if (train_traj.empty()) throw std::invalid_argument("dynamics_train_step: no training trajectories");
    const size_t h = static_cast<size_t>(h_train);
    Matrix obs0(batch_size, m.obs_dim);
    std::vector<Matrix> actions(h, Matrix(batch_size, m.action_dim));
    std::vector<Matrix> targets(h, Matrix(batch_size, m.obs_dim));
    for (size_t b = 0; b < batch_size; ++b) {
        const Trajectory& traj = ds.trajectories[train_traj[rng.uniform_index(train_traj.size())]];
        if (traj.length() < h)
            throw std::invalid_argument("dynamics_train_step: trajectory shorter than h_train");
        const size_t t = rng.uniform_index(traj.length() - h + 1);
        obs0.set_row(b, traj.observations[t]);
        for (size_t k = 0; k < h; ++k) {
            actions[k].set_row(b, traj.actions[t + k]);
            targets[k].set_row(b, traj.observations[t + k + 1]);
        }
    }
    MlpGrads grads = make_grads(m.net);
    const double loss = detail::rollout_loss(m.net, obs0, actions, targets, &grads);
    adam_step(m.opt, m.net, grads);
    return loss;
}

using DynProgressFn = std::function<void(size_t step, double loss)>;

inline ForwardModel train_dynamics(const OfflineDataset& ds, const DynamicsConfig& cfg,
                                   uint64_t seed, const DynProgressFn& progress = nullptr) {
    Rng rng(seed);
    ForwardModel m = make_forward_model(ds.obs_dim(), ds.action_dim(), cfg, rng);
    const DatasetSplit split = split_dataset(ds.trajectories.size(), cfg.train_frac, cfg.test_frac);
    const auto& train = split.train.empty() ? split.test : split.train;
    for (size_t step = 0; step < cfg.train_steps; ++step) {
        const double loss = dynamics_train_step(m, ds, train, cfg.batch_size, cfg.h_train, rng);
        if (progress && (step % 1000 == 0 || step + 1 == cfg.train_steps)) progress(step, loss);
    }
    return m;
}

// Held-out mean squared prediction error per lookahead step 1..h_eval
// (averaged over windows and dimensions).
inline Vec evaluate(const ForwardModel& m, const OfflineDataset& ds, int h_eval,
                    double train_frac = 0.9, double test_frac = 0.05) {
    const DatasetSplit split = split_dataset(ds.trajectories.size(), train_frac, test_frac);
    const auto& held_out = split.test.empty() ? split.train : split.test;
    const size_t h = static_cast<size_t>(h_eval);
    Vec err(h, 0.0);
    size_t windows = 0;
    for (size_t idx : held_out) {
        const Trajectory& traj = ds.trajectories[idx];
        if (traj.length() < h) continue;
        for (size_t t = 0; t + h <= traj.length(); ++t) {
            std::vector<Vec> acts(traj.actions.begin() + t, traj.actions.begin() + t + h);
            const std::vector<Obs> preds = rollout(m, traj.observations[t], acts);
            for (size_t k = 0; k < h; ++k)
                err[k] += squared_l2(preds[k], traj.observations[t + k + 1]);
            ++windows;
        }
    }
    if (windows == 0) throw std::runtime_error("evaluate: no held-out windows");
    for (double& e : err) e /= static_cast<double>(windows * m.obs_dim);
    return err;
}

}  // namespace goalreach
