#pragma once

// Comparison methods sharing the library's infrastructure: goal-conditioned
// behavior cloning, temporal distance regression, the observation-space L2
// planning cost, and the Q-only random-shooting policy.

#include <functional>
#include <stdexcept>
#include <vector>

#include "goalreach/common.hpp"
#include "goalreach/dataset.hpp"
#include "goalreach/distance.hpp"
#include "goalreach/dynamics.hpp"
#include "goalreach/mlp.hpp"
#include "goalreach/planner.hpp"

namespace goalreach {

// ---- Goal-conditioned behavior cloning ----

struct GcbcConfig {
    double learning_rate = 3e-4;
    size_t batch_size = 32;
    size_t train_steps = 3125000;
    size_t hidden_units = 64;
    size_t hidden_layers = 3;
};

struct GcbcPolicy {
    Mlp net;  // concat(obs, goal) -> action, tanh output
    AdamState opt;
    size_t obs_dim = 0;
    size_t action_dim = 0;
};

inline GcbcPolicy make_gcbc(size_t obs_dim, size_t action_dim, const GcbcConfig& cfg, Rng& rng) {
    std::vector<size_t> sizes{obs_dim + obs_dim};
    for (size_t l = 0; l < cfg.hidden_layers; ++l) sizes.push_back(cfg.hidden_units);
    sizes.push_back(action_dim);
    GcbcPolicy p;
    p.net = make_mlp(sizes, OutputActivation::tanh_out, rng);
    p.opt = make_adam(p.net, cfg.learning_rate);
    p.obs_dim = obs_dim;
    p.action_dim = action_dim;
    return p;
}

// Uniform (t_i, t_g) pair with t_g strictly after t_i.
inline std::pair<size_t, size_t> sample_gcbc_pair(size_t traj_len, Rng& rng) {
    const size_t ti = rng.uniform_index(traj_len);
    const size_t tg = ti + 1 + rng.uniform_index(traj_len - ti);
    return {ti, tg};
}

inline double gcbc_train_step(GcbcPolicy& p, const OfflineDataset& ds, size_t batch_size, Rng& rng) {
    Matrix x(batch_size, 2 * p.obs_dim);
    Matrix y(batch_size, p.action_dim);
    for (size_t b = 0; b < batch_size; ++b) {
        const Trajectory& traj = ds.trajectories[rng.uniform_index(ds.trajectories.size())];
        if (traj.length() < 1) throw std::invalid_argument("gcbc: trajectory too short");
        const auto [ti, tg] = sample_gcbc_pair(traj.length(), rng);
        double* row = x.row(b);
        std::copy(traj.observations[ti].begin(), traj.observations[ti].end(), row);
        std::copy(traj.observations[tg].begin(), traj.observations[tg].end(), row + p.obs_dim);
        y.set_row(b, traj.actions[ti]);
    }
    MlpWorkspace ws;
    const Matrix& pred = forward_batch(p.net, x, ws);
    double loss = 0.0;
    Matrix d(batch_size, p.action_dim);
    const double norm = 1.0 / static_cast<double>(batch_size);
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const double err = pred.data[i] - y.data[i];
        loss += err * err;
        d.data[i] = 2.0 * err * norm;
    }
    loss *= norm;
    MlpGrads grads = make_grads(p.net);
    backward_batch(p.net, ws, std::move(d), grads);
    adam_step(p.opt, p.net, grads);
    return loss;
}

inline GcbcPolicy gcbc_train(const OfflineDataset& ds, const GcbcConfig& cfg, uint64_t seed,
                             const DynProgressFn& progress = nullptr) {
    Rng rng(seed);
    GcbcPolicy p = make_gcbc(ds.obs_dim(), ds.action_dim(), cfg, rng);
    for (size_t step = 0; step < cfg.train_steps; ++step) {
        const double loss = gcbc_train_step(p, ds, cfg.batch_size, rng);
        if (progress && (step % 1000 == 0 || step + 1 == cfg.train_steps)) progress(step, loss);
    }
    return p;
}

inline Vec gcbc_action(const GcbcPolicy& p, const Obs& obs, const Obs& goal) {
    Vec x;
    x.reserve(obs.size() + goal.size());
    x.insert(x.end(), obs.begin(), obs.end());
    x.insert(x.end(), goal.begin(), goal.end());
    return forward(p.net, x);
}

// ---- Temporal distance regression ----

struct TemporalConfig {
    int maxdist = 10;
    double learning_rate = 3e-4;
    size_t batch_size = 32;
    size_t train_steps = 3125000;
    size_t hidden_units = 64;
    size_t hidden_layers = 3;
};

struct TemporalRegressor {
    Mlp net;  // concat(obs, goal) -> predicted step count
    AdamState opt;
    int maxdist = 10;
    size_t obs_dim = 0;
};

inline int temporal_label(size_t t_i, size_t t_g, int maxdist) {
    if (t_g <= t_i) throw std::invalid_argument("temporal_label: need t_g > t_i");
    if (maxdist < 1) throw std::invalid_argument("temporal_label: maxdist must be >= 1");
    return std::min(static_cast<int>(t_g - t_i), maxdist);
}

inline TemporalRegressor make_temporal(size_t obs_dim, const TemporalConfig& cfg, Rng& rng) {
    std::vector<size_t> sizes{obs_dim + obs_dim};
    for (size_t l = 0; l < cfg.hidden_layers; ++l) sizes.push_back(cfg.hidden_units);
    sizes.push_back(1);
    TemporalRegressor t;
    t.net = make_mlp(sizes, OutputActivation::identity, rng);
    t.opt = make_adam(t.net, cfg.learning_rate);
    t.maxdist = cfg.maxdist;
    t.obs_dim = obs_dim;
    return t;
}

inline double temporal_train_step(TemporalRegressor& t, const OfflineDataset& ds, size_t batch_size,
                                  Rng& rng) {
    Matrix x(batch_size, 2 * t.obs_dim);
    Vec y(batch_size);
    for (size_t b = 0; b < batch_size; ++b) {
        const Trajectory& traj = ds.trajectories[rng.uniform_index(ds.trajectories.size())];
        const auto [ti, tg] = sample_gcbc_pair(traj.length(), rng);
        double* row = x.row(b);
        std::copy(traj.observations[ti].begin(), traj.observations[ti].end(), row);
        std::copy(traj.observations[tg].begin(), traj.observations[tg].end(), row + t.obs_dim);
        y[b] = static_cast<double>(temporal_label(ti, tg, t.maxdist));
    }
    MlpWorkspace ws;
    const Matrix& pred = forward_batch(t.net, x, ws);
    double loss = 0.0;
    Matrix d(batch_size, 1);
    const double norm = 1.0 / static_cast<double>(batch_size);
    for (size_t i = 0; i < batch_size; ++i) {
        const double err = pred.at(i, 0) - y[i];
        loss += err * err;
        d.at(i, 0) = 2.0 * err * norm;
    }
    loss *= norm;
    MlpGrads grads = make_grads(t.net);
    backward_batch(t.net, ws, std::move(d), grads);
    adam_step(t.opt, t.net, grads);
    return loss;
}

inline TemporalRegressor temporal_train(const OfflineDataset& ds, const TemporalConfig& cfg,
                                        uint64_t seed, const DynProgressFn& progress = nullptr) {
    Rng rng(seed);
    TemporalRegressor t = make_temporal(ds.obs_dim(), cfg, rng);
    for (size_t step = 0; step < cfg.train_steps; ++step) {
        const double loss = temporal_train_step(t, ds, cfg.batch_size, rng);
        if (progress && (step % 1000 == 0 || step + 1 == cfg.train_steps)) progress(step, loss);
    }
    return t;
}

inline double temporal_distance(const TemporalRegressor& t, const Obs& obs, const Obs& goal) {
    Vec x;
    x.reserve(obs.size() + goal.size());
    x.insert(x.end(), obs.begin(), obs.end());
    x.insert(x.end(), goal.begin(), goal.end());
    return forward(t.net, x)[0];
}

// ---- Observation-space L2 cost ----

inline double l2_cost(const Obs& predicted, const Obs& goal) { return squared_l2(predicted, goal); }

// ---- Q-only random shooting policy ----

// Argmax of the conservative Q over uniform random actions; ties keep the
// first (lowest-index) sample.
inline Vec q_shooting_action(const QEnsemble& e, const Obs& obs, const Obs& goal, size_t n_actions,
                             Rng& rng) {
    if (n_actions == 0) throw std::invalid_argument("q_shooting_action: n_actions must be >= 1");
    Vec best;
    double best_q = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < n_actions; ++i) {
        Vec a(e.action_dim);
        for (double& x : a) x = rng.uniform(-1.0, 1.0);
        const double q = q_value(e, obs, a, goal);
        if (q > best_q) {
            best_q = q;
            best = std::move(a);
        }
    }
    return best;
}

// ---- Planning-problem adapters for baseline costs ----

inline PlanningProblem make_l2_problem(const ForwardModel& model) {
    PlanningProblem p;
    p.action_dim = model.action_dim;
    p.step = make_model_step(model);
    p.cost = [](const Obs& obs, const Obs& goal) { return l2_cost(obs, goal); };
    return p;
}

inline PlanningProblem make_temporal_problem(const ForwardModel& model,
                                             const TemporalRegressor& reg) {
    PlanningProblem p = make_l2_problem(model);
    p.cost = [&reg](const Obs& obs, const Obs& goal) { return temporal_distance(reg, obs, goal); };
    return p;
}

}  // namespace goalreach
