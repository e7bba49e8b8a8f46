#pragma once

// Offline goal-conditioned Q-learning of dynamical distances: twin Q
// networks with Polyak targets, a deterministic actor with target-policy
// smoothing, a conservative (CQL) penalty with Lagrangian weight tuning,
// and the closed-form conversion between Q-values and step counts.

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "goalreach/common.hpp"
#include "goalreach/dataset.hpp"
#include "goalreach/mlp.hpp"
#include "goalreach/relabel.hpp"

namespace goalreach {

struct DistanceConfig {
    double gamma = 0.8;
    double r_step = 1.0;
    double r_goal = 10.0;
    double polyak = 0.995;
    double actor_noise_sigma = 0.1;
    double actor_noise_clip = 0.2;
    double cql_tau = 3.0;
    int cql_n_actions = 10;
    double cql_alpha_lr = 1e-3;
    double cql_alpha_init = 1.0;
    double learning_rate = 3e-4;
    size_t batch_size = 64;
    size_t train_steps = 93750;
    double p_geom = 0.3;
    double mix = 0.5;       // fraction of the batch relabeled with reached goals
    size_t knn_k = 16;
    size_t hidden_units = 64;
    size_t hidden_layers = 3;
};

inline void validate(const DistanceConfig& cfg) {
    if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0))
        throw std::invalid_argument("distance: gamma must be in (0, 1)");
    if (!(cfg.r_goal > cfg.r_step / (1.0 - cfg.gamma)))
        throw std::invalid_argument("distance: need r_goal > r_step / (1 - gamma) for Q monotone in distance");
    if (cfg.actor_noise_sigma < 0.0 || cfg.actor_noise_clip < 0.0)
        throw std::invalid_argument("distance: noise parameters must be >= 0");
    if (cfg.cql_n_actions < 1) throw std::invalid_argument("distance: cql_n_actions must be >= 1");
    if (!(cfg.mix >= 0.0 && cfg.mix <= 1.0)) throw std::invalid_argument("distance: mix in [0, 1]");
}

// Q-value of an unreachable goal (infinite remaining distance).
inline double q_lower_limit(const DistanceConfig& cfg) { return cfg.r_step / (1.0 - cfg.gamma); }

// Closed-form Q at integer distance d under the shaped (r_step, r_goal)
// rewards: Q_d = q_inf + (r_goal - q_inf) * gamma^d.
inline double q_from_distance(double d, const DistanceConfig& cfg) {
    const double q_inf = q_lower_limit(cfg);
    return q_inf + (cfg.r_goal - q_inf) * std::pow(cfg.gamma, d);
}

struct DistanceEstimate {
    double steps = 0.0;
    bool clamped = false;  // q fell outside (q_inf, r_goal] and was clamped
};

inline DistanceEstimate distance_from_q(double q, const DistanceConfig& cfg) {
    const double q_inf = q_lower_limit(cfg);
    const double span = cfg.r_goal - q_inf;
    if (q >= cfg.r_goal) return {0.0, q > cfg.r_goal};
    if (q <= q_inf) return {std::numeric_limits<double>::infinity(), true};
    return {std::log((q - q_inf) / span) / std::log(cfg.gamma), false};
}

struct QEnsemble {
    Mlp q1, q2;
    Mlp q1_target, q2_target;
    Mlp actor;
    AdamState q1_opt, q2_opt, actor_opt;
    double cql_alpha = 1.0;
    size_t obs_dim = 0;
    size_t action_dim = 0;
};

inline QEnsemble make_q_ensemble(size_t obs_dim, size_t action_dim, const DistanceConfig& cfg, Rng& rng) {
    validate(cfg);
    auto hidden = [&](size_t in, size_t out) {
        std::vector<size_t> sizes{in};
        for (size_t l = 0; l < cfg.hidden_layers; ++l) sizes.push_back(cfg.hidden_units);
        sizes.push_back(out);
        return sizes;
    };
    QEnsemble e;
    e.obs_dim = obs_dim;
    e.action_dim = action_dim;
    const size_t q_in = obs_dim + action_dim + obs_dim;
    e.q1 = make_mlp(hidden(q_in, 1), OutputActivation::identity, rng);
    e.q2 = make_mlp(hidden(q_in, 1), OutputActivation::identity, rng);
    e.q1_target = e.q1;
    e.q2_target = e.q2;
    e.actor = make_mlp(hidden(obs_dim + obs_dim, action_dim), OutputActivation::tanh_out, rng);
    e.q1_opt = make_adam(e.q1, cfg.learning_rate);
    e.q2_opt = make_adam(e.q2, cfg.learning_rate);
    e.actor_opt = make_adam(e.actor, cfg.learning_rate);
    e.cql_alpha = cfg.cql_alpha_init;
    return e;
}

namespace detail {

inline Vec column0(const Matrix& m) {
    Vec v(m.rows);
    for (size_t r = 0; r < m.rows; ++r) v[r] = m.at(r, 0);
    return v;
}

// Smoothed target-policy actions: clip(actor(s', g) + clip(eps, +-c), +-1).
inline Matrix smoothed_target_actions(const QEnsemble& e, const Matrix& next_obs,
                                      const Matrix& goals, const DistanceConfig& cfg, Rng& rng) {
    MlpWorkspace ws;
    Matrix a = forward_batch(e.actor, hcat(next_obs, goals), ws);
    for (double& x : a.data) {
        const double eps = clip(rng.normal(0.0, cfg.actor_noise_sigma), -cfg.actor_noise_clip,
                                cfg.actor_noise_clip);
        x = clip(x + eps, -1.0, 1.0);
    }
    return a;
}

struct CriticLoss {
    double mse = 0.0;      // mean squared Bellman error
    double cql_r = 0.0;    // mean (logsumexp over random actions - dataset Q)
    double total = 0.0;    // mse + alpha * (cql_r - tau)
};

// Loss and parameter gradient for one critic. `x_data` rows are
// (s, a_data, g); `x_rand` stacks n_actions rows (s, a_rand, g) per batch
// row. Random actions are supplied by the caller so the loss is a
// deterministic function of the parameters (finite-difference testable).
inline CriticLoss critic_loss(const Mlp& q, const Matrix& x_data, const Vec& y,
                              const Matrix& x_rand, size_t n_actions, double alpha, double tau,
                              MlpGrads* grads, bool include_mse = true) {
    const size_t B = x_data.rows;
    if (x_rand.rows != B * n_actions) throw std::invalid_argument("critic_loss: x_rand shape");

    MlpWorkspace ws_data, ws_rand;
    const Vec qd = column0(forward_batch(q, x_data, ws_data));
    const Vec qr = column0(forward_batch(q, x_rand, ws_rand));

    CriticLoss out;
    Matrix d_data(B, 1), d_rand(B * n_actions, 1);
    for (size_t i = 0; i < B; ++i) {
        const double err = qd[i] - y[i];
        out.mse += err * err;
        if (include_mse) d_data.at(i, 0) = 2.0 * err / static_cast<double>(B);

        const double* row = qr.data() + i * n_actions;
        double mx = row[0];
        for (size_t m = 1; m < n_actions; ++m) mx = std::max(mx, row[m]);
        double Z = 0.0;
        for (size_t m = 0; m < n_actions; ++m) Z += std::exp(row[m] - mx);
        out.cql_r += (mx + std::log(Z)) - qd[i];
        for (size_t m = 0; m < n_actions; ++m)
            d_rand.at(i * n_actions + m, 0) =
                alpha * std::exp(row[m] - mx) / Z / static_cast<double>(B);
        d_data.at(i, 0) -= alpha / static_cast<double>(B);
    }
    out.mse /= static_cast<double>(B);
    out.cql_r /= static_cast<double>(B);
    out.total = (include_mse ? out.mse : 0.0) + alpha * (out.cql_r - tau);

    if (grads != nullptr) {
        backward_batch(q, ws_data, std::move(d_data), *grads);
        backward_batch(q, ws_rand, std::move(d_rand), *grads);
    }
    return out;
}

// Actor objective: maximize mean q1(s, actor(s, g), g). Returns the mean
// Q and fills gradients of the *negated* objective (a descent direction).
inline double actor_loss(const Mlp& actor, const Mlp& q1, const Matrix& obs, const Matrix& goals,
                         MlpGrads* grads) {
    const size_t B = obs.rows;
    MlpWorkspace ws_pi, ws_q;
    const Matrix& a = forward_batch(actor, hcat(obs, goals), ws_pi);
    const Matrix& qv = forward_batch(q1, hcat(obs, a, goals), ws_q);
    double mean_q = 0.0;
    for (size_t i = 0; i < B; ++i) mean_q += qv.at(i, 0);
    mean_q /= static_cast<double>(B);

    if (grads != nullptr) {
        Matrix dq(B, 1);
        for (size_t i = 0; i < B; ++i) dq.at(i, 0) = -1.0 / static_cast<double>(B);
        MlpGrads q_scratch = make_grads(q1);
        Matrix dx;
        backward_batch(q1, ws_q, std::move(dq), q_scratch, &dx);
        Matrix da(B, a.cols);
        for (size_t i = 0; i < B; ++i)
            std::copy(dx.row(i) + obs.cols, dx.row(i) + obs.cols + a.cols, da.row(i));
        backward_batch(actor, ws_pi, std::move(da), *grads);
    }
    return mean_q;
}

inline Matrix stack_random_actions(const Matrix& obs, const Matrix& goals, size_t action_dim,
                                   size_t n_actions, Rng& rng) {
    const size_t B = obs.rows;
    Matrix x(B * n_actions, obs.cols + action_dim + goals.cols);
    for (size_t i = 0; i < B; ++i) {
        for (size_t m = 0; m < n_actions; ++m) {
            double* row = x.row(i * n_actions + m);
            std::copy(obs.row(i), obs.row(i) + obs.cols, row);
            for (size_t d = 0; d < action_dim; ++d) row[obs.cols + d] = rng.uniform(-1.0, 1.0);
            std::copy(goals.row(i), goals.row(i) + goals.cols, row + obs.cols + action_dim);
        }
    }
    return x;
}

}  // namespace detail

// Bootstrapped TD targets: r_goal on terminal rows, otherwise
// r_step + gamma * min(q1_target, q2_target)(s', a', g) with a' the
// smoothed target-policy action.
inline Vec td_target(const RelabeledBatch& batch, const QEnsemble& e, const DistanceConfig& cfg,
                     Rng& rng) {
    const Matrix a = detail::smoothed_target_actions(e, batch.next_obs, batch.goals, cfg, rng);
    const Matrix xq = hcat(batch.next_obs, a, batch.goals);
    MlpWorkspace ws1, ws2;
    const Vec t1 = detail::column0(forward_batch(e.q1_target, xq, ws1));
    const Vec t2 = detail::column0(forward_batch(e.q2_target, xq, ws2));
    Vec y(batch.size());
    for (size_t i = 0; i < batch.size(); ++i)
        y[i] = batch.terminal[i] ? batch.reward[i]
                                 : batch.reward[i] + cfg.gamma * std::min(t1[i], t2[i]);
    return y;
}

// Conservative penalty R per critic (sampled logsumexp form), plus one
// dual ascent step on alpha * (mean R - tau) with clamping at zero.
inline std::pair<double, double> cql_penalty(QEnsemble& e, const RelabeledBatch& batch,
                                             const DistanceConfig& cfg, Rng& rng) {
    const Matrix x_rand = detail::stack_random_actions(batch.obs, batch.goals, e.action_dim,
                                                       cfg.cql_n_actions, rng);
    const Matrix x_data = hcat(batch.obs, batch.actions, batch.goals);
    const Vec y(batch.size(), 0.0);  // unused by the penalty itself
    const auto r1 = detail::critic_loss(e.q1, x_data, y, x_rand, cfg.cql_n_actions, 0.0, cfg.cql_tau,
                                        nullptr, false);
    const auto r2 = detail::critic_loss(e.q2, x_data, y, x_rand, cfg.cql_n_actions, 0.0, cfg.cql_tau,
                                        nullptr, false);
    const double mean_r = 0.5 * (r1.cql_r + r2.cql_r);
    e.cql_alpha = std::max(0.0, e.cql_alpha + cfg.cql_alpha_lr * (mean_r - cfg.cql_tau));
    return {r1.cql_r, r2.cql_r};
}

struct DistanceLossReport {
    double q1_mse = 0.0, q2_mse = 0.0;
    double cql_r1 = 0.0, cql_r2 = 0.0;
    double actor_q = 0.0;
    double cql_alpha = 0.0;
};

inline DistanceLossReport train_step(QEnsemble& e, const RelabeledBatch& batch,
                                     const DistanceConfig& cfg, Rng& rng) {
    const size_t B = batch.size();
    if (B == 0) throw std::invalid_argument("train_step: empty batch");

    const Vec y = td_target(batch, e, cfg, rng);
    const Matrix x_rand = detail::stack_random_actions(batch.obs, batch.goals, e.action_dim,
                                                       cfg.cql_n_actions, rng);
    const Matrix x_data = hcat(batch.obs, batch.actions, batch.goals);

    DistanceLossReport rep;
    MlpGrads g1 = make_grads(e.q1);
    const auto l1 = detail::critic_loss(e.q1, x_data, y, x_rand, cfg.cql_n_actions, e.cql_alpha,
                                        cfg.cql_tau, &g1);
    adam_step(e.q1_opt, e.q1, g1);
    MlpGrads g2 = make_grads(e.q2);
    const auto l2 = detail::critic_loss(e.q2, x_data, y, x_rand, cfg.cql_n_actions, e.cql_alpha,
                                        cfg.cql_tau, &g2);
    adam_step(e.q2_opt, e.q2, g2);

    MlpGrads ga = make_grads(e.actor);
    rep.actor_q = detail::actor_loss(e.actor, e.q1, batch.obs, batch.goals, &ga);
    adam_step(e.actor_opt, e.actor, ga);

    polyak_update(e.q1_target, e.q1, cfg.polyak);
    polyak_update(e.q2_target, e.q2, cfg.polyak);

    const double mean_r = 0.5 * (l1.cql_r + l2.cql_r);
    e.cql_alpha = std::max(0.0, e.cql_alpha + cfg.cql_alpha_lr * (mean_r - cfg.cql_tau));

    rep.q1_mse = l1.mse;
    rep.q2_mse = l2.mse;
    rep.cql_r1 = l1.cql_r;
    rep.cql_r2 = l2.cql_r;
    rep.cql_alpha = e.cql_alpha;
    if (!std::isfinite(rep.q1_mse) || !std::isfinite(rep.q2_mse) || !std::isfinite(rep.actor_q))
        throw std::runtime_error("train_step: non-finite loss (q1_mse=" + std::to_string(rep.q1_mse) +
                                 " q2_mse=" + std::to_string(rep.q2_mse) +
                                 " actor_q=" + std::to_string(rep.actor_q) + ")");
    return rep;
}

// Conservative value estimate used for planning and diagnostics.
inline double q_value(const QEnsemble& e, const Obs& obs, const Vec& action, const Obs& goal) {
    Vec x;
    x.reserve(obs.size() + action.size() + goal.size());
    x.insert(x.end(), obs.begin(), obs.end());
    x.insert(x.end(), action.begin(), action.end());
    x.insert(x.end(), goal.begin(), goal.end());
    const double v1 = forward(e.q1, x)[0];
    const double v2 = forward(e.q2, x)[0];
    return std::min(v1, v2);
}

inline Vec greedy_action(const QEnsemble& e, const Obs& obs, const Obs& goal) {
    Vec x;
    x.reserve(obs.size() + goal.size());
    x.insert(x.end(), obs.begin(), obs.end());
    x.insert(x.end(), goal.begin(), goal.end());
    return forward(e.actor, x);
}

// State-level distance estimate: invert the Q-value at the actor's action.
inline DistanceEstimate estimated_distance(const QEnsemble& e, const Obs& obs, const Obs& goal,
                                           const DistanceConfig& cfg) {
    return distance_from_q(q_value(e, obs, greedy_action(e, obs, goal), goal), cfg);
}

using ProgressFn = std::function<void(size_t step, const DistanceLossReport&)>;

inline QEnsemble train_distance(const OfflineDataset& ds, const KnnIndex& index,
                                const DistanceConfig& cfg, uint64_t seed,
                                const ProgressFn& progress = nullptr) {
    validate(cfg);
    Rng rng(seed);
    QEnsemble e = make_q_ensemble(ds.obs_dim(), ds.action_dim(), cfg, rng);
    for (size_t step = 0; step < cfg.train_steps; ++step) {
        const RelabeledBatch batch = make_batch(ds, index, cfg.batch_size, cfg.p_geom, cfg.mix,
                                                cfg.r_step, cfg.r_goal, rng, cfg.knn_k);
        const DistanceLossReport rep = train_step(e, batch, cfg, rng);
        if (progress && (step % 1000 == 0 || step + 1 == cfg.train_steps)) progress(step, rep);
    }
    return e;
}

}  // namespace goalreach
