#pragma once

// Cross-entropy-method planning against a one-step prediction hook and a
// terminal goal cost, plus receding-horizon MPC. The planner is generic:
// the learned model/distance, the L2 baseline cost, and the exact tabular
// oracle all plug in through PlanningProblem.

#include <algorithm>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "goalreach/common.hpp"
#include "goalreach/dataset.hpp"
#include "goalreach/distance.hpp"
#include "goalreach/dynamics.hpp"
#include "goalreach/env.hpp"
#include "goalreach/oracle.hpp"

namespace goalreach {

struct CemConfig {
    int horizon = 13;
    int n_samples = 200;
    int n_iterations = 3;
    double elite_fraction = 0.05;
    int replan_every = 6;
    double filter_beta = 0.5;
    Vec init_stdev;  // per action dimension; the data-collection stdev
    double refit_var_floor = 1e-3;
    bool score_intermediate = false;  // average cost over all predicted states
    bool warm_start = false;          // seed iteration 0 with the shifted previous plan
};

inline void validate(const CemConfig& cfg) {
    if (cfg.horizon < 1) throw std::invalid_argument("cem: horizon must be >= 1");
    if (cfg.replan_every < 1 || cfg.replan_every > cfg.horizon)
        throw std::invalid_argument("cem: need 1 <= replan_every <= horizon");
    if (!(cfg.elite_fraction > 0.0 && cfg.elite_fraction <= 1.0))
        throw std::invalid_argument("cem: elite_fraction in (0, 1]");
    if (cfg.n_samples * cfg.elite_fraction < 1.0)
        throw std::invalid_argument("cem: n_samples * elite_fraction must be >= 1");
    if (cfg.init_stdev.empty()) throw std::invalid_argument("cem: init_stdev not set");
}

inline size_t cem_elite_count(const CemConfig& cfg) {
    return static_cast<size_t>(std::ceil(cfg.elite_fraction * static_cast<double>(cfg.n_samples)));
}

struct PlanResult {
    std::vector<Vec> best_actions;
    double best_cost = std::numeric_limits<double>::infinity();
    Vec per_iteration_best;  // best cost seen so far, per iteration
    Obs predicted_terminal;
};

// One-step prediction; the goal argument lets oracle dynamics treat the
// goal as absorbing (learned models ignore it).
using StepFn = std::function<Obs(const Obs& obs, const Vec& action, const Obs& goal)>;
using GoalCostFn = std::function<double(const Obs& obs, const Obs& goal)>;

struct PlanningProblem {
    StepFn step;
    GoalCostFn cost;  // lower is better
    size_t action_dim = 0;
};

namespace detail {

struct RolloutScore {
    double cost = 0.0;
    Obs terminal;
};

inline RolloutScore score_sequence(const PlanningProblem& prob, const Obs& obs, const Obs& goal,
                                   const std::vector<Vec>& actions, bool score_intermediate) {
    RolloutScore out;
    Obs cur = obs;
    double acc = 0.0;
    for (const Vec& a : actions) {
        cur = prob.step(cur, a, goal);
        if (score_intermediate) acc += prob.cost(cur, goal);
    }
    out.terminal = std::move(cur);
    out.cost = score_intermediate ? acc / static_cast<double>(actions.size())
                                  : prob.cost(out.terminal, goal);
    return out;
}

}  // namespace detail

inline double plan_cost(const PlanningProblem& prob, const Obs& obs, const Obs& goal,
                        const std::vector<Vec>& actions, bool score_intermediate = false) {
    if (actions.empty()) throw std::invalid_argument("plan_cost: empty action sequence");
    return detail::score_sequence(prob, obs, goal, actions, score_intermediate).cost;
}

inline PlanResult cem_plan(const PlanningProblem& prob, const Obs& obs, const Obs& goal,
                           const CemConfig& cfg, Rng& rng,
                           const std::vector<Vec>* warm_mean = nullptr) {
    validate(cfg);
    const size_t h = static_cast<size_t>(cfg.horizon);
    const size_t n = static_cast<size_t>(cfg.n_samples);
    const size_t n_elite = cem_elite_count(cfg);

    std::vector<std::vector<Vec>> samples(n, std::vector<Vec>(h, Vec(prob.action_dim, 0.0)));
    std::vector<double> costs(n);
    std::vector<Obs> terminals(n);

    Matrix mean(h, prob.action_dim);
    Matrix stdev(h, prob.action_dim);

    PlanResult result;
    result.per_iteration_best.reserve(cfg.n_iterations);

    for (int iter = 0; iter < cfg.n_iterations; ++iter) {
        if (iter == 0) {
            // Filtered Gaussian prior, same scheme as data collection,
            // optionally centered on the shifted previous plan.
            for (size_t i = 0; i < n; ++i) {
                FilteredActionSampler noise(cfg.init_stdev, cfg.filter_beta);
                for (size_t t = 0; t < h; ++t) {
                    Vec a = noise.next(rng);
                    if (warm_mean != nullptr)
                        for (size_t d = 0; d < a.size(); ++d) a[d] += (*warm_mean)[t][d];
                    samples[i][t] = clip(std::move(a), -1.0, 1.0);
                }
            }
        } else {
            for (size_t i = 0; i < n; ++i)
                for (size_t t = 0; t < h; ++t)
                    for (size_t d = 0; d < prob.action_dim; ++d)
                        samples[i][t][d] =
                            clip(rng.normal(mean.at(t, d), stdev.at(t, d)), -1.0, 1.0);
        }

        for (size_t i = 0; i < n; ++i) {
            auto score = detail::score_sequence(prob, obs, goal, samples[i], cfg.score_intermediate);
            costs[i] = score.cost;
            terminals[i] = std::move(score.terminal);
            if (costs[i] < result.best_cost) {
                result.best_cost = costs[i];
                result.best_actions = samples[i];
                result.predicted_terminal = terminals[i];
            }
        }
        result.per_iteration_best.push_back(result.best_cost);

        if (iter + 1 == cfg.n_iterations) break;

        // Elite selection: stable order, ties broken by sample index.
        std::vector<std::pair<double, size_t>> ranked(n);
        for (size_t i = 0; i < n; ++i) ranked[i] = {costs[i], i};
        std::partial_sort(ranked.begin(), ranked.begin() + n_elite, ranked.end());

        // Diagonal Gaussian refit per (timestep, dim) with a variance floor.
        mean.zero();
        stdev.zero();
        for (size_t e = 0; e < n_elite; ++e) {
            const auto& seq = samples[ranked[e].second];
            for (size_t t = 0; t < h; ++t)
                for (size_t d = 0; d < prob.action_dim; ++d) mean.at(t, d) += seq[t][d];
        }
        for (double& x : mean.data) x /= static_cast<double>(n_elite);
        for (size_t e = 0; e < n_elite; ++e) {
            const auto& seq = samples[ranked[e].second];
            for (size_t t = 0; t < h; ++t)
                for (size_t d = 0; d < prob.action_dim; ++d) {
                    const double diff = seq[t][d] - mean.at(t, d);
                    stdev.at(t, d) += diff * diff;
                }
        }
        for (double& x : stdev.data)
            x = std::sqrt(std::max(x / static_cast<double>(n_elite), cfg.refit_var_floor));
    }
    return result;
}

struct MpcResult {
    Trajectory trajectory;
    bool success = false;
    int steps_taken = 0;
    std::vector<PlanResult> plans;
};

// Receding-horizon control: plan, execute the first replan_every actions,
// replan. Success (task component within threshold) is checked after every
// step and ends the episode early.
inline MpcResult mpc_episode(const EnvConfig& env_cfg, const PlanningProblem& prob,
                             const EnvState& start, const Obs& goal_obs, const EnvState& goal_state,
                             const CemConfig& cfg, double threshold, Rng& rng,
                             bool keep_plans = false) {
    validate(cfg);
    MpcResult out;
    EnvState state = start;
    state.time = 0;
    out.trajectory.observations.push_back(observe(state, env_cfg));
    out.trajectory.actuated_keys.push_back(actuated_key(state));
    out.trajectory.env_states.push_back(state);

    if (success(state, goal_state, threshold, env_cfg)) {
        out.success = true;
        return out;
    }

    std::vector<Vec> warm;
    while (state.time < env_cfg.max_episode_len) {
        const Obs obs = observe(state, env_cfg);
        PlanResult plan = cem_plan(prob, obs, goal_obs, cfg, rng,
                                   cfg.warm_start && !warm.empty() ? &warm : nullptr);
        for (int i = 0; i < cfg.replan_every && state.time < env_cfg.max_episode_len; ++i) {
            const Vec& action = plan.best_actions[i];
            state = step(state, action, env_cfg);
            out.trajectory.actions.push_back(action);
            out.trajectory.observations.push_back(observe(state, env_cfg));
            out.trajectory.actuated_keys.push_back(actuated_key(state));
            out.trajectory.env_states.push_back(state);
            ++out.steps_taken;
            if (success(state, goal_state, threshold, env_cfg)) {
                out.success = true;
                if (keep_plans) out.plans.push_back(std::move(plan));
                return out;
            }
        }
        if (cfg.warm_start) {
            warm.assign(plan.best_actions.begin() + cfg.replan_every, plan.best_actions.end());
            warm.resize(cfg.horizon, Vec(prob.action_dim, 0.0));
        }
        if (keep_plans) out.plans.push_back(std::move(plan));
    }
    return out;
}

// ---- Problem adapters ----

// One-step hook backed by the learned forward model (goal ignored).
inline StepFn make_model_step(const ForwardModel& model) {
    return [&model](const Obs& obs, const Vec& action, const Obs&) {
        Vec x(model.obs_dim + model.action_dim);
        std::copy(obs.begin(), obs.end(), x.begin());
        std::copy(action.begin(), action.end(), x.begin() + model.obs_dim);
        const Vec delta = forward(model.net, x);
        Obs next = obs;
        for (size_t d = 0; d < next.size(); ++d) next[d] += delta[d];
        return next;
    };
}

// Learned pipeline: model rollouts scored by the conservative Q at the
// actor's action (the planning objective is -max_a Q(terminal, a, goal)).
inline PlanningProblem make_learned_problem(const ForwardModel& model, const QEnsemble& ensemble) {
    PlanningProblem p;
    p.action_dim = model.action_dim;
    p.step = make_model_step(model);
    p.cost = [&ensemble](const Obs& obs, const Obs& goal) {
        return -q_value(ensemble, obs, greedy_action(ensemble, obs, goal), goal);
    };
    return p;
}

// Spec-level convenience: the learned planning cost of one action sequence.
inline double plan_cost(const ForwardModel& model, const QEnsemble& ensemble, const Obs& obs,
                        const Obs& goal, const std::vector<Vec>& actions) {
    return plan_cost(make_learned_problem(model, ensemble), obs, goal, actions);
}

// Exact gridworld dynamics with the goal cell absorbing, scored by the
// tabular value function: cost = -max_a Q(cell(s), a, cell(g)).
inline PlanningProblem make_gridworld_oracle_problem(const EnvConfig& grid, const TabularQ& q) {
    PlanningProblem p;
    p.action_dim = static_cast<size_t>(grid.action_dim);
    p.step = [&grid](const Obs& obs, const Vec& action, const Obs& goal) {
        if (obs == goal) return obs;  // absorbed
        const EnvState s = make_state(grid, denormalize(obs, grid));
        return observe(step(s, action, grid), grid);
    };
    p.cost = [&grid, &q](const Obs& obs, const Obs& goal) {
        const Vec sc = denormalize(obs, grid);
        const Vec gc = denormalize(goal, grid);
        const int s = grid.cell_index(static_cast<int>(std::lround(sc[0])),
                                      static_cast<int>(std::lround(sc[1])));
        const int g = grid.cell_index(static_cast<int>(std::lround(gc[0])),
                                      static_cast<int>(std::lround(gc[1])));
        return -q.value(s, g);
    };
    return p;
}

// Exact continuous dynamics (for tests): the real environment as its own
// perfect model, no absorption.
inline PlanningProblem make_exact_env_problem(const EnvConfig& env_cfg, GoalCostFn cost) {
    PlanningProblem p;
    p.action_dim = static_cast<size_t>(env_cfg.action_dim);
    p.step = [&env_cfg](const Obs& obs, const Vec& action, const Obs&) {
        const EnvState s = make_state(env_cfg, denormalize(obs, env_cfg));
        return observe(step(s, action, env_cfg), env_cfg);
    };
    p.cost = std::move(cost);
    return p;
}

}  // namespace goalreach
