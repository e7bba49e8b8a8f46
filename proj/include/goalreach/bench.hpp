#pragma once

// Benchmark harness: task-set generation from rolled episodes, multi-seed
// success-rate evaluation of planners and policies, distance heatmaps,
// and the ablation drivers.

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "goalreach/baselines.hpp"
#include "goalreach/config.hpp"
#include "goalreach/dataset.hpp"
#include "goalreach/distance.hpp"
#include "goalreach/dynamics.hpp"
#include "goalreach/env.hpp"
#include "goalreach/planner.hpp"
#include "goalreach/relabel.hpp"

namespace goalreach {

struct Task {
    EnvState start;
    EnvState goal_state;
    Obs goal_obs;
};

struct TaskSet {
    std::vector<Task> tasks;
    std::string difficulty;  // "regular" or "hard"
    uint64_t seed = 0;
    double min_object_move = 0.0;
    double min_arm_object_gap = 0.0;
};

// Rolls random episodes and keeps (start, terminal) pairs where the task
// component moved at least min_object_move; "hard" additionally requires
// the goal arm position to sit away from the object. Every goal is a state
// actually produced by the dynamics.
inline TaskSet gen_tasks(const EnvConfig& cfg, size_t n, const std::string& difficulty,
                         double min_object_move, double min_arm_object_gap, const Vec& stdev,
                         double beta, uint64_t seed) {
    if (n < 1) throw std::invalid_argument("gen_tasks: n must be >= 1");
    const bool hard = difficulty == "hard";
    if (hard && cfg.underactuated_dim() == 0)
        throw std::invalid_argument("gen_tasks: 'hard' needs an environment with an object");
    if (!hard && difficulty != "regular")
        throw std::invalid_argument("gen_tasks: difficulty must be 'regular' or 'hard'");

    TaskSet set;
    set.difficulty = difficulty;
    set.seed = seed;
    set.min_object_move = min_object_move;
    set.min_arm_object_gap = min_arm_object_gap;

    const size_t budget = 2000 * n;
    for (size_t attempt = 0; attempt < budget && set.tasks.size() < n; ++attempt) {
        const Trajectory traj =
            rollout_random_episode(cfg, stdev, beta, Rng::mix(seed, 2 * attempt),
                                   Rng::mix(seed, 2 * attempt + 1), /*keep_states=*/true);
        const EnvState& start = traj.env_states.front();
        const EnvState& goal = traj.env_states.back();
        if (l2_distance(task_component(start, cfg), task_component(goal, cfg)) < min_object_move)
            continue;
        if (hard && l2_distance(goal.actuated, goal.underactuated) < min_arm_object_gap) continue;
        set.tasks.push_back({start, goal, observe(goal, cfg)});
    }
    if (set.tasks.size() < n)
        throw std::runtime_error("gen_tasks: acceptance starvation after " + std::to_string(budget) +
                                 " rolled episodes (" + std::to_string(set.tasks.size()) + "/" +
                                 std::to_string(n) + " accepted)");
    return set;
}

// Per-seed episode runner: given a task and a fresh random stream, run one
// evaluation episode and report success.
using EpisodeRunner = std::function<bool(const Task&, Rng&)>;
using MethodFactory = std::function<EpisodeRunner(uint64_t seed)>;

struct MethodSpec {
    std::string name;
    MethodFactory make;
};

struct MethodOutcome {
    std::string name;
    std::vector<std::vector<uint8_t>> per_task;  // [seed][task]
    Vec per_seed_rate;
    double mean_rate = 0.0;
    double stdev_rate = 0.0;
    double runtime_sec = 0.0;
};

struct BenchReport {
    size_t n_tasks = 0;
    std::string difficulty;
    std::vector<uint64_t> seeds;
    std::vector<MethodOutcome> methods;

    std::string format() const {
        std::ostringstream s;
        s << "benchmark: " << n_tasks << " tasks (" << difficulty << "), " << seeds.size()
          << " seeds\n";
        s << "method                          mean    std    per-seed rates          runtime\n";
        for (const auto& m : methods) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%-30s %6.3f %6.3f   ", m.name.c_str(), m.mean_rate,
                          m.stdev_rate);
            s << buf;
            for (double r : m.per_seed_rate) {
                std::snprintf(buf, sizeof(buf), "%.3f ", r);
                s << buf;
            }
            std::snprintf(buf, sizeof(buf), "  %8.1fs", m.runtime_sec);
            s << buf << "\n";
        }
        return s.str();
    }
};

inline BenchReport run_benchmark(const std::vector<MethodSpec>& methods, const TaskSet& taskset,
                                 const std::vector<uint64_t>& seeds) {
    if (seeds.empty()) throw std::invalid_argument("run_benchmark: need at least one seed");
    BenchReport report;
    report.n_tasks = taskset.tasks.size();
    report.difficulty = taskset.difficulty;
    report.seeds = seeds;
    for (const auto& spec : methods) {
        MethodOutcome out;
        out.name = spec.name;
        const auto t0 = std::chrono::steady_clock::now();
        for (uint64_t seed : seeds) {
            EpisodeRunner runner = spec.make(seed);
            std::vector<uint8_t> results(taskset.tasks.size(), 0);
            size_t successes = 0;
            for (size_t i = 0; i < taskset.tasks.size(); ++i) {
                Rng rng(Rng::mix(Rng::mix(seed, 0x9e37), i));
                results[i] = runner(taskset.tasks[i], rng) ? 1 : 0;
                successes += results[i];
            }
            out.per_task.push_back(std::move(results));
            out.per_seed_rate.push_back(static_cast<double>(successes) /
                                        static_cast<double>(taskset.tasks.size()));
        }
        double mean = 0.0;
        for (double r : out.per_seed_rate) mean += r;
        mean /= static_cast<double>(out.per_seed_rate.size());
        double var = 0.0;
        for (double r : out.per_seed_rate) var += (r - mean) * (r - mean);
        out.mean_rate = mean;
        out.stdev_rate = out.per_seed_rate.size() > 1
                             ? std::sqrt(var / static_cast<double>(out.per_seed_rate.size() - 1))
                             : 0.0;
        out.runtime_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.methods.push_back(std::move(out));
    }
    return report;
}

// ---- Episode runners ----

inline EpisodeRunner make_mpc_runner(const EnvConfig& env_cfg, const PlanningProblem& prob,
                                     const CemConfig& cem, double threshold) {
    return [&env_cfg, &prob, cem, threshold](const Task& task, Rng& rng) {
        return mpc_episode(env_cfg, prob, task.start, task.goal_obs, task.goal_state, cem, threshold,
                           rng)
            .success;
    };
}

// Reactive policy rollout (no planning); success checked after each step.
inline bool policy_episode(const EnvConfig& env_cfg,
                           const std::function<Vec(const Obs&, const Obs&, Rng&)>& policy,
                           const Task& task, double threshold, Rng& rng) {
    EnvState state = task.start;
    state.time = 0;
    if (success(state, task.goal_state, threshold, env_cfg)) return true;
    while (state.time < env_cfg.max_episode_len) {
        const Vec action = policy(observe(state, env_cfg), task.goal_obs, rng);
        state = step(state, action, env_cfg);
        if (success(state, task.goal_state, threshold, env_cfg)) return true;
    }
    return false;
}

inline EpisodeRunner make_qshoot_runner(const EnvConfig& env_cfg, const QEnsemble& ensemble,
                                        size_t n_actions, double threshold) {
    return [&env_cfg, &ensemble, n_actions, threshold](const Task& task, Rng& rng) {
        return policy_episode(
            env_cfg,
            [&ensemble, n_actions](const Obs& obs, const Obs& goal, Rng& r) {
                return q_shooting_action(ensemble, obs, goal, n_actions, r);
            },
            task, threshold, rng);
    };
}

inline EpisodeRunner make_gcbc_runner(const EnvConfig& env_cfg, const GcbcPolicy& policy,
                                      double threshold) {
    return [&env_cfg, &policy, threshold](const Task& task, Rng& rng) {
        return policy_episode(
            env_cfg,
            [&policy](const Obs& obs, const Obs& goal, Rng&) { return gcbc_action(policy, obs, goal); },
            task, threshold, rng);
    };
}

// ---- Heatmaps ----

struct HeatmapSpec {
    int nx = 20, ny = 20;
    Interval x{-0.2, 0.2};
    Interval y{-0.2, 0.2};
    bool sweep_actuated = false;  // sweep the agent instead of the object
};

using DistanceEvaluator = std::function<double(const Obs& obs, const Obs& goal)>;

// Sweeps one 2-D state component over a grid (the task-relevant object by
// default), synthesizing the observation with the other component fixed,
// and evaluates the distance to the goal. Row r corresponds to
// y = y.lo + r * dy.
inline Matrix heatmap(const DistanceEvaluator& eval, const EnvConfig& cfg, const Obs& goal_obs,
                      const HeatmapSpec& spec, const Vec& fixed_component) {
    Matrix out(spec.ny, spec.nx);
    for (int iy = 0; iy < spec.ny; ++iy) {
        const double y =
            spec.ny == 1 ? spec.y.lo : spec.y.lo + (spec.y.hi - spec.y.lo) * iy / (spec.ny - 1);
        for (int ix = 0; ix < spec.nx; ++ix) {
            const double x =
                spec.nx == 1 ? spec.x.lo : spec.x.lo + (spec.x.hi - spec.x.lo) * ix / (spec.nx - 1);
            Vec coords;
            if (cfg.underactuated_dim() == 0) {
                coords = {x, y};
            } else if (spec.sweep_actuated) {
                coords = {x, y, fixed_component[0], fixed_component[1]};
            } else {
                coords = {fixed_component[0], fixed_component[1], x, y};
            }
            out.at(iy, ix) = eval(observe(make_state(cfg, coords), cfg), goal_obs);
        }
    }
    return out;
}

inline void write_csv(const Matrix& m, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_csv: cannot open " + path);
    f.precision(10);
    for (size_t r = 0; r < m.rows; ++r) {
        for (size_t c = 0; c < m.cols; ++c) {
            if (c > 0) f << ",";
            f << m.at(r, c);
        }
        f << "\n";
    }
}

// ---- Trained pipelines and ablation drivers ----

// Everything one evaluation seed needs, trained on a shared dataset.
struct TrainedPipeline {
    ForwardModel model;
    QEnsemble ensemble;
    DistanceConfig distance_cfg;
};

inline TrainedPipeline train_pipeline(const OfflineDataset& ds, const KnnIndex& index,
                                      const RunConfig& cfg, uint64_t seed,
                                      const ProgressFn& progress = nullptr) {
    TrainedPipeline p;
    p.model = train_dynamics(ds, cfg.dynamics, Rng::mix(seed, 101));
    p.ensemble = train_distance(ds, index, cfg.distance, Rng::mix(seed, 202), progress);
    p.distance_cfg = cfg.distance;
    return p;
}

struct AblationPair {
    std::string label;
    BenchReport on;   // varied component enabled / long horizon / uniform resets
    BenchReport off;  // disabled / short horizon / restricted resets
};

// Indexes a per-seed artifact table by benchmark seed.
inline size_t seed_slot(const std::vector<uint64_t>& seeds, uint64_t seed) {
    for (size_t i = 0; i < seeds.size(); ++i)
        if (seeds[i] == seed) return i;
    throw std::invalid_argument("unknown benchmark seed " + std::to_string(seed));
}

// MPC method over per-seed planning problems (table must outlive the
// benchmark run).
inline MethodSpec make_mpc_method(const std::string& name, const EnvConfig& env_cfg,
                                  const std::vector<PlanningProblem>& problems,
                                  const std::vector<uint64_t>& seeds, const CemConfig& cem,
                                  double threshold) {
    return {name, [&env_cfg, &problems, &seeds, cem, threshold](uint64_t seed) {
                return make_mpc_runner(env_cfg, problems[seed_slot(seeds, seed)], cem, threshold);
            }};
}

// Negative-mining ablation: retrains the distance function with mix = 1
// (reached goals only), all else identical, and benchmarks both.
inline AblationPair ablate_negative_mining(const OfflineDataset& ds, const KnnIndex& index,
                                           const RunConfig& cfg, const TaskSet& taskset,
                                           const std::vector<uint64_t>& seeds) {
    std::vector<TrainedPipeline> on(seeds.size()), off(seeds.size());
    RunConfig cfg_off = cfg;
    cfg_off.distance.mix = 1.0;
    for (size_t i = 0; i < seeds.size(); ++i) {
        on[i] = train_pipeline(ds, index, cfg, seeds[i]);
        off[i].model = on[i].model;  // shared dynamics; only the distance varies
        off[i].ensemble = train_distance(ds, index, cfg_off.distance, Rng::mix(seeds[i], 202));
        off[i].distance_cfg = cfg_off.distance;
    }
    std::vector<PlanningProblem> on_problems, off_problems;
    on_problems.reserve(seeds.size());
    off_problems.reserve(seeds.size());
    for (size_t i = 0; i < seeds.size(); ++i) {
        on_problems.push_back(make_learned_problem(on[i].model, on[i].ensemble));
        off_problems.push_back(make_learned_problem(off[i].model, off[i].ensemble));
    }
    AblationPair out;
    out.label = "negative-mining";
    out.on = run_benchmark({make_mpc_method("mining-on", cfg.env, on_problems, seeds, cfg.plan,
                                            cfg.bench.success_threshold)},
                           taskset, seeds);
    out.off = run_benchmark({make_mpc_method("mining-off", cfg.env, off_problems, seeds, cfg.plan,
                                             cfg.bench.success_threshold)},
                            taskset, seeds);
    return out;
}

// Horizon ablation: same trained artifacts, planner horizon varied.
inline std::vector<std::pair<int, BenchReport>> ablate_horizon(
    const std::vector<TrainedPipeline>& pipelines, const RunConfig& cfg, const TaskSet& taskset,
    const std::vector<uint64_t>& seeds, const std::vector<int>& horizons) {
    std::vector<std::pair<int, BenchReport>> out;
    std::vector<PlanningProblem> problems;
    problems.reserve(pipelines.size());
    for (const auto& p : pipelines) problems.push_back(make_learned_problem(p.model, p.ensemble));
    for (int h : horizons) {
        CemConfig cem = cfg.plan;
        cem.horizon = h;
        cem.replan_every = std::min(cem.replan_every, h);
        const MethodSpec spec = make_mpc_method("h=" + std::to_string(h), cfg.env, problems, seeds,
                                                cem, cfg.bench.success_threshold);
        out.emplace_back(h, run_benchmark({spec}, taskset, seeds));
    }
    return out;
}

// Restricted-reset ablation: recollects data with the object initialization
// confined to a small square, retrains everything, same tasks.
inline AblationPair ablate_restricted_resets(const RunConfig& cfg, const TaskSet& taskset,
                                             const std::vector<uint64_t>& seeds) {
    if (cfg.env.underactuated_dim() == 0)
        throw std::invalid_argument("ablate_restricted_resets: needs an object environment");
    RunConfig restricted = cfg;
    restricted.env.reset_region[2] = cfg.restricted_reset;
    restricted.env.reset_region[3] = cfg.restricted_reset;

    AblationPair out;
    out.label = "restricted-resets";
    const RunConfig* variants[2] = {&cfg, &restricted};
    for (const RunConfig* rc : variants) {
        const OfflineDataset ds = collect_random(rc->env, rc->data.episodes, rc->data.stdev,
                                                 rc->data.beta, rc->data.seed);
        const KnnIndex index = build_knn_index(ds, rc->data.knn_max_points, Rng::mix(rc->data.seed, 7));
        std::vector<TrainedPipeline> pipes(seeds.size());
        for (size_t i = 0; i < seeds.size(); ++i) pipes[i] = train_pipeline(ds, index, *rc, seeds[i]);
        std::vector<PlanningProblem> problems;
        problems.reserve(pipes.size());
        for (const auto& p : pipes) problems.push_back(make_learned_problem(p.model, p.ensemble));
        const MethodSpec spec =
            make_mpc_method(rc == &cfg ? "uniform-reset" : "restricted-reset", cfg.env, problems,
                            seeds, cfg.plan, cfg.bench.success_threshold);
        BenchReport rep = run_benchmark({spec}, taskset, seeds);
        if (rc == &cfg)
            out.on = std::move(rep);
        else
            out.off = std::move(rep);
    }
    return out;
}

}  // namespace goalreach
