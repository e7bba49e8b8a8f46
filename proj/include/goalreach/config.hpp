#pragma once

// Plain-text run configuration: `key = value` lines with `#` comments.
// Defaults follow the published hyperparameters; desk-scale runs override
// the expensive ones (episode counts, training steps) in their config files.

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "goalreach/baselines.hpp"
#include "goalreach/distance.hpp"
#include "goalreach/dynamics.hpp"
#include "goalreach/env.hpp"
#include "goalreach/planner.hpp"

namespace goalreach {

struct BenchConfig {
    size_t tasks = 100;
    size_t seeds = 5;
    uint64_t seed_base = 1;
    uint64_t task_seed = 7;
    double min_object_move = 0.1;
    double min_arm_object_gap = 0.15;
    double success_threshold = 0.05;
    std::string difficulty = "regular";
    size_t qshoot_actions = 100;
};

struct DataConfig {
    size_t episodes = 10000;
    double beta = 0.5;
    Vec stdev = {0.6, 0.6};
    uint64_t seed = 0;
    size_t knn_max_points = 200000;
};

struct RunConfig {
    EnvConfig env;
    DataConfig data;
    DistanceConfig distance;
    DynamicsConfig dynamics;
    CemConfig plan;
    BenchConfig bench;
    GcbcConfig gcbc;
    TemporalConfig temporal;
    std::vector<int> ablate_horizons = {3, 7, 13};
    Interval restricted_reset = {-0.05, 0.05};
};

inline RunConfig default_run_config(EnvKind kind = EnvKind::pointmass2d) {
    RunConfig cfg;
    cfg.env = default_env_config(kind);
    cfg.bench.success_threshold = default_success_threshold(kind);
    cfg.plan.init_stdev = cfg.data.stdev;
    return cfg;
}

namespace detail {

class KeyValueFile {
public:
    explicit KeyValueFile(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("config: cannot open " + path);
        std::string line;
        int lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            const size_t hash = line.find('#');
            if (hash != std::string::npos) line.resize(hash);
            const size_t eq = line.find('=');
            if (eq == std::string::npos) {
                if (line.find_first_not_of(" \t\r") != std::string::npos)
                    throw std::runtime_error("config: " + path + ":" + std::to_string(lineno) +
                                             ": expected 'key = value'");
                continue;
            }
            values_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
        }
    }

    KeyValueFile() = default;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) > 0; }

    void get(const std::string& key, double& out) const {
        if (auto it = values_.find(key); it != values_.end()) out = std::stod(it->second);
    }
    void get(const std::string& key, int& out) const {
        if (auto it = values_.find(key); it != values_.end()) out = std::stoi(it->second);
    }
    void get(const std::string& key, size_t& out) const {
        if (auto it = values_.find(key); it != values_.end()) out = std::stoull(it->second);
    }
    void get(const std::string& key, bool& out) const {
        if (auto it = values_.find(key); it != values_.end())
            out = it->second == "1" || it->second == "true" || it->second == "on";
    }
    void get(const std::string& key, std::string& out) const {
        if (auto it = values_.find(key); it != values_.end()) out = it->second;
    }
    void get(const std::string& key, Vec& out) const {
        if (auto it = values_.find(key); it != values_.end()) {
            Vec v;
            std::istringstream s(it->second);
            double x;
            while (s >> x) v.push_back(x);
            if (!v.empty()) out = std::move(v);
        }
    }
    void get(const std::string& key, std::vector<int>& out) const {
        if (auto it = values_.find(key); it != values_.end()) {
            std::vector<int> v;
            std::istringstream s(it->second);
            int x;
            while (s >> x) v.push_back(x);
            if (!v.empty()) out = std::move(v);
        }
    }
    void get(const std::string& key, std::vector<Interval>& out) const {
        Vec flat;
        get(key, flat);
        if (flat.empty()) return;
        if (flat.size() % 2 != 0)
            throw std::runtime_error("config: '" + key + "' needs lo/hi pairs");
        std::vector<Interval> v;
        for (size_t i = 0; i < flat.size(); i += 2) v.push_back({flat[i], flat[i + 1]});
        out = std::move(v);
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    static std::string trim(std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? "" : s.substr(b, e - b + 1);
    }

    std::map<std::string, std::string> values_;
};

inline void apply(const KeyValueFile& f, RunConfig& cfg) {
    std::string kind = to_string(cfg.env.kind);
    f.get("env.kind", kind);
    if (kind != to_string(cfg.env.kind)) {
        // Switching environments resets env fields and the success
        // threshold to that environment's defaults; later keys override.
        const EnvKind k = env_kind_from_string(kind);
        cfg.env = default_env_config(k);
        cfg.bench.success_threshold = default_success_threshold(k);
    }
    f.get("env.grid_size", cfg.env.grid_size);
    f.get("env.arena_bounds", cfg.env.arena_bounds);
    f.get("env.reset_region", cfg.env.reset_region);
    f.get("env.action_dim", cfg.env.action_dim);
    f.get("env.max_episode_len", cfg.env.max_episode_len);
    f.get("env.step_scale", cfg.env.step_scale);
    f.get("env.agent_radius", cfg.env.agent_radius);
    f.get("env.object_radius", cfg.env.object_radius);

    f.get("data.episodes", cfg.data.episodes);
    f.get("data.beta", cfg.data.beta);
    f.get("data.stdev", cfg.data.stdev);
    f.get("data.seed", cfg.data.seed);
    f.get("knn.max_points", cfg.data.knn_max_points);
    f.get("knn.k", cfg.distance.knn_k);

    f.get("distance.gamma", cfg.distance.gamma);
    f.get("distance.r_step", cfg.distance.r_step);
    f.get("distance.r_goal", cfg.distance.r_goal);
    f.get("distance.polyak", cfg.distance.polyak);
    f.get("distance.learning_rate", cfg.distance.learning_rate);
    f.get("distance.batch_size", cfg.distance.batch_size);
    f.get("distance.train_steps", cfg.distance.train_steps);
    f.get("distance.p_geom", cfg.distance.p_geom);
    f.get("distance.mix", cfg.distance.mix);
    f.get("distance.actor_noise_sigma", cfg.distance.actor_noise_sigma);
    f.get("distance.actor_noise_clip", cfg.distance.actor_noise_clip);
    f.get("distance.cql_tau", cfg.distance.cql_tau);
    f.get("distance.cql_n_actions", cfg.distance.cql_n_actions);
    f.get("distance.cql_alpha_lr", cfg.distance.cql_alpha_lr);
    f.get("distance.cql_alpha_init", cfg.distance.cql_alpha_init);
    f.get("distance.hidden_units", cfg.distance.hidden_units);
    f.get("distance.hidden_layers", cfg.distance.hidden_layers);

    f.get("dynamics.h_train", cfg.dynamics.h_train);
    f.get("dynamics.train_steps", cfg.dynamics.train_steps);
    f.get("dynamics.learning_rate", cfg.dynamics.learning_rate);
    f.get("dynamics.batch_size", cfg.dynamics.batch_size);
    f.get("dynamics.hidden_units", cfg.dynamics.hidden_units);
    f.get("dynamics.hidden_layers", cfg.dynamics.hidden_layers);
    f.get("dynamics.train_frac", cfg.dynamics.train_frac);
    f.get("dynamics.test_frac", cfg.dynamics.test_frac);

    f.get("plan.horizon", cfg.plan.horizon);
    f.get("plan.samples", cfg.plan.n_samples);
    f.get("plan.iterations", cfg.plan.n_iterations);
    f.get("plan.elite_fraction", cfg.plan.elite_fraction);
    f.get("plan.replan_every", cfg.plan.replan_every);
    f.get("plan.filter_beta", cfg.plan.filter_beta);
    f.get("plan.init_stdev", cfg.plan.init_stdev);
    f.get("plan.score_intermediate", cfg.plan.score_intermediate);
    f.get("plan.warm_start", cfg.plan.warm_start);

    f.get("bench.tasks", cfg.bench.tasks);
    f.get("bench.seeds", cfg.bench.seeds);
    f.get("bench.seed_base", cfg.bench.seed_base);
    f.get("bench.task_seed", cfg.bench.task_seed);
    f.get("bench.min_object_move", cfg.bench.min_object_move);
    f.get("bench.min_arm_object_gap", cfg.bench.min_arm_object_gap);
    f.get("bench.success_threshold", cfg.bench.success_threshold);
    f.get("bench.difficulty", cfg.bench.difficulty);
    f.get("bench.qshoot_actions", cfg.bench.qshoot_actions);

    f.get("gcbc.train_steps", cfg.gcbc.train_steps);
    f.get("gcbc.batch_size", cfg.gcbc.batch_size);
    f.get("gcbc.learning_rate", cfg.gcbc.learning_rate);
    f.get("temporal.maxdist", cfg.temporal.maxdist);
    f.get("temporal.train_steps", cfg.temporal.train_steps);
    f.get("temporal.batch_size", cfg.temporal.batch_size);

    f.get("ablate.horizons", cfg.ablate_horizons);
    std::vector<Interval> rr;
    f.get("ablate.restricted_reset", rr);
    if (!rr.empty()) cfg.restricted_reset = rr[0];

    if (cfg.plan.init_stdev.empty() || !f.has("plan.init_stdev"))
        cfg.plan.init_stdev = cfg.data.stdev;
}

}  // namespace detail

inline RunConfig load_run_config(const std::string& path) {
    RunConfig cfg = default_run_config();
    detail::KeyValueFile f(path);
    detail::apply(f, cfg);
    return cfg;
}

// Overrides of the form "key=value" (CLI --set).
inline void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides) {
    detail::KeyValueFile f;
    for (const std::string& o : overrides) {
        const size_t eq = o.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("override needs key=value: " + o);
        f.set(o.substr(0, eq), o.substr(eq + 1));
    }
    detail::apply(f, cfg);
}

}  // namespace goalreach
