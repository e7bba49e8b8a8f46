#pragma once

// Deterministic desk-scale environments: a walled gridworld, a 2-D point
// mass, and a planar pusher with one underactuated object. States are
// value types; stepping returns a new state.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "goalreach/common.hpp"

namespace goalreach {

enum class EnvKind { gridworld, pointmass2d, planarpush };

inline std::string to_string(EnvKind k) {
    switch (k) {
        case EnvKind::gridworld: return "gridworld";
        case EnvKind::pointmass2d: return "pointmass2d";
        case EnvKind::planarpush: return "planarpush";
    }
    return "?";
}

inline EnvKind env_kind_from_string(const std::string& s) {
    if (s == "gridworld") return EnvKind::gridworld;
    if (s == "pointmass2d") return EnvKind::pointmass2d;
    if (s == "planarpush") return EnvKind::planarpush;
    throw std::invalid_argument("unknown env kind: " + s);
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct EnvConfig {
    EnvKind kind = EnvKind::pointmass2d;
    int grid_size = 6;                    // gridworld only
    std::vector<uint8_t> walls;           // gridworld only; row-major, 1 = blocked
    std::vector<Interval> arena_bounds;   // continuous envs, one per state dim
    int action_dim = 2;
    int max_episode_len = 30;
    std::vector<Interval> reset_region;   // one per state dim

    // Physics constants for the continuous environments.
    double step_scale = 0.1;      // max positional change per step
    double agent_radius = 0.08;   // planarpush
    double object_radius = 0.08;  // planarpush

    int actuated_dim() const { return 2; }
    int underactuated_dim() const { return kind == EnvKind::planarpush ? 2 : 0; }
    int state_dim() const { return actuated_dim() + underactuated_dim(); }

    bool is_wall(int x, int y) const {
        if (walls.empty()) return false;
        return walls[static_cast<size_t>(y) * grid_size + x] != 0;
    }
    int cell_index(int x, int y) const { return y * grid_size + x; }
    int num_cells() const { return grid_size * grid_size; }
};

struct EnvState {
    Vec actuated;
    Vec underactuated;
    int time = 0;
};

using Obs = Vec;

inline void validate(const EnvConfig& cfg) {
    if (cfg.action_dim < 1) throw std::invalid_argument("env: action_dim must be >= 1");
    if (cfg.max_episode_len < 1) throw std::invalid_argument("env: max_episode_len must be >= 1");
    if (cfg.kind == EnvKind::gridworld) {
        if (cfg.grid_size < 2) throw std::invalid_argument("env: grid_size must be >= 2");
        if (!cfg.walls.empty() && cfg.walls.size() != static_cast<size_t>(cfg.num_cells()))
            throw std::invalid_argument("env: walls size must equal grid_size^2");
    } else {
        if (cfg.arena_bounds.size() != static_cast<size_t>(cfg.state_dim()))
            throw std::invalid_argument("env: arena_bounds must have one interval per state dim");
        for (const auto& b : cfg.arena_bounds)
            if (!(b.lo < b.hi)) throw std::invalid_argument("env: arena bound lo must be < hi");
    }
    if (cfg.reset_region.size() != static_cast<size_t>(cfg.state_dim()))
        throw std::invalid_argument("env: reset_region must have one interval per state dim");
}

// Per-dimension normalization bounds (gridworld uses cell coordinates).
inline Interval dim_bounds(const EnvConfig& cfg, int dim) {
    if (cfg.kind == EnvKind::gridworld) return {0.0, static_cast<double>(cfg.grid_size - 1)};
    return cfg.arena_bounds[dim];
}

inline EnvState make_state(const EnvConfig& cfg, const Vec& coords, int time = 0) {
    if (coords.size() != static_cast<size_t>(cfg.state_dim()))
        throw std::invalid_argument("make_state: coordinate length mismatch");
    EnvState s;
    s.actuated.assign(coords.begin(), coords.begin() + cfg.actuated_dim());
    s.underactuated.assign(coords.begin() + cfg.actuated_dim(), coords.end());
    s.time = time;
    return s;
}

inline Vec state_coords(const EnvState& s) {
    Vec c = s.actuated;
    c.insert(c.end(), s.underactuated.begin(), s.underactuated.end());
    return c;
}

inline EnvState reset(const EnvConfig& cfg, uint64_t seed) {
    validate(cfg);
    Rng rng(seed);
    Vec coords(cfg.state_dim());
    if (cfg.kind == EnvKind::gridworld) {
        for (int attempt = 0; attempt < 10000; ++attempt) {
            for (int d = 0; d < cfg.state_dim(); ++d) {
                const auto& r = cfg.reset_region[d];
                const int lo = static_cast<int>(std::ceil(r.lo));
                const int hi = static_cast<int>(std::floor(r.hi));
                if (hi < lo) throw std::invalid_argument("reset: empty gridworld reset region");
                coords[d] = static_cast<double>(lo + static_cast<int>(rng.uniform_index(hi - lo + 1)));
            }
            if (!cfg.is_wall(static_cast<int>(coords[0]), static_cast<int>(coords[1])))
                return make_state(cfg, coords);
        }
        throw std::runtime_error("reset: could not sample a free gridworld cell");
    }
    for (int d = 0; d < cfg.state_dim(); ++d) {
        const auto& r = cfg.reset_region[d];
        coords[d] = r.lo == r.hi ? r.lo : rng.uniform(r.lo, r.hi);
    }
    return make_state(cfg, coords);
}

namespace detail {

// 4-neighborhood move table: +x, -x, +y, -y.
inline constexpr int kGridMoves[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};

// Continuous action -> discrete move. Larger |component| wins, x on ties;
// a zero action is a stay.
inline int discretize_grid_action(const Vec& a) {
    const double ax = a[0], ay = a[1];
    if (ax == 0.0 && ay == 0.0) return -1;
    if (std::abs(ax) >= std::abs(ay)) return ax > 0.0 ? 0 : 1;
    return ay > 0.0 ? 2 : 3;
}

inline std::pair<int, int> grid_step_cell(const EnvConfig& cfg, int x, int y, int move) {
    if (move < 0) return {x, y};
    const int nx = x + kGridMoves[move][0];
    const int ny = y + kGridMoves[move][1];
    if (nx < 0 || ny < 0 || nx >= cfg.grid_size || ny >= cfg.grid_size) return {x, y};
    if (cfg.is_wall(nx, ny)) return {x, y};
    return {nx, ny};
}

}  // namespace detail

inline EnvState step(const EnvState& state, const Vec& action, const EnvConfig& cfg) {
    if (action.size() != static_cast<size_t>(cfg.action_dim))
        throw std::invalid_argument("step: action length != action_dim");
    if (state.time >= cfg.max_episode_len)
        throw std::runtime_error("step: episode already ended (max_episode_len reached)");
    const Vec a = clip(action, -1.0, 1.0);

    EnvState next = state;
    next.time = state.time + 1;

    switch (cfg.kind) {
        case EnvKind::gridworld: {
            const int move = detail::discretize_grid_action(a);
            auto [nx, ny] = detail::grid_step_cell(cfg, static_cast<int>(state.actuated[0]),
                                                   static_cast<int>(state.actuated[1]), move);
            next.actuated = {static_cast<double>(nx), static_cast<double>(ny)};
            break;
        }
        case EnvKind::pointmass2d: {
            for (int d = 0; d < 2; ++d) {
                const auto& b = cfg.arena_bounds[d];
                next.actuated[d] = clip(state.actuated[d] + cfg.step_scale * a[d], b.lo, b.hi);
            }
            break;
        }
        case EnvKind::planarpush: {
            Vec agent(2), delta(2);
            for (int d = 0; d < 2; ++d) {
                const auto& b = cfg.arena_bounds[d];
                agent[d] = clip(state.actuated[d] + cfg.step_scale * a[d], b.lo, b.hi);
                delta[d] = agent[d] - state.actuated[d];
            }
            Vec object = state.underactuated;
            const double contact = cfg.agent_radius + cfg.object_radius;
            const double dx = object[0] - agent[0];
            const double dy = object[1] - agent[1];
            const double dist = std::sqrt(dx * dx + dy * dy);
            if (dist < contact) {
                double nx, ny;
                if (dist > 1e-12) {
                    nx = dx / dist;
                    ny = dy / dist;
                } else {
                    // Centers coincide; push along the agent's motion (or +x).
                    const double dn = std::sqrt(delta[0] * delta[0] + delta[1] * delta[1]);
                    nx = dn > 1e-12 ? delta[0] / dn : 1.0;
                    ny = dn > 1e-12 ? delta[1] / dn : 0.0;
                }
                object[0] = agent[0] + contact * nx;
                object[1] = agent[1] + contact * ny;
                for (int d = 0; d < 2; ++d) {
                    const auto& b = cfg.arena_bounds[2 + d];
                    object[d] = clip(object[d], b.lo, b.hi);
                }
            }
            next.actuated = agent;
            next.underactuated = object;
            break;
        }
    }
    return next;
}

inline Obs observe(const EnvState& state, const EnvConfig& cfg) {
    const Vec coords = state_coords(state);
    Obs obs(coords.size());
    for (size_t d = 0; d < coords.size(); ++d) {
        const Interval b = dim_bounds(cfg, static_cast<int>(d));
        obs[d] = 2.0 * (coords[d] - b.lo) / (b.hi - b.lo) - 1.0;
    }
    return obs;
}

inline Vec denormalize(const Obs& obs, const EnvConfig& cfg) {
    if (obs.size() != static_cast<size_t>(cfg.state_dim()))
        throw std::invalid_argument("denormalize: observation length mismatch");
    Vec coords(obs.size());
    for (size_t d = 0; d < obs.size(); ++d) {
        const Interval b = dim_bounds(cfg, static_cast<int>(d));
        coords[d] = b.lo + (obs[d] + 1.0) * 0.5 * (b.hi - b.lo);
    }
    return coords;
}

// Task-relevant component: the object for planarpush, the agent otherwise.
inline const Vec& task_component(const EnvState& s, const EnvConfig& cfg) {
    return cfg.kind == EnvKind::planarpush ? s.underactuated : s.actuated;
}

inline bool success(const EnvState& state, const EnvState& goal, double threshold,
                    const EnvConfig& cfg) {
    if (threshold <= 0.0) throw std::invalid_argument("success: threshold must be > 0");
    return l2_distance(task_component(state, cfg), task_component(goal, cfg)) <= threshold;
}

inline const Vec& actuated_key(const EnvState& state) { return state.actuated; }

inline double default_success_threshold(EnvKind kind) {
    return kind == EnvKind::gridworld ? 0.5 : 0.05;
}

inline EnvConfig default_env_config(EnvKind kind) {
    EnvConfig cfg;
    cfg.kind = kind;
    switch (kind) {
        case EnvKind::gridworld:
            cfg.grid_size = 6;
            cfg.reset_region = {{0.0, 5.0}, {0.0, 5.0}};
            break;
        case EnvKind::pointmass2d:
            cfg.arena_bounds = {{-0.4, 0.4}, {-0.4, 0.4}};
            cfg.reset_region = {{-0.4, 0.4}, {-0.4, 0.4}};
            break;
        case EnvKind::planarpush:
            cfg.arena_bounds = {{-0.4, 0.4}, {-0.4, 0.4}, {-0.4, 0.4}, {-0.4, 0.4}};
            cfg.reset_region = {{-0.2, 0.2}, {-0.2, 0.2}, {-0.2, 0.2}, {-0.2, 0.2}};
            break;
    }
    return cfg;
}

}  // namespace goalreach
