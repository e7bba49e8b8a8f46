#pragma once

// Exact references for the learned components: BFS shortest paths on the
// gridworld, tabular value iteration on the goal-conditioned MDP, and the
// check that inverting Q recovers shortest-path distances.
//
// Convention: the goal is absorbing. Entering it pays r_goal and ends the
// episode, so Q(s, a, g) with s == g is r_goal (zero remaining distance)
// and the reference after-action distance there is 0.

#include <deque>
#include <optional>
#include <stdexcept>
#include <vector>

#include "goalreach/common.hpp"
#include "goalreach/distance.hpp"
#include "goalreach/env.hpp"

namespace goalreach {

constexpr int kNumGridActions = 4;

// All-cells BFS distance to `goal` under the gridworld step rule;
// -1 marks unreachable cells (and walls).
inline std::vector<int> bfs_distances_to(const EnvConfig& grid, int gx, int gy) {
    const int n = grid.num_cells();
    std::vector<int> dist(n, -1);
    if (grid.is_wall(gx, gy)) return dist;
    std::deque<int> queue;
    dist[grid.cell_index(gx, gy)] = 0;
    queue.push_back(grid.cell_index(gx, gy));
    while (!queue.empty()) {
        const int c = queue.front();
        queue.pop_front();
        const int cx = c % grid.grid_size;
        const int cy = c / grid.grid_size;
        for (int a = 0; a < kNumGridActions; ++a) {
            const auto [nx, ny] = detail::grid_step_cell(grid, cx, cy, a);
            const int nc = grid.cell_index(nx, ny);
            if (dist[nc] == -1) {
                dist[nc] = dist[c] + 1;
                queue.push_back(nc);
            }
        }
    }
    return dist;
}

inline std::optional<int> bfs_distance(const EnvConfig& grid, int sx, int sy, int gx, int gy) {
    if (grid.is_wall(sx, sy) || grid.is_wall(gx, gy)) return std::nullopt;
    const int d = bfs_distances_to(grid, gx, gy)[grid.cell_index(sx, sy)];
    if (d < 0) return std::nullopt;
    return d;
}

struct TabularQ {
    int n = 0;  // number of cells
    double gamma = 0.8, r_step = 0.0, r_goal = 1.0;
    std::vector<double> values;          // indexed (s, a, g)
    std::vector<double> sweep_deltas;    // sup-norm change per sweep

    double at(int s, int a, int g) const {
        return values[(static_cast<size_t>(s) * kNumGridActions + a) * n + g];
    }
    double& at(int s, int a, int g) {
        return values[(static_cast<size_t>(s) * kNumGridActions + a) * n + g];
    }
    double value(int s, int g) const {
        double v = at(s, 0, g);
        for (int a = 1; a < kNumGridActions; ++a) v = std::max(v, at(s, a, g));
        return v;
    }
};

inline TabularQ value_iteration(const EnvConfig& grid, double gamma, double r_step, double r_goal,
                                double tol) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("value_iteration: gamma in (0, 1)");
    const int n = grid.num_cells();
    TabularQ q;
    q.n = n;
    q.gamma = gamma;
    q.r_step = r_step;
    q.r_goal = r_goal;
    q.values.assign(static_cast<size_t>(n) * kNumGridActions * n, 0.0);

    std::vector<int> next(static_cast<size_t>(n) * kNumGridActions);
    std::vector<uint8_t> free(n);
    for (int c = 0; c < n; ++c) {
        const int cx = c % grid.grid_size;
        const int cy = c / grid.grid_size;
        free[c] = !grid.is_wall(cx, cy);
        for (int a = 0; a < kNumGridActions; ++a) {
            const auto [nx, ny] = detail::grid_step_cell(grid, cx, cy, a);
            next[static_cast<size_t>(c) * kNumGridActions + a] = grid.cell_index(nx, ny);
        }
    }

    for (int sweep = 0; sweep < 100000; ++sweep) {
        double delta = 0.0;
        for (int g = 0; g < n; ++g) {
            if (!free[g]) continue;
            for (int s = 0; s < n; ++s) {
                if (!free[s]) continue;
                for (int a = 0; a < kNumGridActions; ++a) {
                    double target;
                    if (s == g) {
                        target = r_goal;  // absorbed at the goal
                    } else {
                        const int ns = next[static_cast<size_t>(s) * kNumGridActions + a];
                        target = ns == g ? r_goal : r_step + gamma * q.value(ns, g);
                    }
                    const double diff = std::abs(target - q.at(s, a, g));
                    if (diff > delta) delta = diff;
                    q.at(s, a, g) = target;
                }
            }
        }
        q.sweep_deltas.push_back(delta);
        if (delta < tol) break;
    }
    return q;
}

struct IdentityReport {
    bool passed = false;
    double max_deviation = 0.0;
    int worst_s = -1, worst_a = -1, worst_g = -1;  // triple behind max_deviation
    size_t checked = 0;
    size_t unreachable = 0;              // flagged, not asserted
    double max_unreachable_q_gap = 0.0;  // |Q - q_inf| over unreachable triples
};

// Applies the closed-form Q -> distance inversion to every table entry and
// compares against the BFS after-action distance.
inline IdentityReport check_identity(const TabularQ& q, const EnvConfig& grid, double tol) {
    DistanceConfig cfg;
    cfg.gamma = q.gamma;
    cfg.r_step = q.r_step;
    cfg.r_goal = q.r_goal;
    const double q_inf = q_lower_limit(cfg);

    IdentityReport rep;
    const int n = grid.num_cells();
    for (int g = 0; g < n; ++g) {
        if (grid.is_wall(g % grid.grid_size, g / grid.grid_size)) continue;
        const std::vector<int> dist = bfs_distances_to(grid, g % grid.grid_size, g / grid.grid_size);
        for (int s = 0; s < n; ++s) {
            if (grid.is_wall(s % grid.grid_size, s / grid.grid_size)) continue;
            for (int a = 0; a < kNumGridActions; ++a) {
                const auto [nx, ny] =
                    detail::grid_step_cell(grid, s % grid.grid_size, s / grid.grid_size, a);
                const int expected = s == g ? 0 : dist[grid.cell_index(nx, ny)];
                if (expected < 0) {
                    ++rep.unreachable;
                    rep.max_unreachable_q_gap =
                        std::max(rep.max_unreachable_q_gap, std::abs(q.at(s, a, g) - q_inf));
                    continue;
                }
                const DistanceEstimate est = distance_from_q(q.at(s, a, g), cfg);
                const double dev = std::abs(est.steps - static_cast<double>(expected));
                ++rep.checked;
                if (dev > rep.max_deviation) {
                    rep.max_deviation = dev;
                    rep.worst_s = s;
                    rep.worst_a = a;
                    rep.worst_g = g;
                }
            }
        }
    }
    rep.passed = rep.max_deviation < tol;
    return rep;
}

// Random wall layout for oracle stress tests. Density is the fraction of
// blocked cells; the layout is whatever the seed produces (unreachable
// regions are fine, the checks skip them).
inline std::vector<uint8_t> random_walls(int grid_size, double density, uint64_t seed) {
    Rng rng(seed);
    std::vector<uint8_t> walls(static_cast<size_t>(grid_size) * grid_size, 0);
    for (auto& w : walls) w = rng.uniform() < density ? 1 : 0;
    return walls;
}

}  // namespace goalreach
