#include <catch2/catch_amalgamated.hpp>

#include "goalreach/oracle.hpp"

using namespace goalreach;

namespace {

EnvConfig grid(int n, std::vector<uint8_t> walls = {}) {
    EnvConfig cfg = default_env_config(EnvKind::gridworld);
    cfg.grid_size = n;
    cfg.walls = std::move(walls);
    cfg.reset_region = {{0.0, double(n - 1)}, {0.0, double(n - 1)}};
    return cfg;
}

// Independent shortest-path oracle: dynamic programming over explicit
// path lengths with its own neighbor logic (no shared code with BFS).
int brute_force_steps(const EnvConfig& g, int sx, int sy, int gx, int gy, int max_len) {
    std::vector<int> best(g.num_cells(), max_len + 1);
    best[g.cell_index(sx, sy)] = 0;
    for (int len = 0; len < max_len; ++len) {
        bool changed = false;
        for (int y = 0; y < g.grid_size; ++y)
            for (int x = 0; x < g.grid_size; ++x) {
                if (best[g.cell_index(x, y)] != len) continue;
                const int cand[4][2] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
                for (const auto& c : cand) {
                    int nx = c[0], ny = c[1];
                    if (nx < 0 || ny < 0 || nx >= g.grid_size || ny >= g.grid_size || g.is_wall(nx, ny)) {
                        nx = x;
                        ny = y;
                    }
                    if (best[g.cell_index(nx, ny)] > len + 1) {
                        best[g.cell_index(nx, ny)] = len + 1;
                        changed = true;
                    }
                }
            }
        if (!changed) break;
    }
    return best[g.cell_index(gx, gy)];
}

}  // namespace

TEST_CASE("bfs: start equals goal") {
    const EnvConfig g = grid(4);
    CHECK(bfs_distance(g, 2, 2, 2, 2) == 0);
}

TEST_CASE("bfs: open 3x3 corner to corner is Manhattan") {
    const EnvConfig g = grid(3);
    CHECK(bfs_distance(g, 0, 0, 2, 2) == 4);
}

TEST_CASE("bfs: wall column with one gap forces the detour") {
    // 5x5, wall at x = 2 for y in 0..3, gap at (2, 4).
    std::vector<uint8_t> walls(25, 0);
    for (int y = 0; y <= 3; ++y) walls[y * 5 + 2] = 1;
    const EnvConfig g = grid(5, walls);
    const auto d = bfs_distance(g, 0, 0, 4, 0);
    REQUIRE(d.has_value());
    CHECK(*d == brute_force_steps(g, 0, 0, 4, 0, 12));
    CHECK(*d == 12);
}

TEST_CASE("bfs: symmetric on undirected grids") {
    const EnvConfig g = grid(6, random_walls(6, 0.2, 99));
    for (int s = 0; s < 36; ++s)
        for (int t = 0; t < 36; ++t) {
            if (g.is_wall(s % 6, s / 6) || g.is_wall(t % 6, t / 6)) continue;
            CHECK(bfs_distance(g, s % 6, s / 6, t % 6, t / 6) ==
                  bfs_distance(g, t % 6, t / 6, s % 6, s / 6));
        }
}

TEST_CASE("bfs: unreachable is a value, not an error") {
    // Fully walled-off corner.
    std::vector<uint8_t> walls(16, 0);
    walls[1] = walls[4] = walls[5] = 1;
    const EnvConfig g = grid(4, walls);
    CHECK_FALSE(bfs_distance(g, 0, 0, 3, 3).has_value());
}

TEST_CASE("value iteration: (0,1) rewards recover gamma^bfs-after-action") {
    const EnvConfig g = grid(5, random_walls(5, 0.15, 7));
    const TabularQ q = value_iteration(g, 0.8, 0.0, 1.0, 1e-10);
    const IdentityReport rep = check_identity(q, g, 1e-6);
    CHECK(rep.passed);
    CHECK(rep.checked > 0);
    CHECK(rep.max_deviation < 1e-6);
}

TEST_CASE("value iteration: shaped rewards, one step from goal") {
    const EnvConfig g = grid(4);
    const TabularQ q = value_iteration(g, 0.8, 1.0, 10.0, 1e-12);
    // Action moving straight into the goal cell scores exactly r_goal.
    const int goal = g.cell_index(2, 1);
    const int from = g.cell_index(1, 1);
    CHECK(q.at(from, 0, goal) == Catch::Approx(10.0).margin(1e-9));  // +x enters the goal
    // One remaining step: r_step + gamma * r_goal = 9.
    const int two_away = g.cell_index(0, 1);
    CHECK(q.at(two_away, 0, goal) == Catch::Approx(9.0).margin(1e-9));
}

TEST_CASE("value iteration: sup-norm change contracts by gamma per sweep") {
    const EnvConfig g = grid(5);
    const TabularQ q = value_iteration(g, 0.8, 1.0, 10.0, 1e-10);
    for (size_t i = 1; i + 1 < q.sweep_deltas.size(); ++i) {
        if (q.sweep_deltas[i] == 0.0) break;
        CHECK(q.sweep_deltas[i + 1] <= 0.8 * q.sweep_deltas[i] + 1e-12);
    }
}

TEST_CASE("value iteration: ten-cell chain matches the closed form") {
    // Carve a 1x10 corridor out of a 10x10 grid.
    std::vector<uint8_t> walls(100, 1);
    for (int x = 0; x < 10; ++x) walls[x] = 0;  // row y = 0 free
    const EnvConfig g = grid(10, walls);
    DistanceConfig dc;
    dc.gamma = 0.8;
    dc.r_step = 1.0;
    dc.r_goal = 10.0;
    const TabularQ q = value_iteration(g, dc.gamma, dc.r_step, dc.r_goal, 1e-12);
    const int goal = g.cell_index(9, 0);
    for (int x = 0; x < 9; ++x) {
        // Moving right from cell x leaves 8 - x steps after the action.
        const double expect = q_from_distance(8 - x, dc);
        CHECK(q.at(g.cell_index(x, 0), 0, goal) == Catch::Approx(expect).margin(1e-9));
        const DistanceEstimate est = distance_from_q(q.at(g.cell_index(x, 0), 0, goal), dc);
        CHECK(est.steps == Catch::Approx(8.0 - x).margin(1e-9));
        CHECK_FALSE(est.clamped);
    }
}

TEST_CASE("check_identity: exact input passes at 1e-6 and unreachables are flagged") {
    std::vector<uint8_t> walls(36, 0);
    walls[1] = walls[6] = walls[7] = 1;  // seal off the (0,0) corner
    const EnvConfig g = grid(6, walls);
    const TabularQ q = value_iteration(g, 0.8, 0.0, 1.0, 1e-10);
    const IdentityReport rep = check_identity(q, g, 1e-6);
    CHECK(rep.passed);
    CHECK(rep.unreachable > 0);
    CHECK(rep.max_unreachable_q_gap < 1e-9);  // Q sits exactly at q_inf = 0
    CHECK(rep.worst_s >= 0);                  // worst triple is always named
}
