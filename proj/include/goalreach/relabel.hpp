#pragma once

// Hindsight goal relabeling: geometric offsets to reached goals, exact
// kNN mining of "negative" goals keyed on the actuated component, and
// training batch assembly.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "goalreach/common.hpp"
#include "goalreach/dataset.hpp"

namespace goalreach {

// Raw geometric draw on {1, 2, ...}; exposed separately so distribution
// tests can see the pre-clamp law.
inline int geometric_offset(double p, Rng& rng) { return rng.geometric(p); }

// Offset to a reached goal: Delta ~ Geom(p) clamped so t + Delta stays
// inside the trajectory.
inline int sample_reached_goal(size_t traj_len, size_t t, double p, Rng& rng) {
    if (t >= traj_len) throw std::invalid_argument("sample_reached_goal: t must be < traj_len");
    const int delta = geometric_offset(p, rng);
    const int max_delta = static_cast<int>(traj_len - t);
    return std::min(delta, max_delta);
}

struct KnnIndex {
    Matrix keys;  // one row per indexed observation
    std::vector<std::pair<uint32_t, uint32_t>> refs;  // (trajectory, timestep)

    size_t size() const { return refs.size(); }
};

inline KnnIndex build_knn_index(const OfflineDataset& ds, size_t max_points, uint64_t seed) {
    if (ds.trajectories.empty()) throw std::invalid_argument("build_knn_index: empty dataset");
    if (max_points == 0) throw std::invalid_argument("build_knn_index: max_points must be >= 1");

    std::vector<std::pair<uint32_t, uint32_t>> all;
    for (uint32_t i = 0; i < ds.trajectories.size(); ++i)
        for (uint32_t t = 0; t < ds.trajectories[i].actuated_keys.size(); ++t)
            all.emplace_back(i, t);

    if (max_points < all.size()) {
        // Uniform subsample without replacement (partial Fisher-Yates),
        // then restored to scan order.
        Rng rng(seed);
        for (size_t i = 0; i < max_points; ++i)
            std::swap(all[i], all[i + rng.uniform_index(all.size() - i)]);
        all.resize(max_points);
        std::sort(all.begin(), all.end());
    }

    KnnIndex index;
    index.refs = std::move(all);
    const size_t dim = ds.key_dim();
    index.keys = Matrix(index.refs.size(), dim);
    for (size_t r = 0; r < index.refs.size(); ++r) {
        const auto& [i, t] = index.refs[r];
        index.keys.set_row(r, ds.trajectories[i].actuated_keys[t]);
    }
    return index;
}

// One of the k nearest indexed keys under l2, uniformly at random;
// candidates from `exclude_traj` (the query's own trajectory) are skipped.
// With fewer than k eligible points, all eligible points are used.
inline std::pair<uint32_t, uint32_t> sample_negative_goal(const KnnIndex& index, const Vec& key,
                                                          uint32_t exclude_traj, size_t k, Rng& rng) {
    if (k == 0) throw std::invalid_argument("sample_negative_goal: k must be >= 1");
    if (key.size() != index.keys.cols)
        throw std::invalid_argument("sample_negative_goal: key dimension mismatch");

    std::vector<std::pair<double, size_t>> candidates;
    candidates.reserve(index.size());
    for (size_t r = 0; r < index.size(); ++r) {
        if (index.refs[r].first == exclude_traj) continue;
        double d = 0.0;
        const double* row = index.keys.row(r);
        for (size_t j = 0; j < key.size(); ++j) {
            const double diff = row[j] - key[j];
            d += diff * diff;
        }
        candidates.emplace_back(d, r);
    }
    if (candidates.empty())
        throw std::runtime_error("sample_negative_goal: no eligible points outside the query trajectory");

    const size_t kk = std::min(k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + kk, candidates.end());
    const size_t pick = candidates[rng.uniform_index(kk)].second;
    return index.refs[pick];
}

enum class GoalSource : uint8_t { reached, negative };

struct RelabeledBatch {
    Matrix obs;       // s_t
    Matrix actions;   // a_t
    Matrix next_obs;  // s_{t+1}
    Matrix goals;     // g
    std::vector<uint8_t> terminal;  // true iff relabeled at offset Delta = 1
    Vec reward;
    std::vector<GoalSource> source;

    size_t size() const { return reward.size(); }
};

inline RelabeledBatch make_batch(const OfflineDataset& ds, const KnnIndex& index,
                                 size_t batch_size, double p, double mix, double r_step,
                                 double r_goal, Rng& rng, size_t knn_k = 16) {
    if (batch_size == 0) throw std::invalid_argument("make_batch: batch_size must be >= 1");
    const size_t n_reached = static_cast<size_t>(std::llround(mix * static_cast<double>(batch_size)));

    RelabeledBatch b;
    b.obs = Matrix(batch_size, ds.obs_dim());
    b.actions = Matrix(batch_size, ds.action_dim());
    b.next_obs = Matrix(batch_size, ds.obs_dim());
    b.goals = Matrix(batch_size, ds.obs_dim());
    b.terminal.assign(batch_size, 0);
    b.reward.assign(batch_size, 0.0);
    b.source.assign(batch_size, GoalSource::reached);

    for (size_t row = 0; row < batch_size; ++row) {
        const uint32_t i = static_cast<uint32_t>(rng.uniform_index(ds.trajectories.size()));
        const Trajectory& traj = ds.trajectories[i];
        const size_t T = traj.length();
        const size_t t = rng.uniform_index(T);
        b.obs.set_row(row, traj.observations[t]);
        b.actions.set_row(row, traj.actions[t]);
        b.next_obs.set_row(row, traj.observations[t + 1]);

        if (row < n_reached) {
            const int delta = sample_reached_goal(T, t, p, rng);
            b.goals.set_row(row, traj.observations[t + delta]);
            b.source[row] = GoalSource::reached;
            if (delta == 1) {
                b.terminal[row] = 1;
                b.reward[row] = r_goal;
            } else {
                b.reward[row] = r_step;
            }
        } else {
            const auto [gi, gt] = sample_negative_goal(index, traj.actuated_keys[t], i, knn_k, rng);
            b.goals.set_row(row, ds.trajectories[gi].observations[gt]);
            b.source[row] = GoalSource::negative;
            b.reward[row] = r_step;
        }
    }
    return b;
}

}  // namespace goalreach
