#pragma once

// Offline trajectory datasets: collection with the temporally filtered
// random policy, and a lossless two-file disk format (text manifest plus
// a little-endian float32 blob).

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "goalreach/common.hpp"
#include "goalreach/env.hpp"

namespace goalreach {

struct Trajectory {
    std::vector<Obs> observations;    // length T+1
    std::vector<Vec> actions;         // length T
    std::vector<Vec> actuated_keys;   // length T+1
    std::vector<EnvState> env_states; // optional, length T+1 when kept

    size_t length() const { return actions.size(); }
};

struct OfflineDataset {
    std::vector<Trajectory> trajectories;
    EnvConfig env_config;
    uint64_t collection_seed = 0;

    size_t obs_dim() const { return trajectories.at(0).observations.at(0).size(); }
    size_t action_dim() const { return trajectories.at(0).actions.at(0).size(); }
    size_t key_dim() const { return trajectories.at(0).actuated_keys.at(0).size(); }
    size_t total_observations() const {
        size_t n = 0;
        for (const auto& t : trajectories) n += t.observations.size();
        return n;
    }
};

// One step of the smoothing recursion: x_t = beta * u_t + (1 - beta) * x_{t-1}.
inline double filtered_step(double x_prev, double u, double beta) {
    return beta * u + (1.0 - beta) * x_prev;
}

// Temporally correlated exploration noise built on filtered_step with
// u_t ~ N(0, diag(stdev^2)); emitted actions are clip(x_t, -1, 1) while
// the recursion itself runs on the unclipped sequence.
class FilteredActionSampler {
public:
    FilteredActionSampler(Vec stdev, double beta) : stdev_(std::move(stdev)), beta_(beta), x_(stdev_.size(), 0.0) {
        if (beta_ <= 0.0 || beta_ > 1.0) throw std::invalid_argument("filtered sampler: beta in (0, 1]");
    }

    Vec next(Rng& rng) {
        for (size_t d = 0; d < x_.size(); ++d)
            x_[d] = filtered_step(x_[d], rng.normal(0.0, stdev_[d]), beta_);
        return clip(x_, -1.0, 1.0);
    }

    void reset_state() { std::fill(x_.begin(), x_.end(), 0.0); }

private:
    Vec stdev_;
    double beta_;
    Vec x_;
};

inline Trajectory rollout_random_episode(const EnvConfig& cfg, const Vec& stdev, double beta,
                                         uint64_t reset_seed, uint64_t action_seed,
                                         bool keep_states = false) {
    Trajectory traj;
    EnvState state = reset(cfg, reset_seed);
    Rng rng(action_seed);
    FilteredActionSampler sampler(stdev, beta);
    traj.observations.push_back(observe(state, cfg));
    traj.actuated_keys.push_back(actuated_key(state));
    if (keep_states) traj.env_states.push_back(state);
    for (int t = 0; t < cfg.max_episode_len; ++t) {
        const Vec action = sampler.next(rng);
        state = step(state, action, cfg);
        traj.actions.push_back(action);
        traj.observations.push_back(observe(state, cfg));
        traj.actuated_keys.push_back(actuated_key(state));
        if (keep_states) traj.env_states.push_back(state);
    }
    return traj;
}

inline OfflineDataset collect_random(const EnvConfig& cfg, size_t n_episodes, const Vec& stdev,
                                     double beta, uint64_t seed, bool keep_states = false) {
    validate(cfg);
    if (n_episodes == 0) throw std::invalid_argument("collect_random: n_episodes must be >= 1 (empty dataset)");
    if (stdev.size() != static_cast<size_t>(cfg.action_dim))
        throw std::invalid_argument("collect_random: stdev length != action_dim");
    if (beta <= 0.0 || beta > 1.0) throw std::invalid_argument("collect_random: beta in (0, 1]");
    OfflineDataset ds;
    ds.env_config = cfg;
    ds.collection_seed = seed;
    ds.trajectories.reserve(n_episodes);
    for (size_t e = 0; e < n_episodes; ++e) {
        // Independent per-episode streams; merge order is episode order.
        const uint64_t reset_seed = Rng::mix(seed, 2 * e);
        const uint64_t action_seed = Rng::mix(seed, 2 * e + 1);
        ds.trajectories.push_back(rollout_random_episode(cfg, stdev, beta, reset_seed, action_seed, keep_states));
    }
    return ds;
}

// Train/test/val split over trajectory indices, in declared order.
struct DatasetSplit {
    std::vector<size_t> train, test, val;
};

inline DatasetSplit split_dataset(size_t n, double train_frac = 0.9, double test_frac = 0.05) {
    DatasetSplit s;
    const size_t a = static_cast<size_t>(train_frac * n);
    const size_t b = static_cast<size_t>((train_frac + test_frac) * n);
    for (size_t i = 0; i < n; ++i) {
        if (i < a) s.train.push_back(i);
        else if (i < b) s.test.push_back(i);
        else s.val.push_back(i);
    }
    return s;
}

namespace detail {

inline void write_f32_le(std::string& out, double x) {
    const float f = static_cast<float>(x);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    out.push_back(static_cast<char>(bits & 0xff));
    out.push_back(static_cast<char>((bits >> 8) & 0xff));
    out.push_back(static_cast<char>((bits >> 16) & 0xff));
    out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

inline double read_f32_le(const std::string& in, size_t offset) {
    uint32_t bits = (static_cast<uint32_t>(static_cast<uint8_t>(in[offset]))) |
                    (static_cast<uint32_t>(static_cast<uint8_t>(in[offset + 1])) << 8) |
                    (static_cast<uint32_t>(static_cast<uint8_t>(in[offset + 2])) << 16) |
                    (static_cast<uint32_t>(static_cast<uint8_t>(in[offset + 3])) << 24);
    float f;
    std::memcpy(&f, &bits, 4);
    return static_cast<double>(f);
}

inline std::string dataset_blob_path(const std::string& path) { return path + ".blob"; }

}  // namespace detail

inline void save(const OfflineDataset& ds, const std::string& path) {
    if (ds.trajectories.empty()) throw std::invalid_argument("save: empty dataset");
    const EnvConfig& cfg = ds.env_config;
    const size_t episodes = ds.trajectories.size();
    const size_t steps = ds.trajectories[0].length();
    const size_t obs_dim = ds.obs_dim();
    const size_t act_dim = ds.action_dim();
    const size_t key_dim = ds.key_dim();
    for (const auto& t : ds.trajectories)
        if (t.length() != steps) throw std::invalid_argument("save: ragged episode lengths");

    // Blob layout: [episode][field][timestep][dim], fields in order
    // observations, actions, actuated_keys.
    std::string blob;
    blob.reserve(episodes * (((steps + 1) * (obs_dim + key_dim)) + steps * act_dim) * 4);
    for (const auto& t : ds.trajectories) {
        for (const auto& o : t.observations)
            for (double x : o) detail::write_f32_le(blob, x);
        for (const auto& a : t.actions)
            for (double x : a) detail::write_f32_le(blob, x);
        for (const auto& k : t.actuated_keys)
            for (double x : k) detail::write_f32_le(blob, x);
    }

    std::ostringstream m;
    m << "format goalreach-dataset\n";
    m << "version 1\n";
    m << "kind " << to_string(cfg.kind) << "\n";
    m << "grid_size " << cfg.grid_size << "\n";
    if (!cfg.walls.empty()) {
        m << "walls ";
        for (uint8_t w : cfg.walls) m << (w ? '1' : '0');
        m << "\n";
    }
    m << "arena";
    for (const auto& b : cfg.arena_bounds) m << " " << b.lo << " " << b.hi;
    m << "\n";
    m << "action_dim " << cfg.action_dim << "\n";
    m << "max_episode_len " << cfg.max_episode_len << "\n";
    m << "reset";
    for (const auto& b : cfg.reset_region) m << " " << b.lo << " " << b.hi;
    m << "\n";
    m << "step_scale " << cfg.step_scale << "\n";
    m << "agent_radius " << cfg.agent_radius << "\n";
    m << "object_radius " << cfg.object_radius << "\n";
    m << "episodes " << episodes << "\n";
    m << "steps " << steps << "\n";
    m << "obs_dim " << obs_dim << "\n";
    m << "key_dim " << key_dim << "\n";
    m << "collection_seed " << ds.collection_seed << "\n";
    m << "blob_bytes " << blob.size() << "\n";
    m << "end\n";

    std::ofstream mf(path, std::ios::binary);
    if (!mf) throw std::runtime_error("save: cannot open " + path);
    mf << m.str();
    mf.close();
    std::ofstream bf(detail::dataset_blob_path(path), std::ios::binary);
    if (!bf) throw std::runtime_error("save: cannot open " + detail::dataset_blob_path(path));
    bf.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

inline OfflineDataset load(const std::string& path) {
    std::ifstream mf(path, std::ios::binary);
    if (!mf) throw std::runtime_error("load: cannot open " + path);

    OfflineDataset ds;
    EnvConfig cfg;
    size_t episodes = 0, steps = 0, obs_dim = 0, key_dim = 0, blob_bytes = 0;
    bool saw_end = false;
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& what) {
        throw std::runtime_error("load: " + path + ":" + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(mf, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "format") {
            std::string v;
            ls >> v;
            if (v != "goalreach-dataset") fail("not a goalreach dataset (format '" + v + "')");
        } else if (key == "version") {
            int v = -1;
            ls >> v;
            if (!ls) fail("bad version");
            if (v != 1) fail("incompatible dataset version " + std::to_string(v) + " (expected 1)");
        } else if (key == "kind") {
            std::string v;
            ls >> v;
            cfg.kind = env_kind_from_string(v);
        } else if (key == "grid_size") {
            ls >> cfg.grid_size;
        } else if (key == "walls") {
            std::string v;
            ls >> v;
            cfg.walls.clear();
            for (char c : v) cfg.walls.push_back(c == '1' ? 1 : 0);
        } else if (key == "arena") {
            cfg.arena_bounds.clear();
            double lo, hi;
            while (ls >> lo >> hi) cfg.arena_bounds.push_back({lo, hi});
        } else if (key == "action_dim") {
            ls >> cfg.action_dim;
        } else if (key == "max_episode_len") {
            ls >> cfg.max_episode_len;
        } else if (key == "reset") {
            cfg.reset_region.clear();
            double lo, hi;
            while (ls >> lo >> hi) cfg.reset_region.push_back({lo, hi});
        } else if (key == "step_scale") {
            ls >> cfg.step_scale;
        } else if (key == "agent_radius") {
            ls >> cfg.agent_radius;
        } else if (key == "object_radius") {
            ls >> cfg.object_radius;
        } else if (key == "episodes") {
            ls >> episodes;
        } else if (key == "steps") {
            ls >> steps;
        } else if (key == "obs_dim") {
            ls >> obs_dim;
        } else if (key == "key_dim") {
            ls >> key_dim;
        } else if (key == "collection_seed") {
            ls >> ds.collection_seed;
        } else if (key == "blob_bytes") {
            ls >> blob_bytes;
        } else if (key == "end") {
            saw_end = true;
            break;
        } else {
            fail("unknown manifest key '" + key + "'");
        }
        if (ls.fail() && key != "arena" && key != "reset") fail("malformed value for '" + key + "'");
    }
    if (!saw_end) fail("truncated manifest (missing 'end')");
    if (episodes == 0 || obs_dim == 0) fail("manifest missing episode/dimension records");

    std::ifstream bf(detail::dataset_blob_path(path), std::ios::binary);
    if (!bf) throw std::runtime_error("load: cannot open " + detail::dataset_blob_path(path));
    std::string blob((std::istreambuf_iterator<char>(bf)), std::istreambuf_iterator<char>());
    const size_t act_dim = static_cast<size_t>(cfg.action_dim);
    const size_t expected =
        episodes * (((steps + 1) * (obs_dim + key_dim)) + steps * act_dim) * 4;
    if (blob.size() != expected || blob_bytes != expected)
        throw std::runtime_error("load: truncated or oversized blob at byte offset " +
                                 std::to_string(std::min(blob.size(), expected)) + " (expected " +
                                 std::to_string(expected) + " bytes, found " +
                                 std::to_string(blob.size()) + ")");

    ds.env_config = cfg;
    ds.trajectories.resize(episodes);
    size_t off = 0;
    auto read_vec = [&](size_t dim) {
        Vec v(dim);
        for (size_t d = 0; d < dim; ++d, off += 4) v[d] = detail::read_f32_le(blob, off);
        return v;
    };
    for (size_t e = 0; e < episodes; ++e) {
        Trajectory& t = ds.trajectories[e];
        for (size_t i = 0; i <= steps; ++i) t.observations.push_back(read_vec(obs_dim));
        for (size_t i = 0; i < steps; ++i) t.actions.push_back(read_vec(act_dim));
        for (size_t i = 0; i <= steps; ++i) t.actuated_keys.push_back(read_vec(key_dim));
    }
    return ds;
}

}  // namespace goalreach
