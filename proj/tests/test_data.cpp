#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <fstream>

#include "goalreach/dataset.hpp"
#include "goalreach/relabel.hpp"
#include "test_util.hpp"

using namespace goalreach;

namespace {

OfflineDataset tiny_dataset_with_keys(const std::vector<std::vector<Vec>>& keys_per_traj) {
    OfflineDataset ds;
    ds.env_config = default_env_config(EnvKind::pointmass2d);
    for (const auto& keys : keys_per_traj) {
        Trajectory t;
        for (size_t i = 0; i < keys.size(); ++i) {
            t.observations.push_back(keys[i]);  // obs mirror the keys here
            t.actuated_keys.push_back(keys[i]);
            if (i + 1 < keys.size()) t.actions.push_back(Vec{0.0, 0.0});
        }
        ds.trajectories.push_back(std::move(t));
    }
    return ds;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("filtered_step: plain smoothing arithmetic") {
    CHECK(filtered_step(1.0, 0.0, 0.5) == 0.5);
    CHECK(filtered_step(0.0, 2.0, 0.5) == 1.0);
    CHECK(filtered_step(0.4, 0.8, 1.0) == 0.8);  // beta = 1 forgets the past
}

TEST_CASE("filtered sampler: beta = 1 reproduces iid clipped Gaussians") {
    const Vec stdev{0.6, 0.3};
    FilteredActionSampler sampler(stdev, 1.0);
    Rng a(123), b(123);
    for (int t = 0; t < 100; ++t) {
        const Vec x = sampler.next(a);
        for (size_t d = 0; d < stdev.size(); ++d)
            CHECK(x[d] == clip(b.normal(0.0, stdev[d]), -1.0, 1.0));
    }
}

TEST_CASE("filtered sampler: beta = 0.5 actions are positively autocorrelated") {
    FilteredActionSampler sampler(Vec{0.6}, 0.5);
    Rng rng(7);
    const int n = 10000;
    Vec xs(n);
    for (int t = 0; t < n; ++t) xs[t] = sampler.next(rng)[0];
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double num = 0.0, den = 0.0;
    for (int t = 0; t + 1 < n; ++t) num += (xs[t] - mean) * (xs[t + 1] - mean);
    for (int t = 0; t < n; ++t) den += (xs[t] - mean) * (xs[t] - mean);
    const double lag1 = num / den;
    CHECK(lag1 > 0.3);  // theoretical 1 - beta = 0.5, reduced slightly by clipping
}

TEST_CASE("filtered sampler: beta = 1 is zero-mean") {
    FilteredActionSampler sampler(Vec{0.6}, 1.0);
    Rng rng(11);
    const int n = 10000;
    double mean = 0.0;
    for (int t = 0; t < n; ++t) mean += sampler.next(rng)[0];
    mean /= n;
    CHECK(std::abs(mean) < 4.0 * 0.6 / std::sqrt(double(n)));
}

TEST_CASE("collect_random: shapes, determinism, and rejection of empty runs") {
    const EnvConfig cfg = default_env_config(EnvKind::planarpush);
    const OfflineDataset ds = collect_random(cfg, 20, {0.6, 0.6}, 0.5, 42);
    REQUIRE(ds.trajectories.size() == 20);
    for (const auto& t : ds.trajectories) {
        CHECK(t.observations.size() == 31);
        CHECK(t.actions.size() == 30);
        CHECK(t.actuated_keys.size() == 31);
    }
    CHECK(ds.obs_dim() == 4);
    CHECK(ds.key_dim() == 2);

    const OfflineDataset ds2 = collect_random(cfg, 20, {0.6, 0.6}, 0.5, 42);
    CHECK(ds.trajectories[7].observations[13] == ds2.trajectories[7].observations[13]);
    CHECK(ds.trajectories[19].actions[29] == ds2.trajectories[19].actions[29]);

    CHECK_THROWS_AS(collect_random(cfg, 0, {0.6, 0.6}, 0.5, 1), std::invalid_argument);
    CHECK_THROWS_AS(collect_random(cfg, 1, {0.6}, 0.5, 1), std::invalid_argument);
}

TEST_CASE("geometric_offset: degenerate p and the 1-based law") {
    Rng rng(5);
    for (int i = 0; i < 50; ++i) CHECK(geometric_offset(1.0, rng) == 1);

    Rng rng2(6);
    const int n = 100000;
    int ones = 0;
    for (int i = 0; i < n; ++i)
        if (geometric_offset(0.3, rng2) == 1) ++ones;
    CHECK(std::abs(double(ones) / n - 0.3) < 0.01);
}

TEST_CASE("geometric_offset: chi-square goodness of fit at 1e5 samples") {
    const double p = 0.3;
    const int n = 100000;
    const int bins = 16;  // 1..15 plus tail
    std::vector<int> counts(bins, 0);
    Rng rng(17);
    for (int i = 0; i < n; ++i) {
        const int d = geometric_offset(p, rng);
        counts[std::min(d - 1, bins - 1)] += 1;
    }
    double stat = 0.0;
    double tail_prob = 1.0;
    for (int k = 0; k < bins - 1; ++k) {
        const double prob = p * std::pow(1.0 - p, k);
        tail_prob -= prob;
        const double expect = n * prob;
        stat += (counts[k] - expect) * (counts[k] - expect) / expect;
    }
    const double expect_tail = n * tail_prob;
    stat += (counts[bins - 1] - expect_tail) * (counts[bins - 1] - expect_tail) / expect_tail;
    CHECK(stat < testutil::chi2_critical(bins - 1));
}

TEST_CASE("sample_reached_goal: clamped at the trajectory end") {
    Rng rng(3);
    for (int i = 0; i < 50; ++i) CHECK(sample_reached_goal(30, 29, 0.3, rng) == 1);
    for (int i = 0; i < 50; ++i) CHECK(sample_reached_goal(30, 25, 0.3, rng) <= 5);
    CHECK_THROWS_AS(sample_reached_goal(30, 30, 0.3, rng), std::invalid_argument);
}

TEST_CASE("knn index: full indexing, subsampling, and membership") {
    const EnvConfig cfg = default_env_config(EnvKind::pointmass2d);
    const OfflineDataset ds = collect_random(cfg, 10, {0.6, 0.6}, 0.5, 1);
    const size_t total = ds.total_observations();

    const KnnIndex full = build_knn_index(ds, total + 100, 1);
    CHECK(full.size() == total);

    const KnnIndex sub = build_knn_index(ds, 40, 2);
    CHECK(sub.size() == 40);
    for (size_t r = 0; r < sub.size(); ++r) {
        const auto& [i, t] = sub.refs[r];
        CHECK(sub.keys.get_row(r) == ds.trajectories[i].actuated_keys[t]);
    }

    OfflineDataset empty;
    CHECK_THROWS_AS(build_knn_index(empty, 10, 1), std::invalid_argument);
}

TEST_CASE("sample_negative_goal: exact nearest neighbors with exclusion") {
    const OfflineDataset ds = tiny_dataset_with_keys({
        {{0.0, 0.0}, {1.0, 1.0}},
        {{0.3, 0.3}, {2.0, 2.0}},
    });
    const KnnIndex index = build_knn_index(ds, 100, 1);
    Rng rng(4);

    // Query identical to an indexed key in the other trajectory, k = 1.
    const auto [ti, tt] = sample_negative_goal(index, {0.3, 0.3}, 0, 1, rng);
    CHECK(ti == 1);
    CHECK(tt == 0);

    // Nearest of {(0,0), (1,1)} to (0.1, 0.1) is (0,0).
    const auto [ti2, tt2] = sample_negative_goal(index, {0.1, 0.1}, 1, 1, rng);
    CHECK(ti2 == 0);
    CHECK(tt2 == 0);

    // Exclusion: querying from trajectory 0 never returns trajectory 0.
    for (int i = 0; i < 50; ++i) {
        const auto [gi, gt] = sample_negative_goal(index, {0.0, 0.0}, 0, 3, rng);
        CHECK(gi == 1);
    }
}

TEST_CASE("sample_negative_goal: result is exactly the nearest on a full scan") {
    const EnvConfig cfg = default_env_config(EnvKind::pointmass2d);
    const OfflineDataset ds = collect_random(cfg, 8, {0.6, 0.6}, 0.5, 9);
    const KnnIndex index = build_knn_index(ds, 1000000, 1);
    Rng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        Vec key{rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4)};
        const auto [gi, gt] = sample_negative_goal(index, key, 0, 1, rng);
        const double got = squared_l2(ds.trajectories[gi].actuated_keys[gt], key);
        for (size_t r = 0; r < index.size(); ++r) {
            if (index.refs[r].first == 0) continue;
            CHECK(got <= squared_l2(index.keys.get_row(r), key) + 1e-15);
        }
    }
}

TEST_CASE("negative mining: mined goals are closer in key space than random pairs") {
    const EnvConfig cfg = default_env_config(EnvKind::pointmass2d);
    const OfflineDataset ds = collect_random(cfg, 60, {0.6, 0.6}, 0.5, 21);
    const KnnIndex index = build_knn_index(ds, 1000000, 1);
    Rng rng(22);
    const int n = 10000;
    double mined = 0.0, random_pairs = 0.0;
    for (int i = 0; i < n; ++i) {
        const uint32_t traj = uint32_t(rng.uniform_index(ds.trajectories.size()));
        const size_t t = rng.uniform_index(ds.trajectories[traj].actuated_keys.size());
        const Vec& key = ds.trajectories[traj].actuated_keys[t];

        const auto [gi, gt] = sample_negative_goal(index, key, traj, 16, rng);
        mined += l2_distance(ds.trajectories[gi].actuated_keys[gt], key);

        uint32_t oj = traj;
        while (oj == traj) oj = uint32_t(rng.uniform_index(ds.trajectories.size()));
        const size_t ot = rng.uniform_index(ds.trajectories[oj].actuated_keys.size());
        random_pairs += l2_distance(ds.trajectories[oj].actuated_keys[ot], key);
    }
    CHECK(mined / n < random_pairs / n);
}

TEST_CASE("make_batch: source counts, terminal bookkeeping, rewards") {
    const EnvConfig cfg = default_env_config(EnvKind::pointmass2d);
    const OfflineDataset ds = collect_random(cfg, 30, {0.6, 0.6}, 0.5, 31);
    const KnnIndex index = build_knn_index(ds, 2000, 1);
    Rng rng(32);

    const RelabeledBatch b = make_batch(ds, index, 64, 0.3, 0.5, 1.0, 10.0, rng);
    size_t reached = 0, negative = 0, terminals = 0;
    for (size_t i = 0; i < b.size(); ++i) {
        if (b.source[i] == GoalSource::reached) ++reached;
        else ++negative;
        if (b.terminal[i]) {
            ++terminals;
            CHECK(b.source[i] == GoalSource::reached);
            CHECK(b.reward[i] == 10.0);
            // Terminal means the goal was relabeled from offset 1, i.e. s_{t+1}.
            CHECK(b.goals.get_row(i) == b.next_obs.get_row(i));
        } else {
            CHECK(b.reward[i] == 1.0);
        }
    }
    CHECK(reached == 32);
    CHECK(negative == 32);
    CHECK(terminals > 0);

    const RelabeledBatch all_reached = make_batch(ds, index, 64, 0.3, 1.0, 1.0, 10.0, rng);
    for (size_t i = 0; i < all_reached.size(); ++i)
        CHECK(all_reached.source[i] == GoalSource::reached);
}

TEST_CASE("save/load: bit-exact round trip") {
    const EnvConfig cfg = default_env_config(EnvKind::planarpush);
    const OfflineDataset ds = collect_random(cfg, 5, {0.6, 0.6}, 0.5, 77);
    const std::string p1 = "/tmp/goalreach_ds_a";
    const std::string p2 = "/tmp/goalreach_ds_b";
    save(ds, p1);
    const OfflineDataset loaded = load(p1);
    save(loaded, p2);
    CHECK(slurp(p1) == slurp(p2));
    CHECK(slurp(p1 + ".blob") == slurp(p2 + ".blob"));
    CHECK(loaded.trajectories.size() == ds.trajectories.size());
    CHECK(loaded.env_config.kind == cfg.kind);
    CHECK(loaded.collection_seed == ds.collection_seed);
}

TEST_CASE("load: truncated blob is an error, not a partial dataset") {
    const EnvConfig cfg = default_env_config(EnvKind::pointmass2d);
    const OfflineDataset ds = collect_random(cfg, 3, {0.6, 0.6}, 0.5, 1);
    const std::string p = "/tmp/goalreach_ds_trunc";
    save(ds, p);
    const std::string blob = slurp(p + ".blob");
    std::ofstream f(p + ".blob", std::ios::binary);
    f.write(blob.data(), static_cast<std::streamsize>(blob.size() / 2));
    f.close();
    CHECK_THROWS_WITH(load(p), Catch::Matchers::ContainsSubstring("truncated"));
}

TEST_CASE("load: version mismatch is an explicit incompatibility error") {
    const EnvConfig cfg = default_env_config(EnvKind::pointmass2d);
    const OfflineDataset ds = collect_random(cfg, 2, {0.6, 0.6}, 0.5, 1);
    const std::string p = "/tmp/goalreach_ds_ver";
    save(ds, p);
    std::string manifest = slurp(p);
    const size_t at = manifest.find("version 1");
    manifest.replace(at, 9, "version 9");
    std::ofstream(p, std::ios::binary) << manifest;
    CHECK_THROWS_WITH(load(p), Catch::Matchers::ContainsSubstring("incompatible"));
}

TEST_CASE("load: malformed manifest reports the offending line") {
    const std::string p = "/tmp/goalreach_ds_bad";
    std::ofstream(p) << "format goalreach-dataset\nversion 1\nwhatkey 3\n";
    CHECK_THROWS_WITH(load(p), Catch::Matchers::ContainsSubstring(":3:"));
}
