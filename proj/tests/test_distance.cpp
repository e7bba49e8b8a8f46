#include <catch2/catch_amalgamated.hpp>

#include "goalreach/distance.hpp"
#include "test_util.hpp"

using namespace goalreach;

namespace {

DistanceConfig small_cfg() {
    DistanceConfig cfg;
    cfg.hidden_units = 8;
    cfg.hidden_layers = 2;
    return cfg;
}

void set_constant_output(Mlp& net, double value) {
    for (auto& w : net.weights) w.zero();
    for (auto& b : net.biases) std::fill(b.begin(), b.end(), 0.0);
    net.biases.back().assign(net.biases.back().size(), value);
}

RelabeledBatch toy_batch(size_t n, size_t obs_dim, size_t act_dim, Rng& rng) {
    RelabeledBatch b;
    b.obs = Matrix(n, obs_dim);
    b.actions = Matrix(n, act_dim);
    b.next_obs = Matrix(n, obs_dim);
    b.goals = Matrix(n, obs_dim);
    b.terminal.assign(n, 0);
    b.reward.assign(n, 1.0);
    b.source.assign(n, GoalSource::reached);
    for (auto* m : {&b.obs, &b.actions, &b.next_obs, &b.goals})
        for (auto& x : m->data) x = rng.uniform(-1.0, 1.0);
    return b;
}

}  // namespace

TEST_CASE("distance_from_q: closed form inverts exactly for d = 0..20") {
    DistanceConfig cfg;  // gamma 0.8, rewards (1, 10)
    for (int d = 0; d <= 20; ++d) {
        const double q = q_from_distance(d, cfg);
        const DistanceEstimate est = distance_from_q(q, cfg);
        CHECK_FALSE(est.clamped);
        CHECK(est.steps == Catch::Approx(double(d)).margin(1e-9));
    }
}

TEST_CASE("distance_from_q: hand values") {
    DistanceConfig cfg;
    CHECK(distance_from_q(10.0, cfg).steps == 0.0);
    // One-step Bellman recursion: q = 1 + 0.8 * 10 = 9 -> d = 1.
    CHECK(distance_from_q(9.0, cfg).steps == Catch::Approx(1.0).margin(1e-12));

    DistanceConfig unit;
    unit.r_step = 0.0;
    unit.r_goal = 1.0;
    CHECK(distance_from_q(0.8, unit).steps == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("distance_from_q: out-of-range values clamp with a flag") {
    DistanceConfig cfg;
    const DistanceEstimate above = distance_from_q(10.5, cfg);
    CHECK(above.clamped);
    CHECK(above.steps == 0.0);
    const DistanceEstimate below = distance_from_q(q_lower_limit(cfg) - 0.1, cfg);
    CHECK(below.clamped);
    CHECK(std::isinf(below.steps));
    CHECK_FALSE(distance_from_q(7.0, cfg).clamped);
}

TEST_CASE("distance_from_q: strictly decreasing in q on (q_inf, r_goal]") {
    DistanceConfig cfg;
    double prev = std::numeric_limits<double>::infinity();
    for (double q = q_lower_limit(cfg) + 0.01; q <= cfg.r_goal; q += 0.05) {
        const double d = distance_from_q(q, cfg).steps;
        CHECK(d < prev);
        prev = d;
    }
}

TEST_CASE("config validation: reward shape must keep Q monotone") {
    DistanceConfig cfg;
    cfg.r_goal = 4.9;  // q_inf = 5 with r_step 1, gamma 0.8
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
}

TEST_CASE("td_target: terminal rows pin the goal reward") {
    Rng rng(1);
    const DistanceConfig cfg = small_cfg();
    QEnsemble e = make_q_ensemble(3, 2, cfg, rng);
    RelabeledBatch b = toy_batch(8, 3, 2, rng);
    b.terminal[2] = 1;
    b.reward[2] = 10.0;
    b.terminal[5] = 1;
    b.reward[5] = 10.0;
    Rng noise(2);
    const Vec y = td_target(b, e, cfg, noise);
    CHECK(y[2] == 10.0);
    CHECK(y[5] == 10.0);
}

TEST_CASE("td_target: bootstrap arithmetic with constant target critics") {
    Rng rng(3);
    const DistanceConfig cfg = small_cfg();
    QEnsemble e = make_q_ensemble(3, 2, cfg, rng);
    set_constant_output(e.q1_target, 5.0);
    set_constant_output(e.q2_target, 7.0);  // min picks 5
    RelabeledBatch b = toy_batch(4, 3, 2, rng);
    Rng noise(4);
    const Vec y = td_target(b, e, cfg, noise);
    for (double v : y) CHECK(v == Catch::Approx(1.0 + 0.8 * 5.0).margin(1e-12));
}

TEST_CASE("td_target: terminal targets ignore the target networks") {
    Rng rng(5);
    const DistanceConfig cfg = small_cfg();
    QEnsemble e = make_q_ensemble(3, 2, cfg, rng);
    RelabeledBatch b = toy_batch(6, 3, 2, rng);
    for (size_t i = 0; i < b.size(); ++i) {
        b.terminal[i] = 1;
        b.reward[i] = 10.0;
    }
    Rng noise_a(9);
    const Vec before = td_target(b, e, cfg, noise_a);
    for (auto& w : e.q1_target.weights) for (auto& x : w.data) x += 3.0;
    for (auto& w : e.q2_target.weights) for (auto& x : w.data) x -= 2.0;
    Rng noise_b(9);
    const Vec after = td_target(b, e, cfg, noise_b);
    CHECK(before == after);
}

TEST_CASE("smoothed target actions: zero sigma is the plain actor output") {
    Rng rng(6);
    const DistanceConfig base = small_cfg();
    DistanceConfig cfg = base;
    cfg.actor_noise_sigma = 0.0;
    QEnsemble e = make_q_ensemble(3, 2, cfg, rng);
    RelabeledBatch b = toy_batch(5, 3, 2, rng);
    Rng noise(7);
    const Matrix a = detail::smoothed_target_actions(e, b.next_obs, b.goals, cfg, noise);
    MlpWorkspace ws;
    const Matrix plain = forward_batch(e.actor, hcat(b.next_obs, b.goals), ws);
    CHECK(a.data == plain.data);
}

TEST_CASE("cql_penalty: constant Q gives R = ln(n_actions)") {
    Rng rng(8);
    const DistanceConfig cfg = small_cfg();  // cql_n_actions = 10
    QEnsemble e = make_q_ensemble(3, 2, cfg, rng);
    set_constant_output(e.q1, 4.0);
    set_constant_output(e.q2, -1.0);
    RelabeledBatch b = toy_batch(16, 3, 2, rng);
    Rng noise(9);
    const auto [r1, r2] = cql_penalty(e, b, cfg, noise);
    CHECK(r1 == Catch::Approx(std::log(10.0)).margin(1e-9));
    CHECK(r2 == Catch::Approx(std::log(10.0)).margin(1e-9));
}

TEST_CASE("cql_penalty: alpha decays toward zero while R stays below tau") {
    Rng rng(10);
    DistanceConfig cfg = small_cfg();
    cfg.cql_tau = 3.0;
    cfg.cql_alpha_lr = 0.05;
    QEnsemble e = make_q_ensemble(3, 2, cfg, rng);
    set_constant_output(e.q1, 0.0);
    set_constant_output(e.q2, 0.0);  // R = ln 10 < 3
    RelabeledBatch b = toy_batch(8, 3, 2, rng);
    double prev = e.cql_alpha;
    for (int i = 0; i < 40; ++i) {
        Rng noise(100 + i);
        cql_penalty(e, b, cfg, noise);
        CHECK(e.cql_alpha <= prev);
        CHECK(e.cql_alpha >= 0.0);
        prev = e.cql_alpha;
    }
    CHECK(e.cql_alpha < 0.97);
}

TEST_CASE("critic loss gradient matches finite differences (Bellman + CQL)") {
    Rng rng(11);
    const size_t obs_dim = 3, act_dim = 2, B = 5, N = 4;
    Mlp q = make_mlp({obs_dim + act_dim + obs_dim, 8, 8, 1}, OutputActivation::identity, rng);
    Matrix x_data(B, obs_dim + act_dim + obs_dim), x_rand(B * N, obs_dim + act_dim + obs_dim);
    for (auto& v : x_data.data) v = rng.uniform(-1.0, 1.0);
    for (auto& v : x_rand.data) v = rng.uniform(-1.0, 1.0);
    Vec y(B);
    for (auto& v : y) v = rng.uniform(0.0, 10.0);

    for (const double alpha : {0.0, 1.3}) {
        MlpGrads grads = make_grads(q);
        detail::critic_loss(q, x_data, y, x_rand, N, alpha, 3.0, &grads);
        auto loss = [&]() { return detail::critic_loss(q, x_data, y, x_rand, N, alpha, 3.0, nullptr).total; };
        CHECK(testutil::max_grad_rel_error(q, grads, loss) <= 1e-4);
    }
}

TEST_CASE("cql term alone: gradient matches finite differences") {
    Rng rng(12);
    const size_t obs_dim = 2, act_dim = 2, B = 4, N = 5;
    Mlp q = make_mlp({obs_dim + act_dim + obs_dim, 6, 1}, OutputActivation::identity, rng);
    Matrix x_data(B, obs_dim + act_dim + obs_dim), x_rand(B * N, obs_dim + act_dim + obs_dim);
    for (auto& v : x_data.data) v = rng.uniform(-1.0, 1.0);
    for (auto& v : x_rand.data) v = rng.uniform(-1.0, 1.0);
    const Vec y(B, 0.0);
    MlpGrads grads = make_grads(q);
    detail::critic_loss(q, x_data, y, x_rand, N, 1.0, 0.0, &grads, /*include_mse=*/false);
    auto loss = [&]() {
        return detail::critic_loss(q, x_data, y, x_rand, N, 1.0, 0.0, nullptr, false).total;
    };
    CHECK(testutil::max_grad_rel_error(q, grads, loss) <= 1e-4);
}

TEST_CASE("actor loss gradient matches finite differences") {
    Rng rng(13);
    const size_t obs_dim = 3, act_dim = 2, B = 4;
    Mlp q = make_mlp({obs_dim + act_dim + obs_dim, 8, 1}, OutputActivation::identity, rng);
    Mlp actor = make_mlp({obs_dim + obs_dim, 8, act_dim}, OutputActivation::tanh_out, rng);
    Matrix obs(B, obs_dim), goals(B, obs_dim);
    for (auto& v : obs.data) v = rng.uniform(-1.0, 1.0);
    for (auto& v : goals.data) v = rng.uniform(-1.0, 1.0);

    MlpGrads grads = make_grads(actor);
    detail::actor_loss(actor, q, obs, goals, &grads);
    auto loss = [&]() { return -detail::actor_loss(actor, q, obs, goals, nullptr); };
    CHECK(testutil::max_grad_rel_error(actor, grads, loss) <= 1e-4);
}

TEST_CASE("q_value: min of the twins, symmetric, pure") {
    Rng rng(14);
    const DistanceConfig cfg = small_cfg();
    QEnsemble e = make_q_ensemble(3, 2, cfg, rng);
    const Obs obs{0.1, 0.2, 0.3}, goal{-0.1, 0.0, 0.4};
    const Vec action{0.5, -0.5};
    Vec x;
    x.insert(x.end(), obs.begin(), obs.end());
    x.insert(x.end(), action.begin(), action.end());
    x.insert(x.end(), goal.begin(), goal.end());

    const double v = q_value(e, obs, action, goal);
    CHECK(v <= forward(e.q1, x)[0]);
    CHECK(v == q_value(e, obs, action, goal));

    QEnsemble swapped = e;
    std::swap(swapped.q1, swapped.q2);
    std::swap(swapped.q1_target, swapped.q2_target);
    CHECK(q_value(swapped, obs, action, goal) == v);
}

TEST_CASE("greedy_action: bounded and deterministic") {
    Rng rng(15);
    const DistanceConfig cfg = small_cfg();
    QEnsemble e = make_q_ensemble(4, 2, cfg, rng);
    for (int i = 0; i < 20; ++i) {
        Obs obs(4), goal(4);
        for (auto& v : obs) v = rng.uniform(-1.0, 1.0);
        for (auto& v : goal) v = rng.uniform(-1.0, 1.0);
        const Vec a = greedy_action(e, obs, goal);
        CHECK(a == greedy_action(e, obs, goal));
        for (double v : a) {
            CHECK(v > -1.0);
            CHECK(v < 1.0);
        }
    }
}

TEST_CASE("train_step: loss decreases on a frozen batch and invariants hold") {
    Rng rng(16);
    DistanceConfig cfg = small_cfg();
    cfg.learning_rate = 1e-3;
    QEnsemble e = make_q_ensemble(2, 2, cfg, rng);
    RelabeledBatch b = toy_batch(16, 2, 2, rng);
    b.terminal[0] = 1;
    b.reward[0] = 10.0;

    Rng train_rng(17);
    Vec mse_hist;
    for (int i = 0; i < 50; ++i) {
        const Mlp t1_before = e.q1_target;
        const Mlp q1_before = e.q1;
        const DistanceLossReport rep = train_step(e, b, cfg, train_rng);
        mse_hist.push_back(rep.q1_mse);
        CHECK(rep.cql_alpha >= 0.0);

        // Polyak bound: each target weight moves at most 0.005 * gap.
        for (size_t l = 0; l < e.q1.num_layers(); ++l)
            for (size_t j = 0; j < e.q1.weights[l].data.size(); ++j) {
                const double moved =
                    std::abs(e.q1_target.weights[l].data[j] - t1_before.weights[l].data[j]);
                const double gap =
                    std::abs(e.q1.weights[l].data[j] - t1_before.weights[l].data[j]);
                CHECK(moved <= 0.005 * gap + 1e-12);
            }
        (void)q1_before;
    }
    CHECK(mse_hist.back() < mse_hist.front());
}

TEST_CASE("train_distance: smoke run keeps alpha nonnegative and losses finite") {
    const Matrix A = [] {
        Matrix m(2, 2);
        m.at(0, 0) = 1.0;
        m.at(1, 1) = 1.0;
        return m;
    }();
    const Matrix B = [] {
        Matrix m(2, 2);
        m.at(0, 0) = 0.1;
        m.at(1, 1) = 0.1;
        return m;
    }();
    const auto ds = testutil::make_linear_dataset(A, B, 40, 20, 5);
    const KnnIndex index = build_knn_index(ds, 500, 1);
    DistanceConfig cfg = small_cfg();
    cfg.train_steps = 300;
    cfg.batch_size = 16;
    bool alpha_ok = true;
    const QEnsemble e = train_distance(ds, index, cfg, 99,
                                       [&](size_t, const DistanceLossReport& rep) {
                                           alpha_ok = alpha_ok && rep.cql_alpha >= 0.0;
                                       });
    CHECK(alpha_ok);
    CHECK(all_finite(forward(e.q1, Vec(6, 0.1))));
}
