#pragma once

// Model checkpoints: a text manifest (layer sizes, activation, step count,
// optional extras) plus a little-endian float32 parameter blob in layer
// order. Round trips are bit-exact at float32 precision.

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "goalreach/baselines.hpp"
#include "goalreach/dataset.hpp"
#include "goalreach/distance.hpp"
#include "goalreach/dynamics.hpp"
#include "goalreach/mlp.hpp"

namespace goalreach {

inline void save_mlp(const Mlp& net, long step_count, const std::string& path,
                     const std::map<std::string, std::string>& extra = {}) {
    std::string blob;
    for (size_t l = 0; l < net.num_layers(); ++l) {
        for (double x : net.weights[l].data) detail::write_f32_le(blob, x);
        for (double x : net.biases[l]) detail::write_f32_le(blob, x);
    }
    std::ostringstream m;
    m << "format goalreach-mlp\n";
    m << "version 1\n";
    m << "layers";
    for (size_t s : net.layer_sizes) m << " " << s;
    m << "\n";
    m << "activation "
      << (net.output_activation == OutputActivation::tanh_out ? "tanh" : "identity") << "\n";
    m << "step " << step_count << "\n";
    for (const auto& [k, v] : extra) m << "x " << k << " " << v << "\n";
    m << "blob_bytes " << blob.size() << "\n";
    m << "end\n";

    std::ofstream mf(path, std::ios::binary);
    if (!mf) throw std::runtime_error("save_mlp: cannot open " + path);
    mf << m.str();
    mf.close();
    std::ofstream bf(path + ".blob", std::ios::binary);
    if (!bf) throw std::runtime_error("save_mlp: cannot open " + path + ".blob");
    bf.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

struct MlpCheckpoint {
    Mlp net;
    long step = 0;
    std::map<std::string, std::string> extra;
};

inline MlpCheckpoint load_mlp(const std::string& path) {
    std::ifstream mf(path, std::ios::binary);
    if (!mf) throw std::runtime_error("load_mlp: cannot open " + path);
    MlpCheckpoint out;
    std::vector<size_t> layers;
    std::string activation = "identity";
    size_t blob_bytes = 0;
    bool saw_end = false;
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& what) {
        throw std::runtime_error("load_mlp: " + path + ":" + std::to_string(lineno) + ": " + what);
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
            if (v != "goalreach-mlp") fail("not a goalreach mlp checkpoint");
        } else if (key == "version") {
            int v = -1;
            ls >> v;
            if (v != 1) fail("incompatible checkpoint version " + std::to_string(v) + " (expected 1)");
        } else if (key == "layers") {
            size_t s;
            while (ls >> s) layers.push_back(s);
        } else if (key == "activation") {
            ls >> activation;
        } else if (key == "step") {
            ls >> out.step;
        } else if (key == "x") {
            std::string k, v;
            ls >> k >> v;
            out.extra[k] = v;
        } else if (key == "blob_bytes") {
            ls >> blob_bytes;
        } else if (key == "end") {
            saw_end = true;
            break;
        } else {
            fail("unknown manifest key '" + key + "'");
        }
    }
    if (!saw_end) fail("truncated manifest (missing 'end')");
    if (layers.size() < 2) fail("missing layer sizes");

    std::ifstream bf(path + ".blob", std::ios::binary);
    if (!bf) throw std::runtime_error("load_mlp: cannot open " + path + ".blob");
    std::string blob((std::istreambuf_iterator<char>(bf)), std::istreambuf_iterator<char>());
    size_t expected = 0;
    for (size_t l = 0; l + 1 < layers.size(); ++l) expected += (layers[l] * layers[l + 1] + layers[l + 1]) * 4;
    if (blob.size() != expected || blob_bytes != expected)
        throw std::runtime_error("load_mlp: truncated blob (expected " + std::to_string(expected) +
                                 " bytes, found " + std::to_string(blob.size()) + ")");

    out.net.layer_sizes = layers;
    out.net.output_activation =
        activation == "tanh" ? OutputActivation::tanh_out : OutputActivation::identity;
    size_t off = 0;
    for (size_t l = 0; l + 1 < layers.size(); ++l) {
        Matrix w(layers[l + 1], layers[l]);
        for (double& x : w.data) {
            x = detail::read_f32_le(blob, off);
            off += 4;
        }
        Vec b(layers[l + 1]);
        for (double& x : b) {
            x = detail::read_f32_le(blob, off);
            off += 4;
        }
        out.net.weights.push_back(std::move(w));
        out.net.biases.push_back(std::move(b));
    }
    return out;
}

namespace detail {

inline std::map<std::string, std::string> distance_config_echo(const DistanceConfig& cfg) {
    std::map<std::string, std::string> m;
    auto put = [&](const std::string& k, double v) {
        std::ostringstream s;
        s.precision(17);
        s << v;
        m[k] = s.str();
    };
    put("gamma", cfg.gamma);
    put("r_step", cfg.r_step);
    put("r_goal", cfg.r_goal);
    put("polyak", cfg.polyak);
    put("actor_noise_sigma", cfg.actor_noise_sigma);
    put("actor_noise_clip", cfg.actor_noise_clip);
    put("cql_tau", cfg.cql_tau);
    put("cql_n_actions", cfg.cql_n_actions);
    put("cql_alpha_lr", cfg.cql_alpha_lr);
    put("learning_rate", cfg.learning_rate);
    put("batch_size", static_cast<double>(cfg.batch_size));
    put("train_steps", static_cast<double>(cfg.train_steps));
    put("p_geom", cfg.p_geom);
    put("mix", cfg.mix);
    put("knn_k", static_cast<double>(cfg.knn_k));
    put("hidden_units", static_cast<double>(cfg.hidden_units));
    put("hidden_layers", static_cast<double>(cfg.hidden_layers));
    return m;
}

inline void distance_config_read(const std::map<std::string, std::string>& m, DistanceConfig& cfg) {
    auto get = [&](const std::string& k, double fallback) {
        auto it = m.find(k);
        return it == m.end() ? fallback : std::stod(it->second);
    };
    cfg.gamma = get("gamma", cfg.gamma);
    cfg.r_step = get("r_step", cfg.r_step);
    cfg.r_goal = get("r_goal", cfg.r_goal);
    cfg.polyak = get("polyak", cfg.polyak);
    cfg.actor_noise_sigma = get("actor_noise_sigma", cfg.actor_noise_sigma);
    cfg.actor_noise_clip = get("actor_noise_clip", cfg.actor_noise_clip);
    cfg.cql_tau = get("cql_tau", cfg.cql_tau);
    cfg.cql_n_actions = static_cast<int>(get("cql_n_actions", cfg.cql_n_actions));
    cfg.cql_alpha_lr = get("cql_alpha_lr", cfg.cql_alpha_lr);
    cfg.learning_rate = get("learning_rate", cfg.learning_rate);
    cfg.batch_size = static_cast<size_t>(get("batch_size", static_cast<double>(cfg.batch_size)));
    cfg.train_steps = static_cast<size_t>(get("train_steps", static_cast<double>(cfg.train_steps)));
    cfg.p_geom = get("p_geom", cfg.p_geom);
    cfg.mix = get("mix", cfg.mix);
    cfg.knn_k = static_cast<size_t>(get("knn_k", static_cast<double>(cfg.knn_k)));
    cfg.hidden_units = static_cast<size_t>(get("hidden_units", static_cast<double>(cfg.hidden_units)));
    cfg.hidden_layers = static_cast<size_t>(get("hidden_layers", static_cast<double>(cfg.hidden_layers)));
}

}  // namespace detail

// Ensemble checkpoint: five network checkpoints plus a meta file holding
// cql_alpha and the training configuration echo.
inline void save_ensemble(const QEnsemble& e, const DistanceConfig& cfg, const std::string& prefix) {
    auto extra = detail::distance_config_echo(cfg);
    std::ostringstream alpha;
    alpha.precision(17);
    alpha << e.cql_alpha;
    extra["cql_alpha"] = alpha.str();
    extra["obs_dim"] = std::to_string(e.obs_dim);
    extra["action_dim"] = std::to_string(e.action_dim);
    save_mlp(e.q1, e.q1_opt.step, prefix + ".q1", extra);
    save_mlp(e.q2, e.q2_opt.step, prefix + ".q2");
    save_mlp(e.q1_target, 0, prefix + ".q1t");
    save_mlp(e.q2_target, 0, prefix + ".q2t");
    save_mlp(e.actor, e.actor_opt.step, prefix + ".actor");
}

inline QEnsemble load_ensemble(const std::string& prefix, DistanceConfig* cfg_out = nullptr) {
    MlpCheckpoint q1 = load_mlp(prefix + ".q1");
    QEnsemble e;
    e.q1 = std::move(q1.net);
    e.q2 = load_mlp(prefix + ".q2").net;
    e.q1_target = load_mlp(prefix + ".q1t").net;
    e.q2_target = load_mlp(prefix + ".q2t").net;
    e.actor = load_mlp(prefix + ".actor").net;
    DistanceConfig cfg;
    detail::distance_config_read(q1.extra, cfg);
    if (auto it = q1.extra.find("cql_alpha"); it != q1.extra.end()) e.cql_alpha = std::stod(it->second);
    if (auto it = q1.extra.find("obs_dim"); it != q1.extra.end()) e.obs_dim = std::stoul(it->second);
    if (auto it = q1.extra.find("action_dim"); it != q1.extra.end()) e.action_dim = std::stoul(it->second);
    e.q1_opt = make_adam(e.q1, cfg.learning_rate);
    e.q2_opt = make_adam(e.q2, cfg.learning_rate);
    e.actor_opt = make_adam(e.actor, cfg.learning_rate);
    if (cfg_out != nullptr) *cfg_out = cfg;
    return e;
}

inline void save_forward_model(const ForwardModel& m, const std::string& path) {
    save_mlp(m.net, m.opt.step, path,
             {{"h_train", std::to_string(m.h_train)},
              {"obs_dim", std::to_string(m.obs_dim)},
              {"action_dim", std::to_string(m.action_dim)}});
}

inline ForwardModel load_forward_model(const std::string& path) {
    MlpCheckpoint ck = load_mlp(path);
    ForwardModel m;
    m.net = std::move(ck.net);
    m.opt = make_adam(m.net);
    m.h_train = std::stoi(ck.extra.at("h_train"));
    m.obs_dim = std::stoul(ck.extra.at("obs_dim"));
    m.action_dim = std::stoul(ck.extra.at("action_dim"));
    return m;
}

inline void save_gcbc(const GcbcPolicy& p, const std::string& path) {
    save_mlp(p.net, p.opt.step, path,
             {{"obs_dim", std::to_string(p.obs_dim)}, {"action_dim", std::to_string(p.action_dim)}});
}

inline GcbcPolicy load_gcbc(const std::string& path) {
    MlpCheckpoint ck = load_mlp(path);
    GcbcPolicy p;
    p.net = std::move(ck.net);
    p.opt = make_adam(p.net);
    p.obs_dim = std::stoul(ck.extra.at("obs_dim"));
    p.action_dim = std::stoul(ck.extra.at("action_dim"));
    return p;
}

inline void save_temporal(const TemporalRegressor& t, const std::string& path) {
    save_mlp(t.net, t.opt.step, path,
             {{"maxdist", std::to_string(t.maxdist)}, {"obs_dim", std::to_string(t.obs_dim)}});
}

inline TemporalRegressor load_temporal(const std::string& path) {
    MlpCheckpoint ck = load_mlp(path);
    TemporalRegressor t;
    t.net = std::move(ck.net);
    t.opt = make_adam(t.net);
    t.maxdist = std::stoi(ck.extra.at("maxdist"));
    t.obs_dim = std::stoul(ck.extra.at("obs_dim"));
    return t;
}

}  // namespace goalreach
