#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vne_admit/env.hpp"
#include "vne_admit/error.hpp"
#include "vne_admit/mlp.hpp"
#include "vne_admit/rng.hpp"

namespace vne_admit {

enum class PolicyMode { training, evaluation };

struct Transition {
    Observation observation;
    Action action = Action::reject;
    double reward = 0.0;
    Observation next_observation;
    bool segment_end = false;
};

/// Admission policy. decide() is the evaluation-mode decision and must be deterministic and
/// safe to call concurrently; act()/observe() may carry learning state.
class Policy {
public:
    virtual ~Policy() = default;

    virtual std::string name() const = 0;
    virtual Action decide(const Observation& obs) const = 0;
    virtual Action act(const Observation& obs, bool /*explore*/) { return decide(obs); }
    virtual void observe(const Transition& /*t*/) {}

    PolicyMode mode() const noexcept { return mode_; }
    void set_mode(PolicyMode m) noexcept { mode_ = m; }

private:
    PolicyMode mode_ = PolicyMode::evaluation;
};

/// First-come-first-serve baseline. Stateless.
class AlwaysAccept final : public Policy {
public:
    std::string name() const override { return "always-accept"; }
    Action decide(const Observation&) const override { return Action::accept; }
};

// ---------------------------------------------------------------------------
// Replay

class ReplayBuffer {
public:
    struct Entry {
        std::shared_ptr<const Observation> observation;
        Action action;
        double reward;
        std::shared_ptr<const Observation> next_observation;
        bool segment_end;
    };

    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity_ == 0) throw std::invalid_argument("replay capacity must be > 0");
        entries_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
    }

    std::size_t size() const noexcept { return entries_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }

    /// Oldest entry is overwritten once full.
    void push(Entry e) {
        if (entries_.size() < capacity_) {
            entries_.push_back(std::move(e));
        } else {
            entries_[head_] = std::move(e);
            head_ = (head_ + 1) % capacity_;
        }
    }

    /// Entry by age: 0 = oldest retained.
    const Entry& at(std::size_t age) const { return entries_.at((head_ + age) % entries_.size()); }

    std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const {
        std::vector<std::size_t> idx(batch);
        for (auto& i : idx) i = rng.uniform_int<std::size_t>(0, entries_.size() - 1);
        return idx;
    }

    const Entry& raw(std::size_t i) const { return entries_.at(i); }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::vector<Entry> entries_;
};

// ---------------------------------------------------------------------------
// Temporal-difference machinery (free functions so the gradient can be checked in isolation)

struct TdBatch {
    Matrix states;       // features x batch
    Matrix next_states;  // features x batch
    std::vector<int> actions;
    Vector rewards;
    std::vector<bool> segment_end;
};

/// Double-estimator targets: the online net picks the next action, the target net scores it.
inline Vector td_targets(const Mlp& online, const Mlp& target, const TdBatch& b, double discount) {
    const Matrix q_online = online.forward(b.next_states);
    const Matrix q_target = target.forward(b.next_states);
    Vector y(b.rewards.size());
    for (Eigen::Index k = 0; k < y.size(); ++k) {
        const Eigen::Index best = q_online(1, k) >= q_online(0, k) ? 1 : 0;
        const bool end = b.segment_end[static_cast<std::size_t>(k)];
        y(k) = b.rewards(k) + (end ? 0.0 : discount * q_target(best, k));
    }
    return y;
}

/// Mean over the batch of 0.5 * (Q(s, a) - y)^2.
inline double td_loss(const Mlp& net, const Matrix& states, const std::vector<int>& actions, const Vector& targets) {
    const Matrix q = net.forward(states);
    double loss = 0.0;
    for (Eigen::Index k = 0; k < q.cols(); ++k) {
        const double d = q(actions[static_cast<std::size_t>(k)], k) - targets(k);
        loss += 0.5 * d * d;
    }
    return loss / static_cast<double>(q.cols());
}

struct TdGradient {
    std::vector<Mlp::Layer> grads;
    double loss = 0.0;
    double max_abs_q = 0.0;
};

inline void td_gradient(const Mlp& net, const Matrix& states, const std::vector<int>& actions, const Vector& targets,
                        TdGradient& out, Mlp::Cache& cache) {
    const Matrix q = net.forward(states, cache);
    const double inv_n = 1.0 / static_cast<double>(q.cols());
    Matrix dq = Matrix::Zero(q.rows(), q.cols());
    out.loss = 0.0;
    out.max_abs_q = q.cwiseAbs().maxCoeff();
    for (Eigen::Index k = 0; k < q.cols(); ++k) {
        const int a = actions[static_cast<std::size_t>(k)];
        const double d = q(a, k) - targets(k);
        out.loss += 0.5 * d * d * inv_n;
        dq(a, k) = d * inv_n;
    }
    net.backward(cache, dq, out.grads);
}

inline TdGradient td_gradient(const Mlp& net, const Matrix& states, const std::vector<int>& actions,
                              const Vector& targets) {
    TdGradient out;
    Mlp::Cache cache;
    td_gradient(net, states, actions, targets, out, cache);
    return out;
}

// ---------------------------------------------------------------------------
// Q-learner

struct QLearnerConfig {
    std::vector<std::size_t> hidden{64, 64};
    double learning_rate = 1e-3;
    double discount = 0.99;
    std::size_t replay_capacity = 50'000;
    std::size_t batch_size = 64;
    std::size_t target_sync = 1000;  // gradient updates between target copies
    std::size_t warmup = 1000;       // transitions stored before the first update
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    double epsilon_fraction = 0.2;   // share of training steps spent annealing
    double divergence_limit = 1e6;

    void validate() const {
        if (hidden.empty()) throw std::invalid_argument("learner.hidden must list at least one layer");
        for (auto h : hidden)
            if (h == 0) throw std::invalid_argument("learner.hidden sizes must be > 0");
        if (!(learning_rate > 0)) throw std::invalid_argument("learner.lr must be > 0");
        if (!(discount >= 0.0 && discount < 1.0)) throw std::invalid_argument("learner.discount must be in [0, 1)");
        if (replay_capacity == 0 || batch_size == 0) throw std::invalid_argument("learner replay/batch must be > 0");
        if (target_sync == 0) throw std::invalid_argument("learner.target_sync must be > 0");
        if (!(epsilon_start >= 0 && epsilon_start <= 1 && epsilon_end >= 0 && epsilon_end <= 1))
            throw std::invalid_argument("learner epsilon values must be in [0, 1]");
        if (!(epsilon_fraction >= 0 && epsilon_fraction <= 1))
            throw std::invalid_argument("learner.epsilon_fraction must be in [0, 1]");
    }
};

inline double epsilon_at(const QLearnerConfig& cfg, std::int64_t step, std::int64_t total_steps) {
    const double horizon = cfg.epsilon_fraction * static_cast<double>(total_steps);
    if (horizon <= 0.0 || static_cast<double>(step) >= horizon) return cfg.epsilon_end;
    const double frac = static_cast<double>(step) / horizon;
    return cfg.epsilon_start + frac * (cfg.epsilon_end - cfg.epsilon_start);
}

/// Per-feature multipliers applied to raw observations before they reach the network.
inline Vector observation_scale(const EnvConfig& cfg) {
    const auto layout = ObservationLayout{cfg.network.node_count, static_cast<std::size_t>(cfg.network.slots_per_step)};
    const TemplateRegistry reg(cfg.templates);
    Vector scale = Vector::Ones(static_cast<Eigen::Index>(layout.size()));
    const double cap = cfg.network.capacity > 0 ? cfg.network.capacity : 1.0;
    for (NodeId p = 0; p < layout.nodes; ++p) scale(static_cast<Eigen::Index>(layout.capacity(p))) = 1.0 / cap;

    const double total = cfg.network.capacity * static_cast<double>(layout.nodes);
    const double max_active = std::max(1.0, std::floor(total / reg.min_total_demand()));
    const double max_links = std::max<double>(1.0, static_cast<double>(reg.max_links()));
    for (std::size_t k = layout.activation_begin(); k < layout.activation_end(); k += 2) {
        scale(static_cast<Eigen::Index>(k)) = 1.0 / max_active;
        scale(static_cast<Eigen::Index>(k + 1)) = 1.0 / max_links;
    }
    scale(static_cast<Eigen::Index>(layout.template_id())) = 1.0 / std::max<double>(1.0, static_cast<double>(reg.size() - 1));
    scale(static_cast<Eigen::Index>(layout.lifetime())) = 1.0 / cfg.vnr.lifetime_max;
    scale(static_cast<Eigen::Index>(layout.priority())) = 1.0 / cfg.vnr.priority_max;
    return scale;
}

/// Value-based admission policy: two-output network over the scaled observation, trained with
/// experience replay, a periodically synced target network and double-estimator targets.
class QLearner final : public Policy {
public:
    QLearner(EnvSignature signature, Vector input_scale, QLearnerConfig cfg, std::uint64_t seed)
        : signature_(signature),
          scale_(std::move(input_scale)),
          cfg_((cfg.validate(), std::move(cfg))),
          replay_(cfg_.replay_capacity),
          explore_rng_(Rng(seed).split(Stream::exploration)),
          replay_rng_(Rng(seed).split(Stream::replay)) {
        if (static_cast<std::size_t>(scale_.size()) != signature_.observation_size)
            throw SignatureMismatch("input scale length does not match observation size");
        std::vector<std::size_t> sizes{signature_.observation_size};
        sizes.insert(sizes.end(), cfg_.hidden.begin(), cfg_.hidden.end());
        sizes.push_back(2);
        Rng init = Rng(seed).split(Stream::init);
        online_ = Mlp(sizes, init);
        target_ = online_;
        optimizer_ = Adam(online_, cfg_.learning_rate);
    }

    /// Rebuilds a frozen learner from stored parameters.
    QLearner(EnvSignature signature, Vector input_scale, QLearnerConfig cfg, Mlp network)
        : signature_(signature),
          scale_(std::move(input_scale)),
          cfg_(std::move(cfg)),
          replay_(cfg_.replay_capacity),
          online_(std::move(network)),
          target_(online_),
          optimizer_(online_, cfg_.learning_rate) {
        if (online_.input_size() != signature_.observation_size || online_.output_size() != 2)
            throw SignatureMismatch("network dimensions do not match the stored observation size");
        if (static_cast<std::size_t>(scale_.size()) != signature_.observation_size)
            throw SignatureMismatch("input scale length does not match observation size");
    }

    std::string name() const override { return "qlearner"; }

    Action decide(const Observation& obs) const override {
        const auto q = action_values(obs);
        return q[1] >= q[0] ? Action::accept : Action::reject;
    }

    Action act(const Observation& obs, bool explore) override {
        if (explore && mode() == PolicyMode::training && explore_rng_.uniform_real() < epsilon_)
            return explore_rng_.bernoulli(0.5) ? Action::accept : Action::reject;
        return decide(obs);
    }

    void observe(const Transition& t) override {
        observe(std::make_shared<const Observation>(t.observation), t.action, t.reward,
                std::make_shared<const Observation>(t.next_observation), t.segment_end);
    }

    /// Stores a transition and, once past warm-up, performs one gradient update.
    void observe(std::shared_ptr<const Observation> obs, Action action, double reward,
                 std::shared_ptr<const Observation> next, bool segment_end) {
        replay_.push({std::move(obs), action, reward, std::move(next), segment_end});
        if (mode() == PolicyMode::training && replay_.size() >= std::max(cfg_.warmup, cfg_.batch_size)) update();
    }

    /// Q(s, reject), Q(s, accept).
    std::array<double, 2> action_values(const Observation& obs) const {
        check_size(obs);
        const Matrix q = online_.forward(scaled(obs));
        return {q(0, 0), q(1, 0)};
    }

    void update() {
        const auto idx = replay_.sample_indices(cfg_.batch_size, replay_rng_);
        fill_batch(idx);
        const Vector y = td_targets(online_, target_, batch_, cfg_.discount);
        td_gradient(online_, batch_.states, batch_.actions, y, grad_, cache_);
        if (!(grad_.max_abs_q <= cfg_.divergence_limit))
            throw TrainingDiverged("action values exceeded " + std::to_string(cfg_.divergence_limit) + " after " +
                                   std::to_string(updates_) + " updates");
        optimizer_.step(online_, grad_.grads);
        last_loss_ = grad_.loss;
        if (++updates_ % cfg_.target_sync == 0) target_ = online_;
    }

    Matrix scaled(const Observation& obs) const {
        Matrix x(static_cast<Eigen::Index>(obs.size()), 1);
        for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, 0) = obs[static_cast<std::size_t>(i)] * scale_(i);
        return x;
    }

    double epsilon() const noexcept { return epsilon_; }
    void set_epsilon(double e) noexcept { epsilon_ = e; }
    std::size_t updates() const noexcept { return updates_; }
    double last_loss() const noexcept { return last_loss_; }
    const Mlp& online() const noexcept { return online_; }
    const Mlp& target() const noexcept { return target_; }
    const Vector& input_scale() const noexcept { return scale_; }
    const QLearnerConfig& config() const noexcept { return cfg_; }
    const EnvSignature& signature() const noexcept { return signature_; }
    const ReplayBuffer& replay() const noexcept { return replay_; }

private:
    void check_size(const Observation& obs) const {
        if (obs.size() != signature_.observation_size)
            throw SignatureMismatch("observation length " + std::to_string(obs.size()) + ", policy expects " +
                                    std::to_string(signature_.observation_size));
    }

    void fill_batch(const std::vector<std::size_t>& idx) {
        const auto n = static_cast<Eigen::Index>(idx.size());
        const auto f = static_cast<Eigen::Index>(signature_.observation_size);
        batch_.states.resize(f, n);
        batch_.next_states.resize(f, n);
        batch_.actions.resize(idx.size());
        batch_.rewards.resize(n);
        batch_.segment_end.resize(idx.size());
        for (Eigen::Index k = 0; k < n; ++k) {
            const auto& e = replay_.raw(idx[static_cast<std::size_t>(k)]);
            const auto& s = *e.observation;
            const auto& s2 = *e.next_observation;
            for (Eigen::Index i = 0; i < f; ++i) {
                batch_.states(i, k) = s[static_cast<std::size_t>(i)] * scale_(i);
                batch_.next_states(i, k) = s2[static_cast<std::size_t>(i)] * scale_(i);
            }
            batch_.actions[static_cast<std::size_t>(k)] = static_cast<int>(e.action);
            batch_.rewards(k) = e.reward;
            batch_.segment_end[static_cast<std::size_t>(k)] = e.segment_end;
        }
    }

    EnvSignature signature_;
    Vector scale_;
    QLearnerConfig cfg_;
    ReplayBuffer replay_;
    Rng explore_rng_;
    Rng replay_rng_;
    Mlp online_;
    Mlp target_;
    Adam optimizer_;
    double epsilon_ = 1.0;
    std::size_t updates_ = 0;
    double last_loss_ = 0.0;
    TdBatch batch_;
    TdGradient grad_;
    Mlp::Cache cache_;
};

// ---------------------------------------------------------------------------
// Training loop

struct TrainLogEntry {
    std::int64_t step = 0;  // steps completed
    double mean_reward = 0.0;
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    double epsilon = 0.0;
    double loss = 0.0;
};

struct TrainResult {
    std::unique_ptr<QLearner> policy;
    std::vector<TrainLogEntry> log;
};

inline constexpr std::int64_t train_log_interval = 1000;

/// Runs `total_steps` environment steps with epsilon-greedy exploration, one gradient update per
/// step after warm-up. Episodes are `env_cfg.episode_steps` long; episode k is seeded from
/// (seed, k). Throws TrainingDiverged if action values run away.
inline TrainResult train(const EnvConfig& env_cfg, const QLearnerConfig& qcfg, std::int64_t total_steps,
                         std::uint64_t seed, const std::function<void(const TrainLogEntry&)>& on_log = {}) {
    Environment env(env_cfg);
    auto learner = std::make_unique<QLearner>(env.signature(), observation_scale(env_cfg), qcfg, seed);
    learner->set_mode(PolicyMode::training);

    TrainResult result;
    std::uint64_t episode = 0;
    auto obs = std::make_shared<const Observation>(env.reset(derive_seed(seed, {0x7261696eULL, episode})));

    TrainLogEntry window;
    double reward_sum = 0.0;
    std::int64_t window_steps = 0;
    for (std::int64_t step = 0; step < total_steps; ++step) {
        learner->set_epsilon(epsilon_at(qcfg, step, total_steps));
        const Action a = learner->act(*obs, true);
        auto out = env.step(a);
        auto next = std::make_shared<const Observation>(std::move(out.observation));
        learner->observe(obs, a, out.reward, next, out.done);

        reward_sum += out.reward;
        ++window_steps;
        switch (out.label) {
            case DecisionLabel::true_positive: ++window.tp; break;
            case DecisionLabel::false_positive: ++window.fp; break;
            case DecisionLabel::false_negative: ++window.fn; break;
            case DecisionLabel::true_negative: ++window.tn; break;
        }
        if ((step + 1) % train_log_interval == 0 || step + 1 == total_steps) {
            window.step = step + 1;
            window.mean_reward = reward_sum / static_cast<double>(window_steps);
            window.epsilon = learner->epsilon();
            window.loss = learner->last_loss();
            result.log.push_back(window);
            if (on_log) on_log(window);
            window = {};
            reward_sum = 0.0;
            window_steps = 0;
        }

        if (out.done) {
            ++episode;
            obs = std::make_shared<const Observation>(env.reset(derive_seed(seed, {0x7261696eULL, episode})));
        } else {
            obs = std::move(next);
        }
    }
    learner->set_mode(PolicyMode::evaluation);
    result.policy = std::move(learner);
    return result;
}

// ---------------------------------------------------------------------------
// Policy files

inline constexpr const char* policy_format = "vne-admit-policy";
inline constexpr int policy_format_version = 1;

inline nlohmann::json to_json(const QLearner& q) {
    using nlohmann::json;
    json layers = json::array();
    for (const auto& l : q.online().layers()) {
        std::vector<double> w(static_cast<std::size_t>(l.weights.size()));
        // row-major on disk
        std::size_t k = 0;
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w[k++] = l.weights(r, c);
        layers.push_back({{"inputs", l.weights.cols()},
                          {"outputs", l.weights.rows()},
                          {"weights", w},
                          {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
    }
    const auto& c = q.config();
    return json{{"format", policy_format},
                {"version", policy_format_version},
                {"kind", q.name()},
                {"signature",
                 {{"nodes", q.signature().nodes},
                  {"slots", q.signature().slots},
                  {"observation_size", q.signature().observation_size}}},
                {"input_scale", std::vector<double>(q.input_scale().data(), q.input_scale().data() + q.input_scale().size())},
                {"learner",
                 {{"hidden", c.hidden},
                  {"lr", c.learning_rate},
                  {"discount", c.discount},
                  {"replay_capacity", c.replay_capacity},
                  {"batch_size", c.batch_size},
                  {"target_sync", c.target_sync},
                  {"warmup", c.warmup}}},
                {"activation", "relu"},
                {"layers", layers}};
}

inline void save_policy(const QLearner& q, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw PolicyFileError("cannot write policy file " + path);
    out << to_json(q).dump() << '\n';
    if (!out) throw PolicyFileError("failed writing policy file " + path);
}

inline std::unique_ptr<QLearner> qlearner_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != policy_format) throw PolicyFileError("not a policy file");
        const int version = j.at("version").get<int>();
        if (version != policy_format_version)
            throw PolicyFileError("unsupported policy file version " + std::to_string(version));
        if (j.at("kind").get<std::string>() != "qlearner") throw PolicyFileError("unsupported policy kind");

        EnvSignature sig{j.at("signature").at("nodes").get<std::size_t>(), j.at("signature").at("slots").get<std::size_t>(),
                         j.at("signature").at("observation_size").get<std::size_t>()};
        if (sig.observation_size != ObservationLayout{sig.nodes, sig.slots}.size())
            throw SignatureMismatch("policy signature is inconsistent: observation size does not match nodes/slots");

        const auto scale_v = j.at("input_scale").get<std::vector<double>>();
        Vector scale = Eigen::Map<const Vector>(scale_v.data(), static_cast<Eigen::Index>(scale_v.size()));

        QLearnerConfig cfg;
        const auto& lj = j.at("learner");
        cfg.hidden = lj.at("hidden").get<std::vector<std::size_t>>();
        cfg.learning_rate = lj.at("lr").get<double>();
        cfg.discount = lj.at("discount").get<double>();
        cfg.replay_capacity = lj.at("replay_capacity").get<std::size_t>();
        cfg.batch_size = lj.at("batch_size").get<std::size_t>();
        cfg.target_sync = lj.at("target_sync").get<std::size_t>();
        cfg.warmup = lj.at("warmup").get<std::size_t>();

        std::vector<Mlp::Layer> layers;
        for (const auto& lj2 : j.at("layers")) {
            const auto in = lj2.at("inputs").get<Eigen::Index>();
            const auto out = lj2.at("outputs").get<Eigen::Index>();
            const auto w = lj2.at("weights").get<std::vector<double>>();
            const auto b = lj2.at("bias").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(w.size()) != in * out || static_cast<Eigen::Index>(b.size()) != out)
                throw PolicyFileError("layer parameter count does not match its shape");
            Mlp::Layer layer{Matrix(out, in), Eigen::Map<const Vector>(b.data(), out)};
            std::size_t k = 0;
            for (Eigen::Index r = 0; r < out; ++r)
                for (Eigen::Index c = 0; c < in; ++c) layer.weights(r, c) = w[k++];
            layers.push_back(std::move(layer));
        }
        if (layers.empty()) throw PolicyFileError("policy has no layers");
        if (static_cast<std::size_t>(layers.front().weights.cols()) != sig.observation_size)
            throw SignatureMismatch("input layer expects " + std::to_string(layers.front().weights.cols()) +
                                    " features but the signature says " + std::to_string(sig.observation_size));
        Mlp net;
        try {
            net = Mlp(std::move(layers));
        } catch (const std::invalid_argument& e) {
            throw PolicyFileError(e.what());
        }
        return std::make_unique<QLearner>(sig, std::move(scale), std::move(cfg), std::move(net));
    } catch (const nlohmann::json::exception& e) {
        throw PolicyFileError(std::string("malformed policy file: ") + e.what());
    }
}

/// Loads a policy and checks it against `expected` (if given).
inline std::unique_ptr<QLearner> load_policy(const std::string& path, const EnvSignature* expected = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PolicyFileError("cannot open policy file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw PolicyFileError("corrupt policy file " + path + ": " + e.what());
    }
    auto q = qlearner_from_json(j);
    if (expected && !(q->signature() == *expected)) {
        std::ostringstream os;
        os << "policy " << path << " was trained for P=" << q->signature().nodes << ", T=" << q->signature().slots
           << " (observation length " << q->signature().observation_size << ") but the environment has P="
           << expected->nodes << ", T=" << expected->slots << " (observation length " << expected->observation_size << ")";
        throw SignatureMismatch(os.str());
    }
    return q;
}

}  // namespace vne_admit
