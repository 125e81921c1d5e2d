#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vne_admit/embedder.hpp"
#include "vne_admit/net.hpp"
#include "vne_admit/rng.hpp"
#include "vne_admit/vnr.hpp"

namespace vne_admit {

enum class Action : int { reject = 0, accept = 1 };

inline const char* to_string(Action a) { return a == Action::accept ? "accept" : "reject"; }

enum class DecisionLabel { true_positive, false_positive, false_negative, true_negative };

inline const char* to_string(DecisionLabel l) {
    switch (l) {
        case DecisionLabel::true_positive: return "TP";
        case DecisionLabel::false_positive: return "FP";
        case DecisionLabel::false_negative: return "FN";
        case DecisionLabel::true_negative: return "TN";
    }
    return "?";
}

inline DecisionLabel label_for(Action action, bool feasible) {
    if (action == Action::accept) return feasible ? DecisionLabel::true_positive : DecisionLabel::false_positive;
    return feasible ? DecisionLabel::false_negative : DecisionLabel::true_negative;
}

struct RewardTable {
    double accept_feasible = 6.0;
    double accept_infeasible = -2.0;
    double reject_feasible_base = -1.0;
    double reject_infeasible = 0.0;
};

/// Reward constants plus the shaping weights for rejecting feasible requests.
struct RewardParams {
    double c_d = 0.0;  // weight on relative lifetime
    double c_p = 0.0;  // weight on relative priority
    int lifetime_max = 30;
    int priority_min = 1;
    int priority_max = 10;
    RewardTable table;

    void validate() const {
        if (!(c_d >= 0.0) || !(c_p >= 0.0)) throw std::invalid_argument("reward.c_d and reward.c_p must be >= 0");
        if (lifetime_max < 1) throw std::invalid_argument("reward: delta_max must be >= 1");
        if (priority_max <= priority_min) throw std::invalid_argument("reward: lambda_max must exceed lambda_min");
        if (priority_max == 1) throw std::invalid_argument("reward: lambda_max must not be 1");
    }
};

inline double relative_lifetime(const RewardParams& p, int lifetime) {
    return static_cast<double>(lifetime) / static_cast<double>(p.lifetime_max);
}

/// (lambda_max - lambda) / (lambda_max - 1); the denominator deliberately ignores lambda_min.
inline double relative_priority(const RewardParams& p, int priority) {
    return static_cast<double>(p.priority_max - priority) / static_cast<double>(p.priority_max - 1);
}

inline double extra_reward(const RewardParams& p, int lifetime, int priority) {
    return p.c_d * relative_lifetime(p, lifetime) + p.c_p * relative_priority(p, priority);
}

inline double reward_for(const RewardParams& p, DecisionLabel label, int lifetime, int priority) {
    switch (label) {
        case DecisionLabel::true_positive: return p.table.accept_feasible;
        case DecisionLabel::false_positive: return p.table.accept_infeasible;
        case DecisionLabel::false_negative: return p.table.reject_feasible_base + extra_reward(p, lifetime, priority);
        case DecisionLabel::true_negative: return p.table.reject_infeasible;
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Observation encoding

using Observation = std::vector<double>;

/// Offsets into the flat observation: P residual capacities, a P x P x T x 2 edge-activation
/// tensor of (vnr tag, link tag), then (template id, lifetime, priority) of the pending request.
struct ObservationLayout {
    std::size_t nodes = 0;
    std::size_t slots = 0;

    std::size_t size() const noexcept { return nodes + 2 * nodes * nodes * slots + 3; }
    std::size_t capacity(NodeId p) const noexcept { return p; }
    std::size_t activation(NodeId i, NodeId j, std::size_t t, std::size_t which) const noexcept {
        return nodes + ((i * nodes + j) * slots + t) * 2 + which;
    }
    std::size_t activation_begin() const noexcept { return nodes; }
    std::size_t activation_end() const noexcept { return nodes + 2 * nodes * nodes * slots; }
    std::size_t template_id() const noexcept { return size() - 3; }
    std::size_t lifetime() const noexcept { return size() - 2; }
    std::size_t priority() const noexcept { return size() - 1; }
};

inline ObservationLayout layout_of(const WirelessNetwork& net) {
    return {net.size(), static_cast<std::size_t>(net.slots_per_step())};
}

inline Observation encode_observation(const NetworkState& state, const VnrInstance& pending) {
    const auto layout = layout_of(state.network());
    Observation obs(layout.size(), 0.0);
    for (NodeId p = 0; p < layout.nodes; ++p) obs[layout.capacity(p)] = state.residual(p);
    const auto& active = state.active();
    for (std::size_t k = 0; k < active.size(); ++k) {
        for (const auto& h : active[k].embedding.schedule) {
            const auto t = static_cast<std::size_t>(h.slot);
            obs[layout.activation(h.sender, h.receiver, t, 0)] = static_cast<double>(k + 1);
            obs[layout.activation(h.sender, h.receiver, t, 1)] = static_cast<double>(h.link + 1);
        }
    }
    obs[layout.template_id()] = pending.template_id;
    obs[layout.lifetime()] = pending.lifetime;
    obs[layout.priority()] = pending.priority;
    return obs;
}

// ---------------------------------------------------------------------------
// Environment

struct EnvConfig {
    NetworkConfig network;
    std::vector<VnrTemplate> templates{chain_template()};
    VnrGenConfig vnr;
    double c_d = 0.0;
    double c_p = 0.0;
    RewardTable rewards;
    int retry_budget = default_retry_budget;
    int episode_steps = 1000;

    RewardParams reward_params() const {
        return RewardParams{c_d, c_p, vnr.lifetime_max, vnr.priority_min, vnr.priority_max, rewards};
    }

    void validate() const {
        network.validate();
        TemplateRegistry check(templates);
        if (check.empty()) throw std::invalid_argument("at least one VNR template is required");
        vnr.validate(templates.size());
        reward_params().validate();
        if (retry_budget < 0) throw std::invalid_argument("embedder.retry_budget must be >= 0");
        if (episode_steps < 1) throw std::invalid_argument("env.episode_steps must be >= 1");
    }

    std::vector<std::string> warnings() const {
        std::vector<std::string> w;
        if (vnr.priority_min != 1)
            w.push_back("vnr.lambda_min != 1: the relative-priority term divides by (lambda_max - 1) regardless");
        return w;
    }
};

/// Compatibility key between a trained policy and an environment configuration.
struct EnvSignature {
    std::size_t nodes = 0;
    std::size_t slots = 0;
    std::size_t observation_size = 0;
    bool operator==(const EnvSignature&) const = default;
};

struct StepInfo {
    VnrInstance vnr;  // the request that was decided on
    bool feasible = false;
    EmbedFailure failure = EmbedFailure::none;
    double f_d = 0.0;
    double f_p = 0.0;
    std::size_t active_count = 0;
    int slots_in_use = 0;
};

struct StepOutcome {
    Observation observation;
    double reward = 0.0;
    DecisionLabel label = DecisionLabel::true_negative;
    Action action = Action::reject;
    StepInfo info;
    bool done = false;
};

inline constexpr const char* trace_csv_header = "step,action,label,reward,delta,lambda,feasible,active";

/// Admission-control environment: one request arrives per step, the agent accepts or rejects,
/// feasibility comes from a single heuristic embedding attempt, then running requests age.
class Environment {
public:
    explicit Environment(EnvConfig cfg)
        : cfg_(validated(std::move(cfg))),
          templates_(std::make_shared<const TemplateRegistry>(cfg_.templates)),
          params_(cfg_.reward_params()),
          state_(make_network(cfg_.network), templates_) {}

    const EnvConfig& config() const noexcept { return cfg_; }
    const RewardParams& reward_params() const noexcept { return params_; }
    const NetworkState& state() const noexcept { return state_; }
    const VnrInstance& pending() const noexcept { return pending_; }
    const Observation& observation() const noexcept { return observation_; }
    int step_index() const noexcept { return step_; }
    bool done() const noexcept { return step_ >= cfg_.episode_steps; }
    bool initialized() const noexcept { return initialized_; }

    ObservationLayout layout() const { return layout_of(state_.network()); }
    EnvSignature signature() const {
        const auto l = layout();
        return {l.nodes, l.slots, l.size()};
    }

    void set_trace(std::ostream* out) {
        trace_ = out;
        if (trace_) *trace_ << trace_csv_header << '\n';
    }

    const Observation& reset(std::uint64_t seed) {
        const Rng root(seed);
        arrivals_ = root.split(Stream::arrivals);
        embed_root_ = root.split(Stream::embedder);
        state_.reset();
        step_ = 0;
        next_uid_ = 0;
        initialized_ = true;
        draw_next();
        return observation_;
    }

    /// Feasibility is decided before looking at the action, using an RNG derived only from the
    /// step index, so accept and reject see the same embedding attempt.
    StepOutcome step(Action action) {
        if (!initialized_) throw std::logic_error("step before reset");
        if (done()) throw std::logic_error("step after the episode ended");

        Rng embed_rng = embed_root_.split(static_cast<std::uint64_t>(step_));
        auto attempt = try_embed(state_, pending_, embed_rng, cfg_.retry_budget);
        const bool feasible = attempt.feasible();

        StepOutcome out;
        out.action = action;
        out.label = label_for(action, feasible);
        out.reward = reward_for(params_, out.label, pending_.lifetime, pending_.priority);
        out.info.vnr = pending_;
        out.info.feasible = feasible;
        out.info.failure = attempt.failure;
        out.info.f_d = relative_lifetime(params_, pending_.lifetime);
        out.info.f_p = relative_priority(params_, pending_.priority);

        if (action == Action::accept && feasible) state_.commit(pending_, std::move(*attempt.embedding));
        out.info.active_count = state_.active().size();
        out.info.slots_in_use = state_.slots_in_use();

        if (trace_) {
            *trace_ << step_ << ',' << to_string(action) << ',' << to_string(out.label) << ',' << out.reward << ','
                    << pending_.lifetime << ',' << pending_.priority << ',' << (feasible ? 1 : 0) << ','
                    << out.info.active_count << '\n';
        }

        state_.advance_time();
        ++step_;
        draw_next();
        out.observation = observation_;
        out.done = done();
        return out;
    }

private:
    static EnvConfig validated(EnvConfig c) {
        c.validate();
        return c;
    }

    void draw_next() {
        pending_ = generate(cfg_.vnr, arrivals_, next_uid_++, step_);
        observation_ = encode_observation(state_, pending_);
    }

    EnvConfig cfg_;
    std::shared_ptr<const TemplateRegistry> templates_;
    RewardParams params_;
    NetworkState state_;
    Rng arrivals_;
    Rng embed_root_;
    VnrInstance pending_;
    Observation observation_;
    int step_ = 0;
    std::uint64_t next_uid_ = 0;
    bool initialized_ = false;
    std::ostream* trace_ = nullptr;
};

}  // namespace vne_admit
