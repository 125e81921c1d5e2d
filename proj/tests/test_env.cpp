#include <gtest/gtest.h>

#include <sstream>

#include "vne_admit/env.hpp"

using namespace vne_admit;

namespace {

RewardParams params(double c_d, double c_p, int dmax = 30) {
    return RewardParams{c_d, c_p, dmax, 1, 10, RewardTable{}};
}

EnvConfig small_config(int steps = 200) {
    EnvConfig cfg;
    cfg.episode_steps = steps;
    return cfg;
}

}  // namespace

TEST(Reward, BaseTable) {
    const auto p = params(0.0, 0.0);
    EXPECT_EQ(reward_for(p, DecisionLabel::true_positive, 10, 5), 6.0);
    EXPECT_EQ(reward_for(p, DecisionLabel::false_positive, 10, 5), -2.0);
    EXPECT_EQ(reward_for(p, DecisionLabel::false_negative, 10, 5), -1.0);
    EXPECT_EQ(reward_for(p, DecisionLabel::true_negative, 10, 5), 0.0);
}

TEST(Reward, ShapingOnlyTouchesFalseNegatives) {
    const auto p = params(1.8, 1.5);
    EXPECT_EQ(reward_for(p, DecisionLabel::true_positive, 30, 1), 6.0);
    EXPECT_EQ(reward_for(p, DecisionLabel::false_positive, 30, 1), -2.0);
    EXPECT_EQ(reward_for(p, DecisionLabel::true_negative, 30, 1), 0.0);
}

TEST(Reward, LongestLifetimeHighestPriority) {
    EXPECT_EQ(reward_for(params(1.8, 1.5), DecisionLabel::false_negative, 30, 10), 0.8);
}

TEST(Reward, LongestLifetimeLowestPriority) {
    EXPECT_EQ(reward_for(params(1.8, 1.5), DecisionLabel::false_negative, 30, 1), 2.3);
}

TEST(Reward, RelativeTerms) {
    const auto p = params(1.0, 1.0, 20);
    EXPECT_EQ(relative_lifetime(p, 20), 1.0);
    EXPECT_EQ(relative_lifetime(p, 5), 0.25);
    EXPECT_EQ(relative_priority(p, 10), 0.0);
    EXPECT_EQ(relative_priority(p, 1), 1.0);
}

TEST(Reward, LambdaMinIgnoredInDenominator) {
    RewardParams p{0.0, 1.0, 30, 3, 10, {}};
    EXPECT_EQ(relative_priority(p, 3), 7.0 / 9.0);
    EnvConfig cfg;
    cfg.vnr.priority_min = 3;
    EXPECT_FALSE(cfg.warnings().empty());
    EXPECT_TRUE(EnvConfig{}.warnings().empty());
}

TEST(Reward, ParamValidation) {
    EXPECT_THROW(params(-0.1, 0).validate(), std::invalid_argument);
    EXPECT_THROW((RewardParams{0, 0, 30, 1, 1, {}}).validate(), std::invalid_argument);
}

TEST(Labels, Partition) {
    EXPECT_EQ(label_for(Action::accept, true), DecisionLabel::true_positive);
    EXPECT_EQ(label_for(Action::accept, false), DecisionLabel::false_positive);
    EXPECT_EQ(label_for(Action::reject, true), DecisionLabel::false_negative);
    EXPECT_EQ(label_for(Action::reject, false), DecisionLabel::true_negative);
}

TEST(Observation, LengthAndLayout) {
    Environment env(small_config());
    const auto& obs = env.reset(1);
    EXPECT_EQ(obs.size(), 408u);
    EXPECT_EQ(env.signature(), (EnvSignature{5, 8, 408}));
    const auto l = env.layout();
    EXPECT_EQ(l.activation(0, 0, 0, 0), 5u);
    EXPECT_EQ(l.activation(4, 4, 7, 1), 404u);
    EXPECT_EQ(l.template_id(), 405u);
    for (NodeId p = 0; p < 5; ++p) EXPECT_EQ(obs[p], 6.0);
    for (std::size_t k = l.activation_begin(); k < l.activation_end(); ++k) EXPECT_EQ(obs[k], 0.0);
    EXPECT_EQ(obs[l.lifetime()], env.pending().lifetime);
    EXPECT_EQ(obs[l.priority()], env.pending().priority);
}

TEST(Observation, EncodesScheduledHops) {
    Environment env(small_config());
    env.reset(3);
    for (int k = 0; k < 20 && env.state().active().empty(); ++k) env.step(Action::accept);
    ASSERT_FALSE(env.state().active().empty());
    const auto obs = encode_observation(env.state(), env.pending());
    const auto l = env.layout();
    for (std::size_t k = 0; k < env.state().active().size(); ++k)
        for (const auto& h : env.state().active()[k].embedding.schedule) {
            EXPECT_EQ(obs[l.activation(h.sender, h.receiver, static_cast<std::size_t>(h.slot), 0)], static_cast<double>(k + 1));
            EXPECT_EQ(obs[l.activation(h.sender, h.receiver, static_cast<std::size_t>(h.slot), 1)], static_cast<double>(h.link + 1));
        }
    for (NodeId p = 0; p < 5; ++p) EXPECT_EQ(obs[p], env.state().residual(p));
}

TEST(Environment, LifecycleErrors) {
    Environment env(small_config(2));
    EXPECT_THROW(env.step(Action::accept), std::logic_error);
    env.reset(1);
    env.step(Action::accept);
    const auto last = env.step(Action::reject);
    EXPECT_TRUE(last.done);
    EXPECT_THROW(env.step(Action::accept), std::logic_error);
}

TEST(Environment, AlwaysAcceptNeverProducesNegatives) {
    Environment env(small_config(500));
    env.reset(9);
    int fn = 0, tn = 0, steps = 0;
    while (!env.done()) {
        const auto o = env.step(Action::accept);
        fn += o.label == DecisionLabel::false_negative;
        tn += o.label == DecisionLabel::true_negative;
        ++steps;
        ASSERT_TRUE(validate_state(env.state()).empty());
    }
    EXPECT_EQ(steps, 500);
    EXPECT_EQ(fn, 0);
    EXPECT_EQ(tn, 0);
}

TEST(Environment, SameSeedSameTrajectory) {
    Environment a(small_config()), b(small_config());
    a.reset(42);
    b.reset(42);
    Rng policy(7);
    while (!a.done()) {
        const Action act = policy.bernoulli(0.5) ? Action::accept : Action::reject;
        const auto oa = a.step(act);
        const auto ob = b.step(act);
        ASSERT_EQ(oa.observation, ob.observation);
        ASSERT_EQ(oa.reward, ob.reward);
        ASSERT_EQ(oa.label, ob.label);
    }
    // reset restores the initial state exactly
    const auto first = a.reset(42);
    Environment c(small_config());
    EXPECT_EQ(first, c.reset(42));
}

TEST(Environment, CapacityConservation) {
    Environment env(small_config(400));
    env.reset(5);
    Rng policy(1);
    while (!env.done()) {
        env.step(policy.bernoulli(0.7) ? Action::accept : Action::reject);
        double used = 0.0;
        for (const auto& a : env.state().active()) {
            const auto& t = env.state().templates().at(a.vnr.template_id);
            used += t.total_demand();
        }
        ASSERT_NEAR(env.state().used_capacity(), used, 1e-9);
        for (NodeId p = 0; p < 5; ++p) ASSERT_GE(env.state().residual(p), -1e-9);
    }
}

TEST(Environment, FeasibilityDoesNotDependOnTheAction) {
    // Two copies driven to the same state; at each step one accepts and one rejects, and the
    // feasibility verdict must agree.
    Environment env(small_config(300));
    env.reset(17);
    Rng policy(3);
    while (!env.done()) {
        Environment probe_accept = env;
        Environment probe_reject = env;
        const auto a = probe_accept.step(Action::accept);
        const auto r = probe_reject.step(Action::reject);
        ASSERT_EQ(a.info.feasible, r.info.feasible);
        ASSERT_EQ(a.info.vnr, r.info.vnr);
        env.step(policy.bernoulli(0.5) ? Action::accept : Action::reject);
    }
}

TEST(Environment, ArrivalsDoNotDependOnActions) {
    Environment a(small_config()), b(small_config());
    a.reset(8);
    b.reset(8);
    while (!a.done()) {
        ASSERT_EQ(a.pending(), b.pending());
        a.step(Action::accept);
        b.step(Action::reject);
    }
}

TEST(Environment, TraceRows) {
    std::ostringstream trace;
    Environment env(small_config(10));
    env.set_trace(&trace);
    env.reset(1);
    while (!env.done()) env.step(Action::accept);
    std::istringstream in(trace.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, trace_csv_header);
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 10);
}

TEST(Environment, ConfigValidation) {
    EnvConfig cfg;
    cfg.templates.clear();
    EXPECT_THROW(Environment{cfg}, std::invalid_argument);
    cfg = {};
    cfg.episode_steps = 0;
    EXPECT_THROW(Environment{cfg}, std::invalid_argument);
    cfg = {};
    cfg.vnr.template_weights = {1.0, 1.0};
    EXPECT_THROW(Environment{cfg}, std::invalid_argument);
}
