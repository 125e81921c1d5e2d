#include <gtest/gtest.h>

#include <map>

#include "vne_admit/vnr.hpp"

using namespace vne_admit;

TEST(Template, ChainIsThreeTasksTwoLinks) {
    const auto t = chain_template();
    EXPECT_EQ(t.task_count(), 3u);
    ASSERT_EQ(t.links.size(), 2u);
    EXPECT_EQ(t.links[0], (VirtualLink{0, 1, 2e6}));
    EXPECT_EQ(t.links[1], (VirtualLink{1, 2, 2e6}));
    EXPECT_DOUBLE_EQ(t.total_demand(), 9.0);
    EXPECT_NO_THROW(t.validate());
}

TEST(Template, TopologicalOrderFollowsSources) {
    // declared out of order: 1->2 before 0->1
    VnrTemplate t{0, {1, 1, 1}, {{1, 2, 1e6}, {0, 1, 1e6}}};
    EXPECT_EQ(t.topological_links(), (std::vector<LinkIndex>{1, 0}));
    // ties keep declaration order
    VnrTemplate fan{0, {1, 1, 1}, {{0, 2, 1e6}, {0, 1, 1e6}}};
    EXPECT_EQ(fan.topological_links(), (std::vector<LinkIndex>{0, 1}));
}

TEST(Template, ValidationRejectsMalformed) {
    EXPECT_THROW((VnrTemplate{0, {}, {}}).validate(), std::invalid_argument);
    EXPECT_THROW((VnrTemplate{0, {1, 0}, {}}).validate(), std::invalid_argument);
    EXPECT_THROW((VnrTemplate{0, {1, 1}, {{0, 2, 1e6}}}).validate(), std::invalid_argument);
    EXPECT_THROW((VnrTemplate{0, {1, 1}, {{0, 0, 1e6}}}).validate(), std::invalid_argument);
    EXPECT_THROW((VnrTemplate{0, {1, 1}, {{0, 1, 0.0}}}).validate(), std::invalid_argument);
    EXPECT_THROW((VnrTemplate{0, {1, 1}, {{0, 1, 1e6}, {1, 0, 1e6}}}).validate(), std::invalid_argument);
}

TEST(Registry, IdsMustMatchPositions) {
    EXPECT_NO_THROW(TemplateRegistry({chain_template(0), chain_template(1)}));
    EXPECT_THROW(TemplateRegistry({chain_template(1)}), std::invalid_argument);
    const TemplateRegistry reg({chain_template(0, 3.0), VnrTemplate{1, {2.0}, {}}});
    EXPECT_EQ(reg.max_links(), 2u);
    EXPECT_DOUBLE_EQ(reg.min_total_demand(), 2.0);
}

TEST(Generator, LifetimeMeanAndPriorityFrequencies) {
    const VnrGenConfig cfg;
    Rng rng(2024);
    const int n = 100'000;
    double sum = 0.0;
    std::map<int, int> prio;
    for (int k = 0; k < n; ++k) {
        const auto v = generate(cfg, rng, static_cast<std::uint64_t>(k), k);
        ASSERT_GE(v.lifetime, 2);
        ASSERT_LE(v.lifetime, 30);
        ASSERT_GE(v.priority, 1);
        ASSERT_LE(v.priority, 10);
        EXPECT_EQ(v.template_id, 0);
        sum += v.lifetime;
        ++prio[v.priority];
    }
    const double mean = sum / n;
    EXPECT_GE(mean, 15.5);
    EXPECT_LE(mean, 16.5);
    for (int l = 1; l <= 10; ++l) EXPECT_NEAR(static_cast<double>(prio[l]) / n, 0.1, 0.01) << "priority " << l;
}

TEST(Generator, TemplateWeights) {
    VnrGenConfig cfg;
    cfg.template_weights = {3.0, 1.0};
    Rng rng(5);
    int zeros = 0;
    const int n = 20'000;
    for (int k = 0; k < n; ++k) zeros += generate(cfg, rng).template_id == 0;
    EXPECT_NEAR(static_cast<double>(zeros) / n, 0.75, 0.02);
}

TEST(Generator, DeterministicPerSeed) {
    const VnrGenConfig cfg;
    Rng a(77), b(77);
    for (int k = 0; k < 100; ++k) EXPECT_EQ(generate(cfg, a, k, k), generate(cfg, b, k, k));
}

TEST(Generator, ConfigValidation) {
    VnrGenConfig cfg;
    cfg.lifetime_min = 0;
    EXPECT_THROW(cfg.validate(1), std::invalid_argument);
    cfg = {};
    cfg.lifetime_min = 10;
    cfg.lifetime_max = 5;
    EXPECT_THROW(cfg.validate(1), std::invalid_argument);
    cfg = {};
    EXPECT_THROW(cfg.validate(2), std::invalid_argument);
    cfg.template_weights = {0.0};
    EXPECT_THROW(cfg.validate(1), std::invalid_argument);
}

TEST(Lifetime, TickDecrementsAndRefusesExpired) {
    VnrInstance v{1, 0, 2, 5, 0};
    v = tick(v);
    EXPECT_EQ(v.lifetime, 1);
    EXPECT_FALSE(v.expired());
    v = tick(v);
    EXPECT_TRUE(v.expired());
    EXPECT_THROW(tick(v), std::logic_error);
}
