#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "vne_admit/net.hpp"

using namespace vne_admit;

namespace {

// Two nodes with unit power, unit noise and a chosen gain.
WirelessNetwork unit_pair(double gain) {
    std::vector<Node> nodes{{0, {0, 0, 0}, 1.0, 1.0, 1.0}, {1, {1, 0, 0}, 1.0, 1.0, 1.0}};
    AttenuationMatrix g(2, gain);
    return WirelessNetwork(nodes, g, 20e6, 8);
}

WirelessNetwork random_network(std::uint64_t seed, std::size_t n = 5) {
    NetworkConfig cfg;
    cfg.node_count = n;
    cfg.layout_seed = seed;
    return make_network(cfg);
}

}  // namespace

TEST(Units, DbmConversion) {
    EXPECT_DOUBLE_EQ(dbm_to_watts(0.0), 1e-3);
    EXPECT_NEAR(dbm_to_watts(-90.0), 1e-12, 1e-24);
    EXPECT_DOUBLE_EQ(dbm_to_watts(30.0), 1.0);
}

TEST(Attenuation, FreeSpaceAtThreeMetres) {
    // lambda = c / f = 0.124913 m; (lambda / (4 pi 3 m))^2 = (3.3134e-3)^2
    const double expected = 1.0979e-5;
    std::vector<Node> nodes{{0, {0, 0, 0}, 1, 1, 1}, {1, {3, 0, 0}, 1, 1, 1}};
    const auto g = build_attenuation(nodes, 2.4e9, 0.1);
    EXPECT_NEAR(g(0, 1), expected, 1e-8);
    EXPECT_EQ(g(0, 1), g(1, 0));
}

TEST(Attenuation, DistanceClampAndGainCap) {
    std::vector<Node> nodes{{0, {0, 0, 0}, 1, 1, 1}, {1, {0.01, 0, 0}, 1, 1, 1}, {2, {0.05, 0, 0}, 1, 1, 1}};
    const auto g = build_attenuation(nodes, 2.4e9, 0.1);
    EXPECT_EQ(g(0, 1), g(0, 2));  // both clamped to 0.1 m
    const auto low = build_attenuation(nodes, 1e6, 0.1);
    EXPECT_EQ(low(0, 1), 1.0);  // long wavelength saturates at unit gain
}

TEST(Attenuation, RejectsBadInput) {
    std::vector<Node> one{{0, {0, 0, 0}, 1, 1, 1}};
    EXPECT_THROW(build_attenuation(one, 2.4e9, 0.1), std::invalid_argument);
    std::vector<Node> two{{0, {0, 0, 0}, 1, 1, 1}, {1, {1, 0, 0}, 1, 1, 1}};
    EXPECT_THROW(build_attenuation(two, 0.0, 0.1), std::invalid_argument);
    EXPECT_THROW(build_attenuation(two, 2.4e9, 0.0), std::invalid_argument);
}

TEST(Rate, UnitSnrGivesSlotBandwidth) {
    const auto net = unit_pair(1.0);
    EXPECT_EQ(max_rate_alone(net, 0, 1), 2.5e6);
}

TEST(Rate, SnrThreeGivesTwiceSlotBandwidth) {
    std::vector<Node> nodes{{0, {0, 0, 0}, 1.0, 3.0, 1.0}, {1, {1, 0, 0}, 1.0, 3.0, 1.0}};
    const WirelessNetwork net(nodes, AttenuationMatrix(2, 1.0), 20e6, 8);
    EXPECT_EQ(max_rate_alone(net, 0, 1), 5e6);
}

TEST(Rate, DefaultsAtThreeMetres) {
    NetworkConfig cfg;
    cfg.node_count = 2;
    cfg.positions = {{0, 0, 0}, {3, 0, 0}};
    const auto net = make_network(cfg);
    const double snr = 1e-3 * net.gamma(0, 1) / 1e-12;
    EXPECT_NEAR(max_rate_alone(net, 0, 1), 2.5e6 * std::log2(1 + snr), 1e-3);
    EXPECT_GT(max_rate_alone(net, 0, 1), 2e6);
}

TEST(Rate, OwnSenderIsNotInterference) {
    const auto net = random_network(3);
    const std::vector<NodeId> senders{0};
    EXPECT_EQ(max_rate(net, 0, 1, senders), max_rate_alone(net, 0, 1));
}

TEST(Interference, AdditiveOverSenders) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto net = random_network(seed);
        const std::vector<NodeId> a{2}, b{3}, ab{2, 3};
        const double sum = interference(net, 1, a) + interference(net, 1, b);
        EXPECT_NEAR(interference(net, 1, ab), sum, 1e-15 * sum);
    }
}

TEST(Rate, MonotoneUnderAddedInterferers) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto net = random_network(seed);
        std::vector<NodeId> senders{0};
        double prev = max_rate(net, 0, 1, senders);
        for (NodeId p = 2; p < net.size(); ++p) {
            senders.push_back(p);
            const double r = max_rate(net, 0, 1, senders);
            EXPECT_LT(r, prev) << "seed " << seed << " interferer " << p;
            prev = r;
        }
    }
}

TEST(Rate, RemovingAnInterfererNeverHurts) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto net = random_network(seed);
        const std::vector<NodeId> all{0, 2, 3, 4};
        const double full = max_rate(net, 0, 1, all);
        for (std::size_t drop = 1; drop < all.size(); ++drop) {
            std::vector<NodeId> fewer;
            for (std::size_t k = 0; k < all.size(); ++k)
                if (k != drop) fewer.push_back(all[k]);
            EXPECT_GE(max_rate(net, 0, 1, fewer), full);
        }
    }
}

TEST(Network, DefaultLayoutIsDeterministicAndInsideRoom) {
    const NetworkConfig cfg;
    const auto a = make_network(cfg);
    const auto b = make_network(cfg);
    EXPECT_EQ(a, b);
    ASSERT_EQ(a.size(), 5u);
    EXPECT_EQ(a.slots_per_step(), 8);
    EXPECT_EQ(a.bandwidth(), 20e6);
    for (const auto& n : a.nodes()) {
        EXPECT_TRUE(cfg.room.contains(n.position));
        EXPECT_EQ(n.capacity, cfg.capacity);
        EXPECT_DOUBLE_EQ(n.transmit_power, 1e-3);
    }
    for (NodeId i = 0; i < a.size(); ++i)
        for (NodeId j = 0; j < a.size(); ++j) {
            EXPECT_GT(a.gamma(i, j), 0.0);
            EXPECT_LE(a.gamma(i, j), 1.0);
            EXPECT_EQ(a.gamma(i, j), a.gamma(j, i));
        }
    NetworkConfig other = cfg;
    other.layout_seed = cfg.layout_seed + 1;
    EXPECT_FALSE(make_network(other) == a);
}

TEST(Network, ConfigValidation) {
    NetworkConfig cfg;
    cfg.node_count = 1;
    EXPECT_THROW(make_network(cfg), std::invalid_argument);
    cfg = {};
    cfg.slots_per_step = 0;
    EXPECT_THROW(make_network(cfg), std::invalid_argument);
    cfg = {};
    cfg.positions = {{0, 0, 0}};
    EXPECT_THROW(make_network(cfg), std::invalid_argument);
    cfg = {};
    cfg.node_count = 2;
    cfg.positions = {{0, 0, 0}, {4, 0, 0}};
    EXPECT_THROW(make_network(cfg), std::invalid_argument);
}

TEST(Network, RejectsAsymmetricOrOutOfRangeGains) {
    std::vector<Node> nodes{{0, {0, 0, 0}, 1, 1, 1}, {1, {1, 0, 0}, 1, 1, 1}};
    AttenuationMatrix g(2, 0.5);
    g(0, 1) = 0.25;
    EXPECT_THROW(WirelessNetwork(nodes, g, 20e6, 8), std::invalid_argument);
    EXPECT_THROW(WirelessNetwork(nodes, AttenuationMatrix(2, 0.0), 20e6, 8), std::invalid_argument);
    EXPECT_THROW(WirelessNetwork(nodes, AttenuationMatrix(2, 1.5), 20e6, 8), std::invalid_argument);
}
