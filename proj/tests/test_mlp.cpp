#include <gtest/gtest.h>

#include <cmath>

#include "vne_admit/agents.hpp"
#include "vne_admit/mlp.hpp"

using namespace vne_admit;

namespace {

struct FrozenBatch {
    Matrix states;
    std::vector<int> actions;
    Vector targets;
};

FrozenBatch random_batch(Rng& rng, Eigen::Index features, Eigen::Index n) {
    FrozenBatch b{Matrix(features, n), std::vector<int>(static_cast<std::size_t>(n)), Vector(n)};
    for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index i = 0; i < features; ++i) b.states(i, k) = rng.uniform_real(-1.0, 1.0);
        b.actions[static_cast<std::size_t>(k)] = rng.bernoulli(0.5) ? 1 : 0;
        b.targets(k) = rng.uniform_real(-3.0, 3.0);
    }
    return b;
}

double max_relative_error(Mlp net, const FrozenBatch& b) {
    const auto analytic = Mlp::flatten(td_gradient(net, b.states, b.actions, b.targets).grads);
    auto theta = net.flatten();
    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double keep = theta[i];
        theta[i] = keep + h;
        net.unflatten(theta);
        const double up = td_loss(net, b.states, b.actions, b.targets);
        theta[i] = keep - h;
        net.unflatten(theta);
        const double down = td_loss(net, b.states, b.actions, b.targets);
        theta[i] = keep;
        const double numeric = (up - down) / (2 * h);
        const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-7});
        worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
    }
    return worst;
}

}  // namespace

TEST(Mlp, ShapesAndParameterCount) {
    Rng rng(1);
    Mlp net({6, 8, 8, 2}, rng);
    EXPECT_EQ(net.input_size(), 6u);
    EXPECT_EQ(net.output_size(), 2u);
    EXPECT_EQ(net.parameter_count(), 6u * 8 + 8 + 8 * 8 + 8 + 8 * 2 + 2);
    const Matrix out = net.forward(Matrix::Random(6, 5));
    EXPECT_EQ(out.rows(), 2);
    EXPECT_EQ(out.cols(), 5);
}

TEST(Mlp, CachedForwardMatchesPlainForward) {
    Rng rng(2);
    Mlp net({4, 8, 8, 2}, rng);
    const Matrix x = Matrix::Random(4, 7);
    Mlp::Cache cache;
    EXPECT_TRUE(net.forward(x).isApprox(net.forward(x, cache)));
}

TEST(Mlp, FlattenRoundTrip) {
    Rng rng(3);
    Mlp a({3, 5, 2}, rng);
    Mlp b({3, 5, 2}, rng);
    EXPECT_FALSE(a == b);
    b.unflatten(a.flatten());
    EXPECT_TRUE(a == b);
    EXPECT_THROW(b.unflatten({1.0}), std::invalid_argument);
}

TEST(Mlp, RejectsBadShapes) {
    Rng rng(4);
    EXPECT_THROW(Mlp({3}, rng), std::invalid_argument);
    EXPECT_THROW(Mlp({3, 0, 2}, rng), std::invalid_argument);
    std::vector<Mlp::Layer> layers{{Matrix::Zero(4, 3), Vector::Zero(4)}, {Matrix::Zero(2, 5), Vector::Zero(2)}};
    EXPECT_THROW(Mlp{layers}, std::invalid_argument);
}

TEST(Mlp, InitialisationIsSeeded) {
    Rng a(9), b(9);
    EXPECT_TRUE(Mlp({10, 8, 2}, a) == Mlp({10, 8, 2}, b));
}

TEST(TdGradient, MatchesFiniteDifferences) {
    Rng rng(11);
    Mlp net({6, 8, 8, 2}, rng);
    const auto batch = random_batch(rng, 6, 16);
    EXPECT_LT(max_relative_error(net, batch), 1e-4);
}

TEST(TdGradient, MatchesFiniteDifferencesAcrossSeeds) {
    for (std::uint64_t s = 0; s < 5; ++s) {
        Rng rng(100 + s);
        Mlp net({5, 8, 8, 2}, rng);
        const auto batch = random_batch(rng, 5, 8);
        EXPECT_LT(max_relative_error(net, batch), 1e-4) << "seed " << s;
    }
}

TEST(TdGradient, LossAgreesWithStandaloneLoss) {
    Rng rng(12);
    Mlp net({4, 8, 2}, rng);
    const auto b = random_batch(rng, 4, 10);
    EXPECT_NEAR(td_gradient(net, b.states, b.actions, b.targets).loss, td_loss(net, b.states, b.actions, b.targets),
                1e-12);
}

TEST(TdTargets, DoubleEstimatorAndSegmentEnd) {
    // Online net prefers action 1, target net scores action 1 at 5 and action 0 at 100.
    std::vector<Mlp::Layer> online{{Matrix::Zero(2, 1), (Vector(2) << 0.0, 1.0).finished()}};
    std::vector<Mlp::Layer> target{{Matrix::Zero(2, 1), (Vector(2) << 100.0, 5.0).finished()}};
    TdBatch b;
    b.states = Matrix::Zero(1, 2);
    b.next_states = Matrix::Zero(1, 2);
    b.actions = {0, 1};
    b.rewards = (Vector(2) << 1.0, 2.0).finished();
    b.segment_end = {false, true};
    const Vector y = td_targets(Mlp(online), Mlp(target), b, 0.5);
    EXPECT_DOUBLE_EQ(y(0), 1.0 + 0.5 * 5.0);
    EXPECT_DOUBLE_EQ(y(1), 2.0);
}

TEST(Adam, DescendsAQuadratic) {
    Rng rng(5);
    Mlp net({2, 4, 2}, rng);
    Adam opt(net, 1e-2);
    auto b = random_batch(rng, 2, 32);
    for (Eigen::Index k = 0; k < 32; ++k) b.targets(k) = 2.0 * b.states(0, k) - b.states(1, k);
    const double before = td_loss(net, b.states, b.actions, b.targets);
    for (int k = 0; k < 300; ++k) opt.step(net, td_gradient(net, b.states, b.actions, b.targets).grads);
    EXPECT_LT(td_loss(net, b.states, b.actions, b.targets), 0.5 * before);
}
