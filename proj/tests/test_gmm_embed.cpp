#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mixembed/gmm_embed.hpp"

using namespace mixembed;

namespace {

FiniteMetricSpace random_space(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> w(0.5, 3.0);
    Matrix d(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) d(i, j) = d(j, i) = w(rng);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) d(i, j) = std::min(d(i, j), d(i, k) + d(k, j));
    return build_metric_space(d);
}

void expect_strictly_increasing(const std::vector<std::vector<double>>& xs, const BiasVector& bias) {
    for (const auto& x : xs)
        for (std::size_t k = 1; k < x.size(); ++k) EXPECT_GE((x[k] + bias.b[k]) - (x[k - 1] + bias.b[k - 1]), 1e-9);
}

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

}  // namespace

TEST(InitializeBias, OneDimensionalIsZero) {
    EXPECT_EQ(initialize_bias({{4.0}, {-2.0}}).b, std::vector<double>{0.0});
}

TEST(InitializeBias, HandExamples) {
    // Single vector (3, 1): the second coordinate must climb past 3.
    const auto b = initialize_bias({{3.0, 1.0}});
    ASSERT_EQ(b.b.size(), 2u);
    EXPECT_EQ(b.b[0], 0.0);
    EXPECT_NEAR(b.b[1], 2.0 + 3e-6, 1e-15);

    const auto c = initialize_bias({{1.0, 0.0}, {0.0, 2.0}});
    EXPECT_NEAR(c.b[1], 1.0 + 3e-6, 1e-15);
    expect_strictly_increasing({{1.0, 0.0}, {0.0, 2.0}}, c);
}

TEST(InitializeBias, RandomSetsLandInIncreasingCone) {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> g(0.0, 5.0);
    for (int t = 0; t < 100; ++t) {
        const std::size_t D = 1 + t % 12, count = 1 + t % 7;
        std::vector<std::vector<double>> xs(count, std::vector<double>(D));
        for (auto& x : xs)
            for (double& v : x) v = g(rng);
        expect_strictly_increasing(xs, initialize_bias(xs));
    }
}

TEST(InitializeBias, RejectsRaggedInput) {
    EXPECT_THROW(initialize_bias({{1.0, 2.0}, {1.0}}), ValidationError);
    EXPECT_THROW(initialize_bias({}), ValidationError);
}

TEST(BallToEmpirical, Examples) {
    const auto m = ball_to_empirical({0.0, 0.0}, BiasVector{{0.0, 1.0}});
    ASSERT_EQ(m.size(), 2u);
    EXPECT_EQ(m.components[0].weight, 0.5);
    EXPECT_EQ(m.components[0].gaussian.mean, 0.0);
    EXPECT_NEAR(m.components[1].gaussian.mean, std::numbers::sqrt2, 1e-15);
    EXPECT_EQ(m.components[1].gaussian.std, 0.0);
    EXPECT_EQ(mw2(m, m).distance, 0.0);
}

TEST(BallToEmpirical, IsometryOnSharedBias) {
    std::mt19937_64 rng(22);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> radius(0.0, 1.0);
    const std::size_t D = 8;
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 400; ++i) {
        std::vector<double> x(D);
        for (double& v : x) v = g(rng);
        const double r = radius(rng) / euclidean(x, std::vector<double>(D, 0.0));
        for (double& v : x) v *= r;
        pts.push_back(x);
    }
    const auto bias = initialize_bias(pts);
    for (std::size_t i = 0; i < pts.size(); i += 2) {
        const double got = mw2(ball_to_empirical(pts[i], bias), ball_to_empirical(pts[i + 1], bias)).distance;
        EXPECT_NEAR(got, euclidean(pts[i], pts[i + 1]), 1e-9);
    }
}

TEST(ConstructiveEmbed, TwoPointSpace) {
    const auto space = build_metric_space(Matrix{{0, 3}, {3, 0}});
    const auto e = constructive_embed(space, 1.0);
    EXPECT_NEAR(mw2(e.mixtures[0], e.mixtures[1]).distance, std::numbers::sqrt2 * 3.0, 1e-12);
    EXPECT_EQ(mw2(e.mixtures[0], e.mixtures[0]).distance, 0.0);
}

TEST(ConstructiveEmbed, RatiosWithinSqrtN) {
    std::mt19937_64 rng(23);
    for (int t = 0; t < 12; ++t) {
        const std::size_t n = 2 + (t * 7) % 29;
        const auto space = random_space(n, rng);
        for (double alpha : {0.6, 1.0}) {
            const auto e = constructive_embed(space, alpha);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j) {
                    const double target = std::pow(space(i, j), alpha);
                    const double ratio = mw2(e.mixtures[i], e.mixtures[j]).distance / target;
                    EXPECT_GE(ratio, 1.0 - 1e-9);
                    EXPECT_LE(ratio, std::sqrt(static_cast<double>(n)) + 1e-9);
                }
        }
    }
}

TEST(MemorizePt, TwoPointExample) {
    const auto space = build_metric_space(Matrix{{0, 1}, {1, 0}});
    const auto p = memorize_pt(space, {{{0.0}}, {{5.0}}});
    EXPECT_NO_THROW(validate(p));
    EXPECT_NEAR(mw2(pt_forward(p, space, 0), memorization_target({{0.0}})).distance, 0.0, 1e-12);
    EXPECT_NEAR(mw2(pt_forward(p, space, 1), memorization_target({{5.0}})).distance, 0.0, 1e-12);
}

TEST(MemorizePt, ConstantTargets) {
    std::mt19937_64 rng(24);
    const auto space = random_space(6, rng);
    const std::vector<std::vector<double>> means{{1.5}, {-2.0}};
    const auto p = memorize_pt(space, MemorizationTargets(6, means));
    for (std::size_t i = 0; i < 6; ++i)
        EXPECT_NEAR(mw2(pt_forward(p, space, i), memorization_target(means)).distance, 0.0, 1e-12);
}

TEST(MemorizePt, ExactOnRandomInstances) {
    std::mt19937_64 rng(25);
    std::normal_distribution<double> g(0.0, 3.0);
    for (int t = 0; t < 20; ++t) {
        const std::size_t n = 2 + (t * 5) % 31, K = 1 + t % 8, d = 1 + t % 3;
        const auto space = random_space(n, rng);
        MemorizationTargets targets(n, std::vector<std::vector<double>>(K, std::vector<double>(d)));
        for (auto& point : targets)
            for (auto& mu : point)
                for (double& v : mu) v = g(rng);
        const auto p = memorize_pt(space, targets);
        for (std::size_t i = 0; i < n; ++i) {
            const auto out = pt_forward(p, space, i);
            validate(out);
            EXPECT_LE(mw2(out, memorization_target(targets[i])).distance, 1e-9);
        }
    }
}

TEST(MemorizePt, ReportsSize) {
    std::mt19937_64 rng(26);
    const auto space = random_space(5, rng);
    const auto p = memorize_pt(space, MemorizationTargets(5, {{1.0}, {2.0}, {3.0}}));
    EXPECT_GT(param_count(p), 0u);
    EXPECT_EQ(network_depth(p), 3u);
    EXPECT_EQ(effective_dimension(p), 6u);
}

TEST(MemorizePt, RejectsBadTargets) {
    const auto space = build_metric_space(Matrix{{0, 1}, {1, 0}});
    EXPECT_THROW(memorize_pt(space, {{{0.0}}}), ValidationError);
    EXPECT_THROW(memorize_pt(space, {{{0.0}}, {{1.0}, {2.0}}}), ValidationError);
    EXPECT_THROW(memorize_pt(space, {{{0, 0, 0, 0}}, {{0, 0, 0, 0}}}), ValidationError);
}
