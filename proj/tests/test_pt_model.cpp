#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mixembed/pt_model.hpp"

using namespace mixembed;

namespace {

MLPParams zero_mlp(const std::vector<std::size_t>& widths) {
    MLPParams p;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l)
        p.layers.push_back({Matrix(widths[l + 1], widths[l]), std::vector<double>(widths[l + 1], 0.0)});
    return p;
}

PTParams zero_pt(std::size_t L, std::size_t K, std::size_t D) {
    PTParams p;
    p.landmarks.indices.resize(L);
    for (std::size_t i = 0; i < L; ++i) p.landmarks.indices[i] = i;
    p.output_dim = D;
    p.weight_net = zero_mlp({L, K});
    for (std::size_t k = 0; k < K; ++k) p.heads.push_back(zero_mlp({L, D + D * D}));
    return p;
}

FiniteMetricSpace path_space(std::size_t n) {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
    return graph_geodesics(make_graph(n, edges));
}

// Scalar probe of a transformer output: a fixed linear functional of weights, means and covariance parameters.
struct Probe {
    MixtureUpstream coeffs;

    double operator()(const PTTape& t, std::size_t D) const {
        double v = 0.0;
        for (std::size_t k = 0; k < t.weights.size(); ++k) {
            v += coeffs.weight[k] * t.weights[k];
            for (std::size_t i = 0; i < D; ++i) v += coeffs.mean[k][i] * t.mixture.components[k].gaussian.mean[i];
            if (D == 1) {
                v += coeffs.cov[k][0] * std::abs(t.heads[k].output[1]);
            } else {
                const auto& c = t.mixture.components[k].gaussian.cov;
                for (std::size_t i = 0; i < D * D; ++i) v += coeffs.cov[k][i] * c.data()[i];
            }
        }
        return v;
    }
};

}  // namespace

TEST(Mlp, IdentityLayer) {
    MLPParams p{{DenseLayer{Matrix::identity(3), {0, 0, 0}}}};
    EXPECT_EQ(mlp_forward(p, {1.5, -2.0, 7.0}), (std::vector<double>{1.5, -2.0, 7.0}));
}

TEST(Mlp, ZeroHiddenWeightsGiveFinalBias) {
    MLPParams p = zero_mlp({3, 4, 2});
    p.layers[1].bias = {0.25, -1.0};
    EXPECT_EQ(mlp_forward(p, {9, 8, 7}), (std::vector<double>{0.25, -1.0}));
}

TEST(Mlp, HandEvaluation) {
    MLPParams p{{DenseLayer{Matrix{{1}}, {0}}, DenseLayer{Matrix{{-1}}, {0}}}};
    EXPECT_EQ(mlp_forward(p, {3.0}), std::vector<double>{-3.0});
    EXPECT_EQ(mlp_forward(p, {-3.0}), std::vector<double>{0.0});
}

TEST(Mlp, RejectsBrokenShapes) {
    MLPParams p{{DenseLayer{Matrix(2, 3), {0, 0}}, DenseLayer{Matrix(1, 3), {0}}}};
    EXPECT_THROW(validate(p), ValidationError);
    EXPECT_THROW(validate(MLPParams{}), ValidationError);
}

TEST(PtForward, AllZeroNetworks) {
    const auto space = path_space(4);
    const auto p = zero_pt(3, 4, 1);
    const auto m = pt_forward(p, space, 2);
    ASSERT_EQ(m.size(), 4u);
    for (const auto& c : m.components) {
        EXPECT_NEAR(c.weight, 0.25, 1e-15);
        EXPECT_EQ(c.gaussian.mean[0], 0.0);
        EXPECT_EQ(c.gaussian.cov(0, 0), 0.0);
    }
}

TEST(PtForward, SingleComponentHasUnitWeight) {
    const auto space = path_space(4);
    const auto p = init_pt({{5}, {}, 1, 2}, make_landmarks({0, 3}, 4), 9);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(pt_forward(p, space, i).components[0].weight, 1.0);
}

TEST(PtForward, OutputIsAlwaysValidMixture) {
    const auto space = path_space(7);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::size_t D = 1 + seed % 3;
        const auto p = init_pt({{6, 5}, {4}, 1 + seed % 5, D}, make_landmarks({0, 2, 6}, 7), seed);
        validate(p);
        for (std::size_t i = 0; i < 7; ++i) {
            const auto m = pt_forward(p, space, i);
            EXPECT_NO_THROW(validate(m));
            for (const auto& c : m.components) EXPECT_NO_THROW(psd_sqrt(c.gaussian.cov));
        }
    }
}

TEST(PtForward, SoftmaxShiftInvariance) {
    const auto space = path_space(6);
    auto p = init_pt({{8}, {}, 4, 1}, make_landmarks({0, 5}, 6), 3);
    auto shifted = p;
    for (double& b : shifted.weight_net.layers.back().bias) b += 17.5;
    for (std::size_t i = 0; i < 6; ++i) {
        const auto a = pt_forward_1d(p, space, i), b = pt_forward_1d(shifted, space, i);
        for (std::size_t k = 0; k < a.size(); ++k) {
            EXPECT_NEAR(a.components[k].weight, b.components[k].weight, 1e-12);
            EXPECT_EQ(a.components[k].gaussian, b.components[k].gaussian);
        }
        // The distance is a square root, so compare the LP value.
        EXPECT_LE(mw2(a, b).plan.value, 1e-12);
    }
}

TEST(PtBackward, ZeroUpstreamGivesZeroGradient) {
    const auto space = path_space(5);
    const auto p = init_pt({{6}, {3}, 3, 2}, make_landmarks({0, 4}, 5), 1);
    auto grad = zeros_like(p);
    pt_backward(p, pt_forward_tape(p, space, 2), MixtureUpstream::zeros(3, 2), grad);
    for_each_parameter(grad, [](double g) { EXPECT_EQ(g, 0.0); });
}

TEST(PtBackward, MatchesFiniteDifferences) {
    const auto space = path_space(9);
    std::mt19937_64 rng(33);
    std::normal_distribution<double> g;
    double worst = 0.0;
    for (int config = 0; config < 30; ++config) {
        const std::size_t D = 1 + config % 3, K = 1 + config % 4;
        const std::vector<std::size_t> trunk = config % 2 ? std::vector<std::size_t>{7, 5} : std::vector<std::size_t>{};
        auto p = init_pt({trunk, {config % 3 == 0 ? std::size_t{4} : std::size_t{3}}, K, D},
                         make_landmarks({0, 4, 8}, 9), static_cast<std::uint64_t>(config));
        for_each_parameter(p, [&](double& v) { v += 0.1 * g(rng); });  // non-zero biases
        const std::size_t point = static_cast<std::size_t>(config) % 9;
        Probe probe{MixtureUpstream::zeros(K, D)};
        for (auto& v : probe.coeffs.weight) v = g(rng);
        for (auto& m : probe.coeffs.mean)
            for (auto& v : m) v = g(rng);
        for (auto& c : probe.coeffs.cov)
            for (auto& v : c) v = g(rng);

        auto grad = zeros_like(p);
        pt_backward(p, pt_forward_tape(p, space, point), probe.coeffs, grad);
        std::vector<double> analytic;
        for_each_parameter(grad, [&](double v) { analytic.push_back(v); });

        std::vector<double*> params;
        for_each_parameter(p, [&](double& v) { params.push_back(&v); });
        const double h = 1e-5;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double saved = *params[i];
            *params[i] = saved + h;
            const auto tu = pt_forward_tape(p, space, point);
            *params[i] = saved - h;
            const auto td = pt_forward_tape(p, space, point);
            *params[i] = saved;
            const double fd = (probe(tu, D) - probe(td, D)) / (2 * h);
            const double err = std::abs(fd - analytic[i]) / std::max({std::abs(fd), std::abs(analytic[i]), 1e-6});
            worst = std::max(worst, err);
        }
    }
    EXPECT_LE(worst, 1e-4);
}

TEST(ParamCount, Examples) {
    EXPECT_EQ(param_count(zero_pt(3, 2, 1)), 0u);
    MLPParams dense{{DenseLayer{Matrix(4, 3, 1.0), std::vector<double>(4, 2.0)}}};
    EXPECT_EQ(nonzero_count(dense), 3u * 4u + 4u);
    MLPParams half = dense;
    for (std::size_t i = 0; i < half.layers[0].weight.data().size(); i += 2) half.layers[0].weight.data()[i] = 0.0;
    half.layers[0].bias[0] = half.layers[0].bias[2] = 0.0;
    EXPECT_EQ(nonzero_count(half), 8u);
}

TEST(ParamCount, AdditiveAcrossSubnetworks) {
    const auto p = init_pt({{6, 4}, {3}, 3, 2}, make_landmarks({0, 1, 2}, 5), 4);
    std::size_t sum = nonzero_count(*p.trunk) + nonzero_count(p.weight_net);
    for (const auto& h : p.heads) sum += nonzero_count(h);
    EXPECT_EQ(param_count(p), sum);
}

TEST(Complexity, EffectiveDimensionAndConstants) {
    const auto p = init_pt({{}, {}, 5, 1}, make_landmarks({0, 1}, 3), 0);
    EXPECT_EQ(effective_dimension(p), 10u);
    for (std::size_t K = 1; K < 5; ++K)
        for (std::size_t D = 1; D < 4; ++D)
            EXPECT_EQ(effective_dimension(init_pt({{}, {}, K, D}, make_landmarks({0}, 2), 0)), K * (D + D * D));

    const double c127 = (2 * std::log(5 * std::sqrt(2 * std::numbers::pi)) + 1.5 * std::log(127.0) -
                         0.5 * std::log(128.0)) / (2 * std::log(2.0));
    EXPECT_NEAR(dimensional_constant(127), c127, 1e-12);

    ComplexityExtras extras;
    extras.distortion = 2.0;
    const auto r = complexity_report(p, {4, 2.0, 2.0}, extras);
    bool found = false;
    for (const auto& b : r.theorem_bounds)
        if (b.name == "multivariate_mixtures_K") {
            EXPECT_EQ(b.value, 2560.0);
            found = true;
        }
    EXPECT_TRUE(found);
    EXPECT_EQ(r.effdim, 10u);
}

TEST(Complexity, MissingExtrasOmitBounds) {
    const auto p = init_pt({{}, {}, 1, 1}, make_landmarks({0}, 2), 0);
    const auto r = complexity_report(p, {10, 3.0, 3.0});
    for (const auto& b : r.theorem_bounds) {
        EXPECT_EQ(b.name.find("two_hop"), std::string::npos);
        EXPECT_EQ(b.name.find("multivariate"), std::string::npos);
        EXPECT_EQ(b.name.find("tree_distortion"), std::string::npos);
    }
}
