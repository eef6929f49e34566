#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "mixembed/metric_core.hpp"

using namespace mixembed;

namespace {

// Floyd-Warshall over unit edge weights.
Matrix floyd_warshall(const GraphSpec& g) {
    const std::size_t n = g.n_vertices;
    const double inf = std::numeric_limits<double>::infinity();
    Matrix d(n, n, inf);
    for (std::size_t i = 0; i < n; ++i) d(i, i) = 0.0;
    for (const auto& [a, b] : g.edges) d(a, b) = d(b, a) = 1.0;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) d(i, j) = std::min(d(i, j), d(i, k) + d(k, j));
    return d;
}

GraphSpec random_connected_graph(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (std::size_t v = 1; v < n; ++v) {
        std::uniform_int_distribution<std::size_t> parent(0, v - 1);
        const std::size_t p = parent(rng);
        edges.emplace_back(p, v);
        seen.insert({p, v});
    }
    std::uniform_int_distribution<std::size_t> any(0, n - 1);
    for (std::size_t e = 0; e < n; ++e) {
        std::size_t a = any(rng), b = any(rng);
        if (a == b) continue;
        if (a > b) std::swap(a, b);
        if (seen.insert({a, b}).second) edges.emplace_back(a, b);
    }
    return make_graph(n, edges);
}

// Random metric: shortest paths of a complete graph with random positive weights.
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

}  // namespace

TEST(BuildMetricSpace, AcceptsSmallestMetric) {
    const auto s = build_metric_space(Matrix{{0, 1}, {1, 0}});
    EXPECT_EQ(s.size(), 2u);
    EXPECT_EQ(s(0, 1), 1.0);
}

TEST(BuildMetricSpace, RejectsAsymmetry) {
    EXPECT_THROW(build_metric_space(Matrix{{0, 1}, {2, 0}}), ValidationError);
}

TEST(BuildMetricSpace, RejectsTriangleViolationNamingPair) {
    try {
        build_metric_space(Matrix{{0, 1, 3}, {1, 0, 1}, {3, 1, 0}});
        FAIL() << "expected a triangle violation";
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("triangle"), std::string::npos);
        EXPECT_NE(msg.find("(0,2)"), std::string::npos) << msg;
    }
}

TEST(BuildMetricSpace, RejectsOtherMalformedInput) {
    EXPECT_THROW(build_metric_space(Matrix(2, 3)), ValidationError);
    EXPECT_THROW(build_metric_space(Matrix{{1, 1}, {1, 0}}), ValidationError);
    EXPECT_THROW(build_metric_space(Matrix{{0, 0}, {0, 0}}), ValidationError);
    EXPECT_THROW(build_metric_space(Matrix{{0, -1}, {-1, 0}}), ValidationError);
    EXPECT_THROW(build_metric_space(Matrix{{0, NAN}, {NAN, 0}}), ValidationError);
}

TEST(GraphGeodesics, PathAndComplete) {
    EXPECT_EQ(graph_geodesics(make_graph(3, {{0, 1}, {1, 2}}))(0, 2), 2.0);
    const auto k4 = graph_geodesics(make_graph(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}));
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(k4(i, j), i == j ? 0.0 : 1.0);
}

TEST(GraphGeodesics, DepthSixTreeHasDiameterTwelve) {
    const auto tree = gen_binary_tree(6);
    const auto space = graph_geodesics(tree);
    EXPECT_EQ(space.size(), 127u);
    const auto ad = aspect_ratio_and_diameter(space);
    EXPECT_EQ(ad.diameter, 12.0);
    EXPECT_EQ(ad.aspect, 12.0);
    EXPECT_EQ(floyd_warshall(tree), space.matrix());
}

TEST(GraphGeodesics, RejectsDisconnectedGraph) {
    EXPECT_THROW(graph_geodesics(make_graph(3, {{0, 1}})), ValidationError);
}

TEST(GraphGeodesics, MatchesFloydWarshallOnRandomGraphs) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        std::uniform_int_distribution<std::size_t> size(2, 40);
        const auto g = random_connected_graph(size(rng), rng);
        EXPECT_EQ(graph_geodesics(g).matrix(), floyd_warshall(g));
    }
}

TEST(MakeGraph, RejectsBadEdges) {
    EXPECT_THROW(make_graph(2, {{0, 0}}), ValidationError);
    EXPECT_THROW(make_graph(2, {{0, 1}, {1, 0}}), ValidationError);
    EXPECT_THROW(make_graph(2, {{0, 2}}), ValidationError);
}

TEST(BinaryTree, Sizes) {
    EXPECT_EQ(gen_binary_tree(0).n_vertices, 1u);
    EXPECT_TRUE(gen_binary_tree(0).edges.empty());
    EXPECT_EQ(gen_binary_tree(1).n_vertices, 3u);
    EXPECT_EQ(gen_binary_tree(1).edges.size(), 2u);
    EXPECT_EQ(gen_binary_tree(6).n_vertices, 127u);
}

TEST(TwoHop, FamiliesHaveDiameterAtMostTwo) {
    EXPECT_EQ(graph_diameter(gen_two_hop(TwoHopKind::star, {5, 1})), 2.0);
    EXPECT_EQ(graph_diameter(gen_two_hop(TwoHopKind::wheel, {5, 1})), 2.0);
    EXPECT_EQ(graph_diameter(gen_two_hop(TwoHopKind::complete_bipartite, {2, 3})), 2.0);
    for (std::size_t a = 1; a < 7; ++a) {
        EXPECT_LE(graph_diameter(gen_two_hop(TwoHopKind::star, {a, 1})), 2.0);
        EXPECT_LE(graph_diameter(gen_two_hop(TwoHopKind::friendship, {a, 1})), 2.0);
        for (std::size_t b = 1; b < 5; ++b)
            EXPECT_LE(graph_diameter(gen_two_hop(TwoHopKind::complete_bipartite, {a, b})), 2.0);
        if (a >= 3) {
            EXPECT_LE(graph_diameter(gen_two_hop(TwoHopKind::wheel, {a, 1})), 2.0);
        }
    }
}

TEST(SpectralRadius, KnownGraphs) {
    EXPECT_NEAR(spectral_radius(gen_two_hop(TwoHopKind::star, {4, 1})), 2.0, 1e-9);
    EXPECT_NEAR(spectral_radius(gen_two_hop(TwoHopKind::complete_bipartite, {2, 3})), std::sqrt(6.0), 1e-9);
    EXPECT_NEAR(spectral_radius(make_graph(2, {{0, 1}})), 1.0, 1e-9);
}

TEST(Sphere, SampleShapeNormsAndDeterminism) {
    const auto a = sphere_sample(2, 3, 7);
    EXPECT_EQ(a.ambient_dim, 3u);
    ASSERT_EQ(a.points.size(), 3u);
    for (const auto& p : a.points) {
        EXPECT_EQ(p.size(), 3u);
        EXPECT_NEAR(euclidean_norm(p), 1.0, 1e-12);
    }
    EXPECT_EQ(sphere_sample(2, 3, 7).points, a.points);

    const auto big = sphere_sample(10, 10000, 3);
    double mean = 0.0;
    for (const auto& p : big.points) mean += euclidean_norm(p);
    EXPECT_NEAR(mean / 10000.0, 1.0, 1e-12);
}

TEST(Sphere, DistanceSpecialCases) {
    const std::vector<double> x{1, 0, 0}, y{0, 1, 0}, z{-1, 0, 0};
    EXPECT_EQ(sphere_distance(x, x), 0.0);
    EXPECT_NEAR(sphere_distance(x, z), std::numbers::pi, 1e-12);
    EXPECT_NEAR(sphere_distance(x, y), std::numbers::pi / 2, 1e-12);
}

TEST(Sphere, DistanceSymmetricAndTriangle) {
    const auto pts = sphere_sample(3, 3000, 5);
    for (std::size_t t = 0; t < 1000; ++t) {
        const auto& a = pts.points[3 * t];
        const auto& b = pts.points[3 * t + 1];
        const auto& c = pts.points[3 * t + 2];
        EXPECT_NEAR(sphere_distance(a, b), sphere_distance(b, a), 1e-12);
        EXPECT_LE(sphere_distance(a, c), sphere_distance(a, b) + sphere_distance(b, c) + 1e-12);
    }
}

TEST(Sphere, QuasiUniformLandmarks) {
    const auto circle = quasi_uniform_landmarks(1, 4, 9);
    ASSERT_EQ(circle.points.size(), 4u);
    double closest = 10.0;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i + 1; j < 4; ++j)
            closest = std::min(closest, sphere_distance(circle.points[i], circle.points[j]));
    EXPECT_GE(closest, std::numbers::pi / 4);

    const auto one = quasi_uniform_landmarks(2, 1, 1);
    ASSERT_EQ(one.points.size(), 1u);
    EXPECT_NEAR(euclidean_norm(one.points[0]), 1.0, 1e-12);
    for (std::size_t L : {1u, 5u, 13u}) EXPECT_EQ(quasi_uniform_landmarks(2, L, 2).points.size(), L);
}

TEST(Landmarks, Features) {
    const auto s = build_metric_space(Matrix{{0, 2.5}, {2.5, 0}});
    const auto both = all_points_as_landmarks(2);
    EXPECT_EQ(landmark_features(s, both, 0), (std::vector<double>{0, 2.5}));
    EXPECT_EQ(landmark_features(s, both, 1), (std::vector<double>{2.5, 0}));

    const auto tree = graph_geodesics(gen_binary_tree(3));
    const auto lm = make_landmarks({4, 1, 9}, tree.size());
    EXPECT_EQ(landmark_features(tree, lm, 4)[0], 0.0);
    EXPECT_THROW(make_landmarks({0, 0}, 3), ValidationError);
    EXPECT_THROW(make_landmarks({5}, 3), ValidationError);
}

TEST(Landmarks, FrechetIsometryIntoMaxNorm) {
    std::mt19937_64 rng(3);
    for (std::size_t n = 2; n <= 12; ++n) {
        const auto s = random_space(n, rng);
        const auto all = all_points_as_landmarks(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const auto fi = landmark_features(s, all, i), fj = landmark_features(s, all, j);
                double mx = 0.0;
                for (std::size_t l = 0; l < n; ++l) mx = std::max(mx, std::abs(fi[l] - fj[l]));
                EXPECT_NEAR(mx, s(i, j), 1e-12);
            }
    }
}

TEST(AspectRatio, Examples) {
    const auto unit = build_metric_space(Matrix{{0, 1, 1}, {1, 0, 1}, {1, 1, 0}});
    EXPECT_EQ(aspect_ratio_and_diameter(unit).aspect, 1.0);
    EXPECT_EQ(aspect_ratio_and_diameter(unit).diameter, 1.0);
    const auto s = build_metric_space(Matrix{{0, 1, 5}, {1, 0, 5}, {5, 5, 0}});
    EXPECT_EQ(aspect_ratio_and_diameter(s).aspect, 5.0);
}

TEST(Snowflake, Examples) {
    const auto s = build_metric_space(Matrix{{0, 1, 4}, {1, 0, 4}, {4, 4, 0}});
    EXPECT_EQ(snowflake(s, 1.0).matrix(), s.matrix());
    const auto half = snowflake(s, 0.5);
    EXPECT_DOUBLE_EQ(half(0, 2), 2.0);
    EXPECT_DOUBLE_EQ(half(0, 1), 1.0);
    const auto nine = build_metric_space(Matrix{{0, 9}, {9, 0}});
    EXPECT_DOUBLE_EQ(snowflake(nine, 0.5)(0, 1), 3.0);
    EXPECT_THROW(snowflake(s, 0.0), ValidationError);
    EXPECT_THROW(snowflake(s, 1.5), ValidationError);
}

TEST(Snowflake, TriangleInequalityOnRandomSpaces) {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 20; ++t) {
        const auto s = random_space(10, rng);
        for (double a : {0.51, 0.75, 0.99}) EXPECT_NO_THROW(snowflake(s, a));
    }
}

TEST(Capacity, BruteForceExamples) {
    EXPECT_EQ(metric_capacity_bruteforce(build_metric_space(Matrix{{0}})), 1);
    EXPECT_EQ(metric_capacity_bruteforce(build_metric_space(Matrix{{0, 3}, {3, 0}})), 2);
    Matrix u(5, 5, 1.0);
    for (std::size_t i = 0; i < 5; ++i) u(i, i) = 0.0;
    EXPECT_EQ(metric_capacity_bruteforce(build_metric_space(u)), 5);
}

TEST(Io, EdgeListAndMatrixRoundTrip) {
    const auto g = gen_binary_tree(2);
    std::stringstream ss;
    write_edge_list(ss, g);
    const auto back = read_edge_list(ss);
    EXPECT_EQ(back.n_vertices, g.n_vertices);
    EXPECT_EQ(back.edges, g.edges);

    const Matrix m{{0, 0.1, 1.0 / 3.0}, {0.1, 0, 2}, {1.0 / 3.0, 2, 0}};
    std::stringstream ms;
    write_csv_matrix(ms, m);
    EXPECT_EQ(read_csv_matrix(ms), m);
}
