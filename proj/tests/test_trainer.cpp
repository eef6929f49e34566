#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "mixembed/trainer.hpp"

using namespace mixembed;

namespace {

// Landmark {0} with an identity trunk and scalar readout `w`: point i sits at w * d(0, i).
EmbeddingModel line_model(double w) {
    BaselineParams p;
    p.kind = HeadKind::euclidean;
    p.dim = 1;
    p.landmarks.indices = {0};
    p.trunk = MLPParams{{DenseLayer{Matrix{{1.0}}, {0.0}}}};
    p.readout = MLPParams{{DenseLayer{Matrix{{w}}, {0.0}}}};
    return p;
}

FiniteMetricSpace two_points(double d) { return build_metric_space(Matrix{{0, d}, {d, 0}}); }

FiniteMetricSpace small_space() {
    return build_metric_space(
        Matrix{{0, 1, 2, 2, 3}, {1, 0, 1, 2, 2}, {2, 1, 0, 1, 2}, {2, 2, 1, 0, 1}, {3, 2, 2, 1, 0}});
}

EmbeddingModel random_model(HeadKind kind, const LandmarkSet& landmarks, std::uint64_t seed,
                            std::vector<std::size_t> trunk = {8, 6}) {
    if (kind == HeadKind::gm_mixture) return init_pt({trunk, {}, 3, 1}, landmarks, seed);
    return init_baseline(kind, 4, trunk, landmarks, seed);
}

TrainConfig smoke_config(std::uint64_t seed) {
    TrainConfig c;
    c.iterations = 200;
    c.batch_size = 5;
    c.lr_initial = 1e-2;
    c.lr_final = 1e-3;
    c.seed = seed;
    return c;
}

}  // namespace

TEST(Loss, ExactEmbeddingHasZeroLoss) {
    TrainConfig c;
    c.head_kind = HeadKind::euclidean;
    for (auto form : {LossForm::squared, LossForm::absolute}) {
        c.loss_form = form;
        const auto lv = loss_eval(line_model(1.0), two_points(1.0), {{0, 1}}, c);
        EXPECT_EQ(lv.loss, 0.0);
        for (double g : lv.gradient) EXPECT_EQ(g, 0.0);
    }
}

TEST(Loss, HandExamples) {
    TrainConfig c;
    c.head_kind = HeadKind::euclidean;
    // Embedded distance 2 against target 1: (4 - 1)^2 = 9 and |1 - 2| = 1.
    EXPECT_DOUBLE_EQ(loss_eval(line_model(2.0), two_points(1.0), {{0, 1}}, c).loss, 9.0);
    c.loss_form = LossForm::absolute;
    EXPECT_DOUBLE_EQ(loss_eval(line_model(2.0), two_points(1.0), {{0, 1}}, c).loss, 1.0);
    // Snowflake target: d = 4, alpha = 1/2 gives 2, matched by readout 0.5.
    c.alpha = 0.5;
    EXPECT_NEAR(loss_eval(line_model(0.5), two_points(4.0), {{0, 1}}, c).loss, 0.0, 1e-15);
    c.loss_form = LossForm::squared;
    EXPECT_DOUBLE_EQ(loss_eval(line_model(1.0), two_points(4.0), {{0, 1}}, c).loss, 144.0);  // (16 - 4)^2
}

TEST(Loss, NonnegativeOnRandomModels) {
    const auto space = small_space();
    const auto lm = make_landmarks({0, 4}, 5);
    TrainConfig c;
    for (auto kind : {HeadKind::gm_mixture, HeadKind::euclidean, HeadKind::hyperbolic, HeadKind::fisher_rao})
        for (auto form : {LossForm::squared, LossForm::absolute}) {
            c.loss_form = form;
            c.head_kind = kind;
            EXPECT_GE(loss_eval(random_model(kind, lm, 3), space, all_pairs({0, 1, 2, 3, 4}), c).loss, 0.0);
        }
}

TEST(Config, Validation) {
    TrainConfig c;
    EXPECT_NO_THROW(validate(c));
    c.batch_size = 1;
    EXPECT_THROW(validate(c), ValidationError);
    c = {};
    c.lr_final = 1e-3;
    EXPECT_THROW(validate(c), ValidationError);
    c = {};
    c.alpha = 0.0;
    EXPECT_THROW(validate(c), ValidationError);
    c.alpha = 1.5;
    EXPECT_THROW(validate(c), ValidationError);
    EXPECT_EQ(loss_form_from_string(to_string(LossForm::absolute)), LossForm::absolute);
    EXPECT_THROW(loss_form_from_string("huber"), ValidationError);
}

TEST(LearningRate, EndpointsAndMonotone) {
    TrainConfig c;
    c.iterations = 137;
    EXPECT_NEAR(learning_rate(c, 0), c.lr_initial, 1e-12);
    EXPECT_NEAR(learning_rate(c, c.iterations - 1), c.lr_final, 1e-12);
    for (std::size_t it = 1; it < c.iterations; ++it) EXPECT_LE(learning_rate(c, it), learning_rate(c, it - 1));
    // Geometric midpoint.
    c.iterations = 3;
    EXPECT_NEAR(learning_rate(c, 1), std::sqrt(c.lr_initial * c.lr_final), 1e-15);
}

TEST(Adam, ZeroGradientNoDecayIsNoop) {
    std::vector<double> p{1.0, -2.0, 3.0};
    AdamState s;
    adam_step(p, {0, 0, 0}, s, 0.1, 0.0);
    EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.0}));
}

TEST(Adam, FirstStepMovesByLearningRate) {
    std::vector<double> p{1.0, -2.0, 3.0};
    AdamState s;
    adam_step(p, {0.5, -4.0, 2e-3}, s, 1e-3, 0.0);
    EXPECT_NEAR(p[0], 1.0 - 1e-3, 1e-8);
    EXPECT_NEAR(p[1], -2.0 + 1e-3, 1e-8);
    EXPECT_NEAR(p[2], 3.0 - 1e-3, 1e-8);
    EXPECT_EQ(s.step, 1u);
}

TEST(Adam, WeightDecayShrinksTowardZero) {
    std::vector<double> p{1.0, -2.0};
    AdamState s;
    for (int i = 0; i < 10; ++i) adam_step(p, {0, 0}, s, 1e-2, 0.1);
    EXPECT_LT(p[0], 1.0);
    EXPECT_GT(p[0], 0.0);
    EXPECT_GT(p[1], -2.0);
    EXPECT_LT(p[1], 0.0);
}

TEST(Flatten, RoundTrip) {
    auto m = random_model(HeadKind::gm_mixture, make_landmarks({0, 2}, 5), 5);
    auto v = flatten(m);
    EXPECT_GE(v.size(), param_count(m));
    for (double& x : v) x += 1.0;
    unflatten(m, v);
    EXPECT_EQ(flatten(m), v);
}

TEST(SampleBatch, DistinctAndDeterministic) {
    std::vector<std::size_t> pool(50);
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = 100 + i;
    std::mt19937_64 a(9), b(9);
    const auto x = sample_batch(pool, 32, a), y = sample_batch(pool, 32, b);
    EXPECT_EQ(x, y);
    EXPECT_EQ(std::set<std::size_t>(x.begin(), x.end()).size(), 32u);
    EXPECT_EQ(sample_batch(pool, 80, a).size(), 50u);
}

TEST(Pairs, AllPairsAndTouching) {
    EXPECT_EQ(all_pairs({3, 5, 7}).size(), 3u);
    const auto t = pairs_touching({0, 1, 2, 3}, {2});
    EXPECT_EQ(t.size(), 3u);
    for (const auto& [i, j] : t) EXPECT_TRUE(i == 2 || j == 2);
}

TEST(TrainRun, LossDecreasesOnSmallSpace) {
    const auto space = small_space();
    const auto lm = make_landmarks({0, 4}, 5);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        for (auto kind : {HeadKind::gm_mixture, HeadKind::fisher_rao}) {
            auto c = smoke_config(seed);
            c.head_kind = kind;
            const auto r = train_run(random_model(kind, lm, seed), space, {0, 1, 2, 3, 4}, c);
            ASSERT_EQ(r.loss_history.size(), 200u);
            ASSERT_EQ(r.lr_history.size(), 200u);
            EXPECT_LT(r.loss_history.back(), r.loss_history.front()) << "seed " << seed;
        }
    }
}

TEST(TrainRun, DeterministicForFixedSeed) {
    const auto space = small_space();
    const auto lm = make_landmarks({0, 4}, 5);
    auto c = smoke_config(4);
    c.batch_size = 3;
    const auto a = train_run(random_model(HeadKind::gm_mixture, lm, 1), space, {0, 1, 2, 3, 4}, c);
    const auto b = train_run(random_model(HeadKind::gm_mixture, lm, 1), space, {0, 1, 2, 3, 4}, c);
    EXPECT_EQ(a.loss_history, b.loss_history);
    EXPECT_EQ(flatten(a.final_params), flatten(b.final_params));
}

TEST(TrainRun, ZeroIterationsLeavesModelUnchanged) {
    const auto space = small_space();
    const auto model = random_model(HeadKind::hyperbolic, make_landmarks({0, 4}, 5), 2);
    auto c = smoke_config(0);
    c.iterations = 0;
    c.head_kind = HeadKind::hyperbolic;
    const auto r = train_run(model, space, {0, 1, 2, 3, 4}, c);
    EXPECT_TRUE(r.loss_history.empty());
    EXPECT_EQ(flatten(r.final_params), flatten(model));
}

TEST(Gradcheck, LinearModelIsExact) {
    // Positive trunk weights keep every ReLU active; with a scalar readout and the
    // absolute loss, the loss is piecewise linear along every coordinate.
    const auto space = graph_geodesics(gen_binary_tree(3));
    TrainConfig c;
    c.batch_size = 8;
    c.head_kind = HeadKind::euclidean;
    c.loss_form = LossForm::absolute;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        c.seed = seed;
        auto p = init_baseline(HeadKind::euclidean, 1, {4}, make_landmarks({0, 7, 14}, 15), seed);
        for_each_parameter(p.trunk, [](double& v) { v = std::abs(v) + 0.1; });
        const auto r = gradcheck(p, space, c, 100);
        EXPECT_GT(r.checked, 90u);
        EXPECT_LE(r.max_rel_error, 1e-9) << "seed " << seed;
    }
}

TEST(Gradcheck, RandomConfigsAllHeads) {
    const auto space = graph_geodesics(gen_binary_tree(3));
    const auto lm = make_landmarks({0, 3, 5, 9, 12}, 15);
    std::size_t checked = 0;
    for (std::uint64_t seed = 0; seed < 16; ++seed) {
        const auto kind = static_cast<HeadKind>(seed % 4);
        TrainConfig c;
        c.seed = seed;
        c.batch_size = 6;
        c.head_kind = kind;
        c.loss_form = seed % 8 < 4 ? LossForm::squared : LossForm::absolute;
        c.alpha = seed % 3 == 0 ? 0.7 : 1.0;
        const auto r = gradcheck(random_model(kind, lm, seed), space, c, 40);
        EXPECT_LE(r.max_rel_error, 1e-4) << to_string(kind) << " seed " << seed;
        checked += r.checked;
    }
    EXPECT_GT(checked, 400u);
}

TEST(Experiments, TreeBundleShape) {
    ExperimentOptions o;
    o.config = experiment_config(Scale::desk, 3);
    const auto b = run_tree_experiment(Scale::desk, 0, o);
    EXPECT_EQ(b.space.size(), 63u);
    EXPECT_EQ(b.test.size(), 8u);
    EXPECT_EQ(b.train.size(), 55u);
    EXPECT_EQ(b.landmarks.indices.size(), 20u);
    for (std::size_t l : b.landmarks.indices) EXPECT_TRUE(std::binary_search(b.train.begin(), b.train.end(), l));
    ASSERT_EQ(b.runs.size(), 3u);
    EXPECT_EQ(b.runs[0].name, "GM");
    EXPECT_EQ(b.runs[1].name, "H2");
    EXPECT_EQ(b.runs[2].name, "H15");
    for (const auto& r : b.runs) {
        EXPECT_EQ(r.training.loss_history.size(), 3u);
        EXPECT_EQ(r.train_report.pairs.size(), 55u * 54u / 2u);
        EXPECT_EQ(r.test_report.pairs.size(), 63u * 62u / 2u - 55u * 54u / 2u);
    }
    const auto again = run_tree_experiment(Scale::desk, 0, o);
    EXPECT_EQ(again.runs[0].training.loss_history, b.runs[0].training.loss_history);
}

TEST(Experiments, SphereSweepShape) {
    ExperimentOptions o;
    o.config = experiment_config(Scale::desk, 2);
    const auto b = run_sphere_experiment(3, Scale::desk, 1, SphereRun::sweep, o);
    EXPECT_EQ(b.landmarks.indices.size(), 13u);
    EXPECT_EQ(b.train.size(), 1000u);
    EXPECT_EQ(b.test.size(), 200u);
    ASSERT_EQ(b.runs.size(), 3u);
    EXPECT_EQ(b.runs[1].name, "R15");
    const auto errs = per_point_errors(b.runs[0].test_report);
    EXPECT_EQ(errs.size(), 200u);
    const double f = fraction_below(b.runs[0].test_report, 0.1);
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0);
}
