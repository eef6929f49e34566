#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "analysis.hpp"
#include "baselines.hpp"
#include "error.hpp"
#include "metric_core.hpp"
#include "pt_model.hpp"
#include "transport.hpp"

namespace mixembed {

enum class LossForm { squared, absolute };

inline std::string to_string(LossForm f) { return f == LossForm::squared ? "squared" : "absolute"; }

inline LossForm loss_form_from_string(const std::string& name) {
    if (name == "squared") return LossForm::squared;
    if (name == "absolute") return LossForm::absolute;
    throw ValidationError("unknown loss form '" + name + "'");
}

struct TrainConfig {
    std::size_t iterations = 2000;
    std::size_t batch_size = 32;
    double lr_initial = 1e-4;
    double lr_final = 1e-6;
    double weight_decay = 1e-6;
    double alpha = 1.0;
    LossForm loss_form = LossForm::squared;
    std::uint64_t seed = 0;
    HeadKind head_kind = HeadKind::gm_mixture;
};

inline void validate(const TrainConfig& c) {
    detail::require(c.batch_size >= 2, "batch_size must be >= 2");
    detail::require(c.lr_final > 0.0 && c.lr_initial >= c.lr_final, "learning rates need lr_initial >= lr_final > 0");
    detail::require(c.weight_decay >= 0.0, "weight_decay must be >= 0");
    detail::require(c.alpha > 0.0 && c.alpha <= 1.0, "alpha must lie in (0, 1]");
}

/// Learning rate at 0-based iteration `it`, geometric between the two endpoints.
inline double learning_rate(const TrainConfig& c, std::size_t it) {
    if (c.iterations <= 1 || it == 0) return c.lr_initial;
    if (it + 1 >= c.iterations) return c.lr_final;
    const double t = static_cast<double>(it) / static_cast<double>(c.iterations - 1);
    return c.lr_initial * std::pow(c.lr_final / c.lr_initial, t);
}

// ---------------------------------------------------------------------------
// Models

using EmbeddingModel = std::variant<PTParams, BaselineParams>;

inline HeadKind head_kind_of(const EmbeddingModel& m) {
    if (const auto* b = std::get_if<BaselineParams>(&m)) return b->kind;
    return HeadKind::gm_mixture;
}

inline const LandmarkSet& landmarks_of(const EmbeddingModel& m) {
    return std::visit([](const auto& p) -> const LandmarkSet& { return p.landmarks; }, m);
}

inline std::size_t param_count(const EmbeddingModel& m) {
    return std::visit([](const auto& p) { return param_count(p); }, m);
}

inline std::vector<double> flatten(const EmbeddingModel& m) {
    std::vector<double> out;
    std::visit([&](const auto& p) { for_each_parameter(p, [&](double v) { out.push_back(v); }); }, m);
    return out;
}

inline void unflatten(EmbeddingModel& m, const std::vector<double>& values) {
    std::size_t pos = 0;
    std::visit(
        [&](auto& p) {
            for_each_parameter(p, [&](double& v) {
                detail::require(pos < values.size(), "unflatten: too few values");
                v = values[pos++];
            });
        },
        m);
    detail::require(pos == values.size(), "unflatten: too many values");
}

/// Model output at one point, with the tape needed for the backward pass.
struct PointOutput {
    std::variant<PTTape, BaselineTape> tape;
    GaussianMixture1D mixture;   // mixture heads
    std::vector<double> point;   // comparison-geometry heads
};

inline PointOutput forward_point(const EmbeddingModel& m, const FiniteMetricSpace& space, std::size_t i) {
    if (const auto* pt = std::get_if<PTParams>(&m)) {
        detail::require(pt->output_dim == 1, "training supports univariate mixture outputs only");
        PTTape t = pt_forward_tape(*pt, space, i);
        GaussianMixture1D mix = pt_forward_1d(t, *pt);
        return {std::move(t), std::move(mix), {}};
    }
    const auto& b = std::get<BaselineParams>(m);
    BaselineTape t = baseline_forward_tape(b, space, i);
    std::vector<double> point = t.point;
    return {std::move(t), {}, std::move(point)};
}

/// Head-appropriate distance between two point outputs.
inline double embedded_distance(HeadKind kind, const PointOutput& a, const PointOutput& b) {
    if (kind == HeadKind::gm_mixture) return mw2(a.mixture, b.mixture).distance;
    return std::sqrt(std::max(0.0, head_squared_distance(kind, a.point, b.point).value));
}

/// Embedded distances for every pair, forwarding each point once.
inline std::vector<PairDistance> embedded_distances(const EmbeddingModel& m, const FiniteMetricSpace& space,
                                                    const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    std::vector<std::optional<PointOutput>> cache(space.size());
    const auto get = [&](std::size_t i) -> const PointOutput& {
        if (!cache[i]) cache[i] = forward_point(m, space, i);
        return *cache[i];
    };
    const HeadKind kind = head_kind_of(m);
    std::vector<PairDistance> out;
    out.reserve(pairs.size());
    for (const auto& [i, j] : pairs) out.push_back({i, j, embedded_distance(kind, get(i), get(j))});
    return out;
}

inline std::vector<std::pair<std::size_t, std::size_t>> all_pairs(const std::vector<std::size_t>& points) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t a = 0; a < points.size(); ++a)
        for (std::size_t b = a + 1; b < points.size(); ++b) pairs.emplace_back(points[a], points[b]);
    return pairs;
}

// ---------------------------------------------------------------------------
// Loss

struct LossValue {
    double loss = 0.0;
    std::vector<double> gradient;  // flattened, in for_each_parameter order
};

namespace detail {

// Branch choices that make the loss piecewise smooth: ReLU signs, |s| signs,
// transport bases and absolute-loss signs. Equal signatures at two parameter
// values mean both lie on the same smooth piece.
struct SmoothPiece {
    std::vector<char> signs;
    std::vector<std::size_t> bases;
    bool operator==(const SmoothPiece&) const = default;
};

inline void record_mlp(const MLPTape& t, SmoothPiece& s) {
    for (std::size_t l = 0; l + 1 < t.preactivations.size(); ++l)
        for (double v : t.preactivations[l]) s.signs.push_back(static_cast<char>((v > 0.0) - (v < 0.0)));
}

inline void record_point(const PointOutput& out, SmoothPiece& s) {
    const auto sign = [](double v) { return static_cast<char>((v > 0.0) - (v < 0.0)); };
    if (const auto* t = std::get_if<PTTape>(&out.tape)) {
        if (t->trunk) {
            record_mlp(*t->trunk, s);
            for (double v : t->trunk->output) s.signs.push_back(sign(v));
        }
        record_mlp(t->weight_net, s);
        for (const auto& h : t->heads) {
            record_mlp(h, s);
            s.signs.push_back(sign(h.output[1]));
        }
    } else {
        const auto& b = std::get<BaselineTape>(out.tape);
        record_mlp(b.trunk, s);
        for (double v : b.trunk.output) s.signs.push_back(sign(v));
    }
}

struct PairTerm {
    double loss = 0.0;
    double slope = 0.0;  // d loss / d (embedded distance squared)
    int side = 0;        // sign of d^alpha - D_emb for the absolute form
};

inline PairTerm pair_term(double squared, double target, LossForm form) {
    if (form == LossForm::squared) {
        const double r = squared - target * target;
        return {r * r, 2.0 * r, 0};
    }
    const double dist = std::sqrt(std::max(0.0, squared));
    const double r = target - dist;
    const int side = (r > 0.0) - (r < 0.0);
    return {std::abs(r), dist > 0.0 ? -static_cast<double>(side) / (2.0 * dist) : 0.0, side};
}

inline LossValue evaluate_loss(const EmbeddingModel& model, const FiniteMetricSpace& space,
                               const std::vector<std::pair<std::size_t, std::size_t>>& pairs, const TrainConfig& config,
                               bool with_gradient, SmoothPiece* piece) {
    validate(config);
    const HeadKind kind = head_kind_of(model);
    detail::require(kind == config.head_kind, "loss_eval: model head does not match config.head_kind");
    std::vector<std::size_t> order;
    std::vector<std::optional<PointOutput>> outputs(space.size());
    for (const auto& [i, j] : pairs) {
        detail::require(i != j, "loss_eval: batch pairs must join distinct points");
        detail::require(i < space.size() && j < space.size(), "loss_eval: pair index out of range");
        for (std::size_t v : {i, j})
            if (!outputs[v]) {
                outputs[v] = forward_point(model, space, v);
                order.push_back(v);
            }
    }
    if (piece)
        for (std::size_t v : order) record_point(*outputs[v], *piece);

    // Per-point upstream gradients.
    const bool mixture = kind == HeadKind::gm_mixture;
    std::vector<MixtureUpstream> up_mix;
    std::vector<std::vector<double>> up_point;
    if (with_gradient) {
        if (mixture) {
            const auto& pt = std::get<PTParams>(model);
            up_mix.assign(space.size(), MixtureUpstream{});
            for (std::size_t v : order) up_mix[v] = MixtureUpstream::zeros(pt.mixture_count(), 1);
        } else {
            up_point.assign(space.size(), {});
            for (std::size_t v : order) up_point[v].assign(outputs[v]->point.size(), 0.0);
        }
    }

    LossValue result;
    for (const auto& [i, j] : pairs) {
        const double target = std::pow(space(i, j), config.alpha);
        const PointOutput& a = *outputs[i];
        const PointOutput& b = *outputs[j];
        if (mixture) {
            const MixtureDistance md = mw2(a.mixture, b.mixture);
            const PairTerm term = pair_term(md.plan.value, target, config.loss_form);
            result.loss += term.loss;
            if (piece) {
                piece->bases.insert(piece->bases.end(), md.plan.basis.begin(), md.plan.basis.end());
                piece->signs.push_back(static_cast<char>(term.side));
            }
            if (with_gradient && term.slope != 0.0) {
                const MW2Gradients g = mw2_gradients(a.mixture, b.mixture, md.plan);
                for (auto [v, side] : {std::pair{i, &g.p}, std::pair{j, &g.q}})
                    for (std::size_t k = 0; k < side->mean.size(); ++k) {
                        up_mix[v].mean[k][0] += term.slope * side->mean[k];
                        up_mix[v].cov[k][0] += term.slope * side->std[k];
                        up_mix[v].weight[k] += term.slope * side->weight[k];
                    }
            }
        } else {
            const SquaredDistance sd = head_squared_distance(kind, a.point, b.point);
            const PairTerm term = pair_term(sd.value, target, config.loss_form);
            result.loss += term.loss;
            if (piece) piece->signs.push_back(static_cast<char>(term.side));
            if (with_gradient && term.slope != 0.0)
                for (std::size_t c = 0; c < sd.grad_x.size(); ++c) {
                    up_point[i][c] += term.slope * sd.grad_x[c];
                    up_point[j][c] += term.slope * sd.grad_y[c];
                }
        }
    }
    if (!std::isfinite(result.loss)) throw NumericError("loss_eval: loss is not finite");
    if (!with_gradient) return result;

    EmbeddingModel grad = std::visit([](const auto& p) -> EmbeddingModel { return zeros_like(p); }, model);
    for (std::size_t v : order) {
        if (mixture)
            pt_backward(std::get<PTParams>(model), std::get<PTTape>(outputs[v]->tape), up_mix[v],
                        std::get<PTParams>(grad));
        else
            baseline_backward(std::get<BaselineParams>(model), std::get<BaselineTape>(outputs[v]->tape), up_point[v],
                              std::get<BaselineParams>(grad));
    }
    result.gradient = flatten(grad);
    for (double g : result.gradient)
        if (!std::isfinite(g)) throw NumericError("loss_eval: gradient is not finite");
    return result;
}

}  // namespace detail

/// Pair loss summed over the batch, with its gradient in flattened parameter order.
/// Squared form: (D_emb^2 - d^(2 alpha))^2. Absolute form: |d^alpha - D_emb|.
inline LossValue loss_eval(const EmbeddingModel& model, const FiniteMetricSpace& space,
                           const std::vector<std::pair<std::size_t, std::size_t>>& pairs, const TrainConfig& config) {
    return detail::evaluate_loss(model, space, pairs, config, true, nullptr);
}

// ---------------------------------------------------------------------------
// Optimizer

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::size_t step = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

/// One Adam update with coupled L2 weight decay (g += wd * theta) and bias correction.
inline void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& state, double lr,
                      double weight_decay) {
    detail::require(params.size() == grads.size(), "adam_step: parameter and gradient sizes differ");
    if (state.step == 0 && state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    detail::require(state.m.size() == params.size() && state.v.size() == params.size(),
                    "adam_step: optimizer state does not match the parameters");
    ++state.step;
    const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i] + weight_decay * params[i];
        state.m[i] = kAdamBeta1 * state.m[i] + (1.0 - kAdamBeta1) * g;
        state.v[i] = kAdamBeta2 * state.v[i] + (1.0 - kAdamBeta2) * g * g;
        params[i] -= lr * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + kAdamEpsilon);
    }
}

// ---------------------------------------------------------------------------
// Training

struct TrainReport {
    std::vector<double> loss_history;
    std::vector<double> lr_history;
    EmbeddingModel final_params;
    double wallclock = 0.0;  // seconds; never written to result files
};

/// Draws `count` distinct entries of `pool` (all of them if the pool is small).
inline std::vector<std::size_t> sample_batch(const std::vector<std::size_t>& pool, std::size_t count,
                                             std::mt19937_64& rng) {
    std::vector<std::size_t> v(pool);
    const std::size_t take = std::min(count, v.size());
    for (std::size_t i = 0; i < take; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, v.size() - 1);
        std::swap(v[i], v[pick(rng)]);
    }
    v.resize(take);
    return v;
}

inline TrainReport train_run(EmbeddingModel model, const FiniteMetricSpace& space,
                             const std::vector<std::size_t>& train_indices, const TrainConfig& config) {
    validate(config);
    detail::require(train_indices.size() >= 2, "train_run needs at least two training points");
    for (std::size_t i : train_indices) detail::require(i < space.size(), "train_run: training index out of range");
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(config.seed);
    std::vector<double> params = flatten(model);
    AdamState state;
    TrainReport report{{}, {}, model, 0.0};
    report.loss_history.reserve(config.iterations);
    for (std::size_t it = 0; it < config.iterations; ++it) {
        const auto batch = sample_batch(train_indices, config.batch_size, rng);
        const LossValue lv = loss_eval(model, space, all_pairs(batch), config);
        const double lr = learning_rate(config, it);
        adam_step(params, lv.gradient, state, lr, config.weight_decay);
        unflatten(model, params);
        report.loss_history.push_back(lv.loss);
        report.lr_history.push_back(lr);
    }
    report.final_params = std::move(model);
    report.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

// ---------------------------------------------------------------------------
// Gradient check

inline constexpr double kGradcheckStep = 1e-5;
inline constexpr double kGradcheckNoiseUlps = 16.0;

struct GradcheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;  // coordinates whose step crosses a kink or basis change
};

/// Central differences on `trials` seeded parameter coordinates of the loss over
/// all pairs of a seeded batch. A coordinate is skipped when the points
/// theta +- h do not share the smooth piece of theta.
///
/// Relative error is max(0, |a - f| - noise) / max(|a|, |f|, 1e-6 * max_i |a_i|, 1e-12),
/// where noise = 16 eps (|L+| + |L-|) / 2h is the rounding floor of the difference quotient.
inline GradcheckResult gradcheck(const EmbeddingModel& model, const FiniteMetricSpace& space, const TrainConfig& config,
                                 std::size_t trials) {
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> everyone(space.size());
    std::iota(everyone.begin(), everyone.end(), std::size_t{0});
    const auto pairs = all_pairs(sample_batch(everyone, config.batch_size, rng));
    detail::require(!pairs.empty(), "gradcheck needs at least two points");

    detail::SmoothPiece base_piece;
    const LossValue base = detail::evaluate_loss(model, space, pairs, config, true, &base_piece);
    double scale = 0.0;
    for (double g : base.gradient) scale = std::max(scale, std::abs(g));
    const std::vector<double> theta = flatten(model);
    detail::require(!theta.empty(), "gradcheck: model has no parameters");

    GradcheckResult r;
    std::uniform_int_distribution<std::size_t> coord(0, theta.size() - 1);
    EmbeddingModel probe = model;
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t c = coord(rng);
        double values[2];
        bool smooth = true;
        for (int side = 0; side < 2; ++side) {
            std::vector<double> shifted = theta;
            shifted[c] += side == 0 ? kGradcheckStep : -kGradcheckStep;
            unflatten(probe, shifted);
            detail::SmoothPiece piece;
            values[side] = detail::evaluate_loss(probe, space, pairs, config, false, &piece).loss;
            smooth = smooth && piece == base_piece;
        }
        if (!smooth) {
            ++r.skipped;
            continue;
        }
        const double fd = (values[0] - values[1]) / (2.0 * kGradcheckStep);
        const double a = base.gradient[c];
        const double noise = kGradcheckNoiseUlps * std::numeric_limits<double>::epsilon() *
                             (std::abs(values[0]) + std::abs(values[1])) / (2.0 * kGradcheckStep);
        const double denom = std::max({std::abs(a), std::abs(fd), 1e-6 * scale, 1e-12});
        r.max_rel_error = std::max(r.max_rel_error, std::max(0.0, std::abs(a - fd) - noise) / denom);
        ++r.checked;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Experiments

enum class Scale { desk, paper };

inline std::string to_string(Scale s) { return s == Scale::paper ? "paper" : "desk"; }

inline Scale scale_from_string(const std::string& name) {
    if (name == "paper") return Scale::paper;
    if (name == "desk") return Scale::desk;
    throw ValidationError("unknown scale '" + name + "'");
}

/// One trained model with its train and test error reports.
struct ModelRun {
    std::string name;
    HeadKind kind = HeadKind::gm_mixture;
    std::size_t dim = 1;
    TrainConfig config;
    TrainReport training;
    DistortionReport train_report;
    DistortionReport test_report;
};

struct ExperimentBundle {
    std::string name;
    Scale scale = Scale::desk;
    std::uint64_t seed = 0;
    FiniteMetricSpace space;
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    LandmarkSet landmarks;
    std::vector<ModelRun> runs;
};

/// Pairs of `points` with at least one member in `focus`.
inline std::vector<std::pair<std::size_t, std::size_t>> pairs_touching(const std::vector<std::size_t>& points,
                                                                       const std::vector<std::size_t>& focus) {
    std::vector<char> in_focus;
    for (std::size_t f : focus) {
        if (f >= in_focus.size()) in_focus.resize(f + 1, 0);
        in_focus[f] = 1;
    }
    const auto hit = [&](std::size_t v) { return v < in_focus.size() && in_focus[v]; };
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& pr : all_pairs(points))
        if (hit(pr.first) || hit(pr.second)) out.push_back(pr);
    return out;
}

struct ModelSpec {
    std::string name;
    HeadKind kind = HeadKind::gm_mixture;
    std::size_t dim = 1;  // output dimension of the comparison geometry
};

/// Trains each model on the bundle's train points from the same trunk seed and
/// reports train pairs (both points in train) and test pairs (train + test
/// points, at least one in test).
inline void run_models(ExperimentBundle& bundle, const std::vector<ModelSpec>& specs,
                       const std::vector<std::size_t>& trunk_widths, std::size_t mixture_count, TrainConfig config,
                       const std::vector<std::pair<std::size_t, std::size_t>>& test_pairs) {
    const auto train_pairs = all_pairs(bundle.train);
    for (const auto& spec : specs) {
        EmbeddingModel model = spec.kind == HeadKind::gm_mixture
                                   ? EmbeddingModel{init_pt({trunk_widths, {}, mixture_count, 1}, bundle.landmarks,
                                                            bundle.seed)}
                                   : EmbeddingModel{init_baseline(spec.kind, spec.dim, trunk_widths, bundle.landmarks,
                                                                  bundle.seed)};
        config.head_kind = spec.kind;
        config.seed = bundle.seed;
        ModelRun run{spec.name, spec.kind, spec.dim, config, train_run(std::move(model), bundle.space, bundle.train, config),
                     {}, {}};
        const auto& trained = run.training.final_params;
        run.train_report =
            distortion_report(bundle.space, embedded_distances(trained, bundle.space, train_pairs), config.alpha);
        run.test_report =
            distortion_report(bundle.space, embedded_distances(trained, bundle.space, test_pairs), config.alpha);
        bundle.runs.push_back(std::move(run));
    }
}

/// Trunk widths used by the experiment drivers at each scale.
inline std::vector<std::size_t> tree_trunk(Scale) { return {64, 64, 32}; }
inline std::vector<std::size_t> sphere_trunk(Scale s) {
    return s == Scale::paper ? std::vector<std::size_t>{512, 256, 256} : std::vector<std::size_t>{64, 64, 32};
}

/// Default optimizer settings per scale. Desk runs use the absolute loss and a
/// larger step size to fit the reduced iteration budget.
inline TrainConfig experiment_config(Scale s, std::size_t iterations) {
    TrainConfig c;
    c.iterations = iterations;
    if (s == Scale::desk) {
        c.lr_initial = 1e-2;
        c.lr_final = 1e-4;
        c.loss_form = LossForm::absolute;
    }
    return c;
}

/// Overrides for the experiment drivers; unset fields keep the scale defaults.
struct ExperimentOptions {
    std::optional<TrainConfig> config;
    std::size_t mixture_count = 5;
    std::optional<std::size_t> landmarks;
};

/// Binary tree: GM mixture heads against the Fisher-Rao plane (H^2) and H^15.
inline ExperimentBundle run_tree_experiment(Scale scale, std::uint64_t seed, const ExperimentOptions& options = {}) {
    const int depth = scale == Scale::paper ? 6 : 5;
    const std::size_t test_size = scale == Scale::paper ? 16 : 8;
    const std::size_t landmark_count = options.landmarks.value_or(20);
    ExperimentBundle b{"binary_tree", scale, seed, graph_geodesics(gen_binary_tree(depth)), {}, {}, {}, {}};
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(b.space.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    b.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(test_size));
    b.train.assign(order.begin() + static_cast<std::ptrdiff_t>(test_size), order.end());
    std::sort(b.test.begin(), b.test.end());
    std::sort(b.train.begin(), b.train.end());
    auto chosen = sample_batch(b.train, landmark_count, rng);
    std::sort(chosen.begin(), chosen.end());
    b.landmarks = make_landmarks(chosen, b.space.size());

    const std::vector<ModelSpec> specs{
        {"GM", HeadKind::gm_mixture, 1}, {"H2", HeadKind::fisher_rao, 1}, {"H15", HeadKind::hyperbolic, 15}};
    std::vector<std::size_t> everyone(b.space.size());
    std::iota(everyone.begin(), everyone.end(), std::size_t{0});
    run_models(b, specs, tree_trunk(scale), options.mixture_count,
               options.config.value_or(experiment_config(scale, scale == Scale::paper ? 10000 : 2000)),
               pairs_touching(everyone, b.test));
    return b;
}

struct SphereSizes {
    std::size_t train = 1000;
    std::size_t test = 200;
    std::size_t iterations = 500;
};

inline SphereSizes sphere_sizes(Scale s, bool visualization) {
    if (s == Scale::paper) return {10000, 200, visualization ? std::size_t{160} : std::size_t{500}};
    return {1000, 200, 500};
}

enum class SphereRun { visualization, sweep };

/// Points on S^N. Landmarks occupy indices [0, L), training points follow, then
/// test points. The visualization run (N = 2) trains a GM model with 13
/// landmarks; sweep runs use N + 10 landmarks and add Euclidean R^15 and H^15.
inline ExperimentBundle run_sphere_experiment(std::size_t N, Scale scale, std::uint64_t seed,
                                              SphereRun kind = SphereRun::sweep, const ExperimentOptions& options = {}) {
    detail::require(N >= 1, "sphere dimension must be >= 1");
    const bool visual = kind == SphereRun::visualization;
    if (visual) detail::require(N == 2, "the visualization run is defined on S^2");
    const std::size_t L = options.landmarks.value_or(visual ? 13 : N + 10);
    const SphereSizes sizes = sphere_sizes(scale, visual);
    std::mt19937_64 seeds(seed);
    const std::uint64_t landmark_seed = seeds(), sample_seed = seeds();
    SpherePointSet all = quasi_uniform_landmarks(N, L, landmark_seed);
    const SpherePointSet sample = sphere_sample(N, sizes.train + sizes.test, sample_seed);
    all.points.insert(all.points.end(), sample.points.begin(), sample.points.end());

    ExperimentBundle b{visual ? "sphere_s2" : "sphere_sweep_N" + std::to_string(N), scale, seed,
                       sphere_metric_space(all), {}, {}, {}, {}};
    std::vector<std::size_t> lm(L);
    std::iota(lm.begin(), lm.end(), std::size_t{0});
    b.landmarks = make_landmarks(lm, b.space.size());
    for (std::size_t i = 0; i < sizes.train; ++i) b.train.push_back(L + i);
    for (std::size_t i = 0; i < sizes.test; ++i) b.test.push_back(L + sizes.train + i);

    std::vector<ModelSpec> specs{{"GM", HeadKind::gm_mixture, 1}};
    if (!visual) {
        specs.push_back({"R15", HeadKind::euclidean, 15});
        specs.push_back({"H15", HeadKind::hyperbolic, 15});
    }
    run_models(b, specs, sphere_trunk(scale), options.mixture_count,
               options.config.value_or(experiment_config(scale, sizes.iterations)), all_pairs(b.test));
    return b;
}

/// Per test point: mean and max relative error over its pairs with other test points.
struct PointError {
    std::size_t point = 0;
    double mean_rel_error = 0.0;
    double max_rel_error = 0.0;
};

inline std::vector<PointError> per_point_errors(const DistortionReport& report) {
    std::vector<std::size_t> ids;
    for (const auto& p : report.pairs) {
        ids.push_back(p.i);
        ids.push_back(p.j);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    std::vector<PointError> out(ids.size());
    std::vector<std::size_t> counts(ids.size(), 0);
    for (std::size_t k = 0; k < ids.size(); ++k) out[k].point = ids[k];
    const auto slot = [&](std::size_t v) {
        return static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), v) - ids.begin());
    };
    for (const auto& p : report.pairs)
        for (std::size_t s : {slot(p.i), slot(p.j)}) {
            out[s].mean_rel_error += p.rel_error;
            out[s].max_rel_error = std::max(out[s].max_rel_error, p.rel_error);
            ++counts[s];
        }
    for (std::size_t k = 0; k < out.size(); ++k) out[k].mean_rel_error /= static_cast<double>(counts[k]);
    return out;
}

/// Fraction of report pairs with relative error strictly below `threshold`.
inline double fraction_below(const DistortionReport& report, double threshold) {
    std::size_t hits = 0;
    for (const auto& p : report.pairs) hits += p.rel_error < threshold ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(report.pairs.size());
}

/// Dimension-vs-error table row: mean test error per model at one sphere dimension.
struct SweepRow {
    std::size_t N = 0;
    std::vector<std::pair<std::string, double>> mean_test_error;
};

inline std::vector<SweepRow> run_dimension_sweep(const std::vector<std::size_t>& dims, Scale scale, std::uint64_t seed,
                                                 const ExperimentOptions& options = {}) {
    std::vector<SweepRow> rows;
    for (std::size_t N : dims) {
        const ExperimentBundle b = run_sphere_experiment(N, scale, seed, SphereRun::sweep, options);
        SweepRow row{N, {}};
        for (const auto& r : b.runs) row.mean_test_error.emplace_back(r.name, r.test_report.mean_rel_error);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace mixembed
