#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "error.hpp"
#include "metric_core.hpp"
#include "pt_model.hpp"

namespace mixembed {

enum class HeadKind { gm_mixture, euclidean, hyperbolic, fisher_rao };

inline std::string to_string(HeadKind kind) {
    switch (kind) {
        case HeadKind::gm_mixture: return "gm_mixture";
        case HeadKind::euclidean: return "euclidean";
        case HeadKind::hyperbolic: return "hyperbolic";
        case HeadKind::fisher_rao: return "fisher_rao";
    }
    return "unknown";
}

inline HeadKind head_kind_from_string(const std::string& name) {
    if (name == "gm_mixture" || name == "gm") return HeadKind::gm_mixture;
    if (name == "euclidean") return HeadKind::euclidean;
    if (name == "hyperbolic") return HeadKind::hyperbolic;
    if (name == "fisher_rao") return HeadKind::fisher_rao;
    throw ValidationError("unknown head kind '" + name + "'");
}

/// Point of the upper half-space H^d, stored in R^{d+1} with positive last coordinate.
struct HyperbolicPoint {
    std::vector<double> coords;
};

/// Non-degenerate univariate Gaussian N(mean, std^2), std > 0.
struct FisherRaoPoint {
    double mean = 0.0;
    double std = 1.0;
};

/// arccosh as ln(z + sqrt(z^2 - 1)) with z clamped to >= 1.
inline double stable_arccosh(double z) {
    z = std::max(z, 1.0);
    return std::log(z + std::sqrt((z - 1.0) * (z + 1.0)));
}

namespace detail {

inline double half_space_argument(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() == y.size() && x.size() >= 2, "hyperbolic points must share a dimension >= 1");
    const double xn = x.back(), yn = y.back();
    require(xn > 0.0 && yn > 0.0, "hyperbolic points need a positive last coordinate");
    double sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sq += (x[i] - y[i]) * (x[i] - y[i]);
    return 1.0 + sq / (2.0 * xn * yn);
}

}  // namespace detail

inline double hyperbolic_distance(const HyperbolicPoint& x, const HyperbolicPoint& y) {
    return stable_arccosh(detail::half_space_argument(x.coords, y.coords));
}

/// Closed-form Fisher-Rao distance through the reflected-point ratio.
inline double fisher_rao_distance(const FisherRaoPoint& a, const FisherRaoPoint& b) {
    detail::require(a.std > 0.0 && b.std > 0.0, "Fisher-Rao points need std > 0");
    if (a.mean == b.mean && a.std == b.std) return 0.0;
    const double dx = (a.mean - b.mean) / std::numbers::sqrt2;
    const double reflected = std::hypot(dx, a.std + b.std);
    const double direct = std::hypot(dx, a.std - b.std);
    return std::numbers::sqrt2 * std::log((reflected + direct) / (reflected - direct));
}

inline double softplus(double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }
inline double sigmoid(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

inline constexpr double kPositivityFloor = 1e-6;

/// Raw readout width for a head of the given kind and target dimension.
inline std::size_t readout_width(HeadKind kind, std::size_t dim) {
    switch (kind) {
        case HeadKind::euclidean: return dim;
        case HeadKind::hyperbolic: return dim + 1;
        case HeadKind::fisher_rao: return 2;
        case HeadKind::gm_mixture: break;
    }
    throw ValidationError("gm_mixture is not a readout head");
}

/// Maps raw readout values into the target geometry; the positive coordinate
/// passes through softplus + 1e-6.
inline std::vector<double> head_transform(HeadKind kind, std::vector<double> raw) {
    if (kind == HeadKind::hyperbolic || kind == HeadKind::fisher_rao) raw.back() = softplus(raw.back()) + kPositivityFloor;
    return raw;
}

/// Chain rule through head_transform.
inline std::vector<double> head_transform_backward(HeadKind kind, const std::vector<double>& raw,
                                                   std::vector<double> upstream) {
    if (kind == HeadKind::hyperbolic || kind == HeadKind::fisher_rao) upstream.back() *= sigmoid(raw.back());
    return upstream;
}

/// Linear readout of trunk features followed by the geometry's coordinate map.
/// Euclidean: R^d. Hyperbolic: H^d in R^{d+1}. Fisher-Rao: (mean, std).
inline std::vector<double> head_forward(HeadKind kind, const std::vector<double>& trunk_output, const MLPParams& readout) {
    detail::require(readout.depth() == 1, "head readout must be a single linear layer");
    return head_transform(kind, mlp_forward(readout, trunk_output));
}

/// Squared distance between two head outputs and its gradients.
struct SquaredDistance {
    double value = 0.0;
    std::vector<double> grad_x;
    std::vector<double> grad_y;
};

namespace detail {

// 2 arccosh(z) / sqrt(z^2 - 1), continuous at z = 1.
inline double arccosh_sq_slope(double z) {
    const double eps = z - 1.0;
    if (eps < 1e-8) return 2.0 * (1.0 - eps / 3.0);
    return 2.0 * stable_arccosh(z) / std::sqrt((z - 1.0) * (z + 1.0));
}

inline SquaredDistance hyperbolic_squared(const std::vector<double>& x, const std::vector<double>& y) {
    const double z = half_space_argument(x, y);
    const double d = stable_arccosh(z);
    const double slope = arccosh_sq_slope(z);
    const std::size_t n = x.size() - 1;
    const double xn = x[n], yn = y[n];
    double sq = 0.0;
    for (std::size_t i = 0; i <= n; ++i) sq += (x[i] - y[i]) * (x[i] - y[i]);
    SquaredDistance r{d * d, std::vector<double>(n + 1), std::vector<double>(n + 1)};
    const double denom = xn * yn;
    for (std::size_t i = 0; i <= n; ++i) {
        r.grad_x[i] = slope * (x[i] - y[i]) / denom;
        r.grad_y[i] = -r.grad_x[i];
    }
    r.grad_x[n] -= slope * sq / (2.0 * xn * xn * yn);
    r.grad_y[n] -= slope * sq / (2.0 * xn * yn * yn);
    return r;
}

}  // namespace detail

/// Squared target-space distance between head outputs, with gradients.
/// Fisher-Rao uses d_F^2 = 2 d_H^2 on (mean / sqrt 2, std).
inline SquaredDistance head_squared_distance(HeadKind kind, const std::vector<double>& x, const std::vector<double>& y) {
    detail::require(x.size() == y.size(), "head outputs differ in length");
    switch (kind) {
        case HeadKind::euclidean: {
            SquaredDistance r{0.0, std::vector<double>(x.size()), std::vector<double>(x.size())};
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double diff = x[i] - y[i];
                r.value += diff * diff;
                r.grad_x[i] = 2.0 * diff;
                r.grad_y[i] = -2.0 * diff;
            }
            return r;
        }
        case HeadKind::hyperbolic: return detail::hyperbolic_squared(x, y);
        case HeadKind::fisher_rao: {
            detail::require(x.size() == 2, "Fisher-Rao points are (mean, std)");
            const double s = 1.0 / std::numbers::sqrt2;
            auto r = detail::hyperbolic_squared({x[0] * s, x[1]}, {y[0] * s, y[1]});
            r.value *= 2.0;
            for (auto* g : {&r.grad_x, &r.grad_y}) {
                (*g)[0] *= 2.0 * s;
                (*g)[1] *= 2.0;
            }
            return r;
        }
        case HeadKind::gm_mixture: break;
    }
    throw ValidationError("head_squared_distance does not handle mixtures");
}

/// Shared trunk followed by a single linear readout into a comparison geometry.
struct BaselineParams {
    LandmarkSet landmarks;
    MLPParams trunk;
    MLPParams readout;
    HeadKind kind = HeadKind::euclidean;
    std::size_t dim = 1;
};

inline BaselineParams init_baseline(HeadKind kind, std::size_t dim, const std::vector<std::size_t>& trunk_widths,
                                    LandmarkSet landmarks, std::uint64_t seed) {
    detail::require(kind != HeadKind::gm_mixture, "init_baseline: use init_pt for mixture heads");
    detail::require(!trunk_widths.empty(), "baseline models need a trunk");
    std::mt19937_64 rng(seed);
    BaselineParams p;
    p.kind = kind;
    p.dim = kind == HeadKind::fisher_rao ? 1 : dim;
    p.landmarks = std::move(landmarks);
    std::vector<std::size_t> widths{p.landmarks.indices.size()};
    widths.insert(widths.end(), trunk_widths.begin(), trunk_widths.end());
    p.trunk = init_mlp(widths, rng);
    p.readout = init_mlp({trunk_widths.back(), readout_width(kind, p.dim)}, rng);
    return p;
}

template <class Model, class F>
    requires std::same_as<std::remove_const_t<Model>, BaselineParams>
void for_each_parameter(Model& p, F&& f) {
    for_each_parameter(p.trunk, f);
    for_each_parameter(p.readout, f);
}

struct BaselineTape {
    MLPTape trunk;
    std::vector<double> hidden;
    MLPTape readout;
    std::vector<double> point;
};

inline BaselineTape baseline_forward_tape(const BaselineParams& p, const FiniteMetricSpace& space, std::size_t point) {
    BaselineTape t;
    t.trunk = mlp_forward_tape(p.trunk, landmark_features(space, p.landmarks, point));
    t.hidden = relu(t.trunk.output);
    t.readout = mlp_forward_tape(p.readout, t.hidden);
    t.point = head_transform(p.kind, t.readout.output);
    return t;
}

inline BaselineParams zeros_like(const BaselineParams& p) {
    BaselineParams z = p;
    z.trunk = zeros_like(p.trunk);
    z.readout = zeros_like(p.readout);
    return z;
}

/// Accumulates parameter gradients for an upstream gradient on the output point.
inline void baseline_backward(const BaselineParams& p, const BaselineTape& t, const std::vector<double>& upstream,
                              BaselineParams& grad) {
    auto raw_grad = head_transform_backward(p.kind, t.readout.output, upstream);
    auto hidden_grad = mlp_backward(p.readout, t.readout, std::move(raw_grad), grad.readout);
    for (std::size_t i = 0; i < hidden_grad.size(); ++i)
        if (!(t.trunk.output[i] > 0.0)) hidden_grad[i] = 0.0;
    mlp_backward(p.trunk, t.trunk, std::move(hidden_grad), grad.trunk);
}

inline std::size_t param_count(const BaselineParams& p) { return nonzero_count(p.trunk) + nonzero_count(p.readout); }

}  // namespace mixembed
