#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "error.hpp"
#include "metric_core.hpp"
#include "pt_model.hpp"
#include "transport.hpp"

namespace mixembed {

/// Shift that moves a set of vectors into the strictly increasing cone x_1 < ... < x_D.
struct BiasVector {
    std::vector<double> b;
};

/// Safety gap added at every coordinate step of initialize_bias.
inline double bias_margin(const std::vector<std::vector<double>>& vectors) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& x : vectors)
        for (double v : x) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    return 1e-6 * (1.0 + (hi - lo));
}

/// Cumulative bias construction: b_1 = 0 and
/// b_k = b_{k-1} + max_n ReLU((x^n_{k-1} + b_{k-1}) - x^n_k) + margin.
inline BiasVector initialize_bias(const std::vector<std::vector<double>>& vectors) {
    detail::require(!vectors.empty(), "initialize_bias needs at least one vector");
    const std::size_t D = vectors.front().size();
    detail::require(D >= 1, "initialize_bias needs vectors of length >= 1");
    for (const auto& x : vectors) detail::require(x.size() == D, "initialize_bias: vectors differ in length");
    const double margin = bias_margin(vectors);
    BiasVector out{std::vector<double>(D, 0.0)};
    for (std::size_t k = 1; k < D; ++k) {
        double worst = 0.0;
        for (const auto& x : vectors) worst = std::max(worst, x[k - 1] + out.b[k - 1] - x[k]);
        out.b[k] = out.b[k - 1] + worst + margin;
    }
    return out;
}

/// Uniform empirical measure (1/D) sum_k delta at sqrt(D) (x + b)_k, as a zero-variance mixture.
inline GaussianMixture1D ball_to_empirical(const std::vector<double>& x, const BiasVector& bias) {
    const std::size_t D = x.size();
    detail::require(D >= 1 && bias.b.size() == D, "ball_to_empirical: dimension mismatch");
    const double scale = std::sqrt(static_cast<double>(D));
    const double weight = 1.0 / static_cast<double>(D);
    GaussianMixture1D m;
    m.components.reserve(D);
    for (std::size_t k = 0; k < D; ++k) m.components.push_back({weight, {scale * (x[k] + bias.b[k]), 0.0}});
    return m;
}

struct ConstructiveEmbedding {
    BiasVector bias;
    std::vector<GaussianMixture1D> mixtures;  // one per point
};

/// Snowflake, Frechet features over all points, bias, then the empirical-measure map.
///
/// Every pair satisfies d^alpha <= MW2 <= sqrt(n) d^alpha.
inline ConstructiveEmbedding constructive_embed(const FiniteMetricSpace& space, double alpha) {
    const std::size_t n = space.size();
    detail::require(n >= 2, "constructive_embed needs at least two points");
    const FiniteMetricSpace flake = snowflake(space, alpha);
    const LandmarkSet everyone = all_points_as_landmarks(n);
    std::vector<std::vector<double>> features;
    features.reserve(n);
    for (std::size_t i = 0; i < n; ++i) features.push_back(landmark_features(flake, everyone, i));
    ConstructiveEmbedding out{initialize_bias(features), {}};
    out.mixtures.reserve(n);
    for (const auto& u : features) out.mixtures.push_back(ball_to_empirical(u, out.bias));
    return out;
}

/// Per point, per component target means: targets[point][k] has length d.
using MemorizationTargets = std::vector<std::vector<std::vector<double>>>;

/// Builds a transformer whose output at every point x of `space` is exactly
/// (1/K) sum_k N_d(mu_k(x), 0).
///
/// All points are landmarks. The shared trunk computes, for each point j, the
/// bump ReLU(1 - |u - u_j|_1 / r) with r half the smallest max-norm feature
/// separation, so bumps are one-hot on the data. Heads read the target means
/// off the bumps; the weight network and covariance factors are zero.
inline PTParams memorize_pt(const FiniteMetricSpace& space, const MemorizationTargets& targets) {
    const std::size_t n = space.size();
    detail::require(targets.size() == n, "memorize_pt: one target list per point is required");
    const std::size_t K = targets.front().size();
    detail::require(K >= 1, "memorize_pt: at least one component per point");
    const std::size_t d = targets.front().front().size();
    detail::require(d >= 1 && d <= 3, "memorize_pt supports mean dimensions 1..3");
    for (const auto& per_point : targets) {
        detail::require(per_point.size() == K, "memorize_pt: every point needs K targets");
        for (const auto& mu : per_point) detail::require(mu.size() == d, "memorize_pt: target dimensions differ");
    }

    const LandmarkSet everyone = all_points_as_landmarks(n);
    std::vector<std::vector<double>> features;
    for (std::size_t i = 0; i < n; ++i) features.push_back(landmark_features(space, everyone, i));
    double separation = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double gap = 0.0;
            for (std::size_t l = 0; l < n; ++l) gap = std::max(gap, std::abs(features[i][l] - features[j][l]));
            separation = std::min(separation, gap);
        }
    if (n >= 2 && !(separation > 0.0))
        throw ValidationError("memorize_pt: two points have identical features");
    const double radius = n >= 2 ? 0.5 * separation : 1.0;

    // Layer 1: for each (point j, feature l) the two halves of |u_l - u_{j,l}|.
    DenseLayer split{Matrix(2 * n * n, n), std::vector<double>(2 * n * n, 0.0)};
    // Layer 2: bump_j = 1 - (1/r) * sum_l |u_l - u_{j,l}|.
    DenseLayer bump{Matrix(n, 2 * n * n), std::vector<double>(n, 1.0)};
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t l = 0; l < n; ++l) {
            const std::size_t up = 2 * (j * n + l), down = up + 1;
            split.weight(up, l) = 1.0;
            split.bias[up] = -features[j][l];
            split.weight(down, l) = -1.0;
            split.bias[down] = features[j][l];
            bump.weight(j, up) = -1.0 / radius;
            bump.weight(j, down) = -1.0 / radius;
        }

    PTParams p;
    p.landmarks = everyone;
    p.output_dim = d;
    p.trunk = MLPParams{{std::move(split), std::move(bump)}};
    p.weight_net = MLPParams{{DenseLayer{Matrix(K, n), std::vector<double>(K, 0.0)}}};
    for (std::size_t k = 0; k < K; ++k) {
        DenseLayer readout{Matrix(d + d * d, n), std::vector<double>(d + d * d, 0.0)};
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t m = 0; m < d; ++m) readout.weight(m, j) = targets[j][k][m];
        p.heads.push_back(MLPParams{{std::move(readout)}});
    }
    return p;
}

/// The mixture (1/K) sum_k N_d(mu_k, 0) a memorized transformer should reproduce.
inline GaussianMixtureD memorization_target(const std::vector<std::vector<double>>& means) {
    GaussianMixtureD m;
    const double w = 1.0 / static_cast<double>(means.size());
    for (const auto& mu : means) m.components.push_back({w, {mu, Matrix(mu.size(), mu.size())}});
    return m;
}

}  // namespace mixembed
