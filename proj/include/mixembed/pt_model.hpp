#pragma once

#include <algorithm>
#include <concepts>
#include <numbers>
#include <type_traits>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"
#include "metric_core.hpp"
#include "transport.hpp"

namespace mixembed {

// ---------------------------------------------------------------------------
// Feedforward ReLU networks

/// Affine map x -> weight * x + bias, with weight stored out x in.
struct DenseLayer {
    Matrix weight;
    std::vector<double> bias;

    [[nodiscard]] std::size_t in_dim() const { return weight.cols(); }
    [[nodiscard]] std::size_t out_dim() const { return weight.rows(); }
};

/// Alternating affine / ReLU layers; the last layer is affine only.
/// Depth counts affine layers.
struct MLPParams {
    std::vector<DenseLayer> layers;

    [[nodiscard]] std::size_t in_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
    [[nodiscard]] std::size_t out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }
    [[nodiscard]] std::size_t depth() const { return layers.size(); }
};

/// Checks that consecutive layer shapes chain and all entries are finite.
inline void validate(const MLPParams& p) {
    detail::require(!p.layers.empty(), "network must have at least one layer");
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const auto& layer = p.layers[l];
        detail::require(layer.bias.size() == layer.out_dim(), "layer bias length must match its output width");
        if (l > 0) detail::require(layer.in_dim() == p.layers[l - 1].out_dim(), "layer shapes do not chain");
        for (double v : layer.weight.data()) detail::require(std::isfinite(v), "network weights must be finite");
        for (double v : layer.bias) detail::require(std::isfinite(v), "network biases must be finite");
    }
}

/// Intermediate values of one forward pass, kept for the backward pass.
struct MLPTape {
    std::vector<std::vector<double>> inputs;      // input to each layer
    std::vector<std::vector<double>> preactivations;
    std::vector<double> output;
};

inline std::vector<double> affine(const DenseLayer& layer, const std::vector<double>& x) {
    std::vector<double> z(layer.bias);
    for (std::size_t o = 0; o < layer.out_dim(); ++o) {
        double s = 0.0;
        for (std::size_t i = 0; i < layer.in_dim(); ++i) s += layer.weight(o, i) * x[i];
        z[o] += s;
    }
    return z;
}

inline MLPTape mlp_forward_tape(const MLPParams& p, std::vector<double> x) {
    detail::require(!p.layers.empty(), "mlp_forward: empty network");
    detail::require(x.size() == p.in_dim(), "mlp_forward: input has length " + std::to_string(x.size()) +
                                                ", network expects " + std::to_string(p.in_dim()));
    MLPTape tape;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        std::vector<double> z = affine(p.layers[l], x);
        tape.inputs.push_back(std::move(x));
        tape.preactivations.push_back(z);
        if (l + 1 < p.layers.size())
            for (double& v : z) v = std::max(v, 0.0);
        x = std::move(z);
    }
    tape.output = std::move(x);
    return tape;
}

inline std::vector<double> mlp_forward(const MLPParams& p, const std::vector<double>& x) {
    return mlp_forward_tape(p, x).output;
}

/// Same-shaped container with every entry zero; used to hold gradients.
inline MLPParams zeros_like(const MLPParams& p) {
    MLPParams z;
    for (const auto& layer : p.layers)
        z.layers.push_back({Matrix(layer.out_dim(), layer.in_dim()), std::vector<double>(layer.out_dim(), 0.0)});
    return z;
}

/// Accumulates parameter gradients into `grad` and returns the gradient with respect to the input.
/// ReLU'(0) is taken as 0.
inline std::vector<double> mlp_backward(const MLPParams& p, const MLPTape& tape, std::vector<double> upstream,
                                        MLPParams& grad) {
    detail::require(upstream.size() == p.out_dim(), "mlp_backward: upstream gradient has the wrong length");
    for (std::size_t l = p.layers.size(); l-- > 0;) {
        const DenseLayer& layer = p.layers[l];
        if (l + 1 < p.layers.size())
            for (std::size_t o = 0; o < upstream.size(); ++o)
                if (!(tape.preactivations[l][o] > 0.0)) upstream[o] = 0.0;
        DenseLayer& g = grad.layers[l];
        const auto& in = tape.inputs[l];
        std::vector<double> down(layer.in_dim(), 0.0);
        for (std::size_t o = 0; o < layer.out_dim(); ++o) {
            const double go = upstream[o];
            if (go == 0.0) continue;
            g.bias[o] += go;
            for (std::size_t i = 0; i < layer.in_dim(); ++i) {
                g.weight(o, i) += go * in[i];
                down[i] += go * layer.weight(o, i);
            }
        }
        upstream = std::move(down);
    }
    return upstream;
}

/// Glorot-uniform weights, zero biases.
inline MLPParams init_mlp(const std::vector<std::size_t>& widths, std::mt19937_64& rng) {
    detail::require(widths.size() >= 2, "init_mlp needs input and output widths");
    MLPParams p;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t in = widths[l], out = widths[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        DenseLayer layer{Matrix(out, in), std::vector<double>(out, 0.0)};
        for (double& w : layer.weight.data()) w = dist(rng);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

template <class Net, class F>
    requires std::same_as<std::remove_const_t<Net>, MLPParams>
void for_each_parameter(Net& p, F&& f) {
    for (auto& layer : p.layers) {
        for (auto& w : layer.weight.data()) f(w);
        for (auto& b : layer.bias) f(b);
    }
}

inline std::size_t nonzero_count(const MLPParams& p) {
    std::size_t n = 0;
    for_each_parameter(p, [&](double v) { n += (v != 0.0); });
    return n;
}

// ---------------------------------------------------------------------------
// Probabilistic transformer

/// Landmark features -> optional shared trunk (ReLU output) -> a mixture-weight
/// network with K logits and K heads, each emitting a mean block of length D
/// followed by a row-major D x D covariance factor.
struct PTParams {
    LandmarkSet landmarks;
    std::optional<MLPParams> trunk;
    MLPParams weight_net;
    std::vector<MLPParams> heads;
    std::size_t output_dim = 1;

    [[nodiscard]] std::size_t mixture_count() const { return heads.size(); }
    [[nodiscard]] std::size_t landmark_count() const { return landmarks.indices.size(); }
    [[nodiscard]] std::size_t head_out_dim() const { return output_dim + output_dim * output_dim; }
};

inline void validate(const PTParams& p) {
    const std::size_t K = p.mixture_count();
    detail::require(K >= 1, "probabilistic transformer needs at least one head");
    detail::require(p.output_dim >= 1, "output dimension must be >= 1");
    detail::require(!p.landmarks.indices.empty(), "probabilistic transformer needs landmarks");
    std::size_t feature_dim = p.landmark_count();
    if (p.trunk) {
        validate(*p.trunk);
        detail::require(p.trunk->in_dim() == p.landmark_count(), "trunk input must match the landmark count");
        feature_dim = p.trunk->out_dim();
    }
    validate(p.weight_net);
    detail::require(p.weight_net.in_dim() == feature_dim && p.weight_net.out_dim() == K,
                    "weight network must map features to K logits");
    for (const auto& head : p.heads) {
        validate(head);
        detail::require(head.in_dim() == feature_dim && head.out_dim() == p.head_out_dim(),
                        "every head must map features to D + D^2 outputs");
    }
}

/// Everything pt_forward computed for one point.
struct PTTape {
    std::vector<double> features;
    std::optional<MLPTape> trunk;
    std::vector<double> hidden;  // input to weight_net and heads
    MLPTape weight_net;
    std::vector<double> weights;  // softmax output
    std::vector<MLPTape> heads;
    GaussianMixtureD mixture;
};

inline std::vector<double> softmax(const std::vector<double>& logits) {
    const double top = *std::max_element(logits.begin(), logits.end());
    std::vector<double> w(logits.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) sum += (w[k] = std::exp(logits[k] - top));
    for (double& v : w) v /= sum;
    return w;
}

inline std::vector<double> relu(std::vector<double> v) {
    for (double& x : v) x = std::max(x, 0.0);
    return v;
}

/// Forward pass on a landmark feature vector.
inline PTTape pt_forward_features(const PTParams& p, std::vector<double> features) {
    const std::size_t D = p.output_dim;
    PTTape tape;
    tape.features = std::move(features);
    if (p.trunk) {
        tape.trunk = mlp_forward_tape(*p.trunk, tape.features);
        tape.hidden = relu(tape.trunk->output);
    } else {
        tape.hidden = tape.features;
    }
    tape.weight_net = mlp_forward_tape(p.weight_net, tape.hidden);
    tape.weights = softmax(tape.weight_net.output);
    tape.mixture.components.reserve(p.mixture_count());
    for (std::size_t k = 0; k < p.mixture_count(); ++k) {
        tape.heads.push_back(mlp_forward_tape(p.heads[k], tape.hidden));
        const auto& out = tape.heads.back().output;
        GaussianD g{std::vector<double>(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(D)), Matrix(D, D)};
        if (D == 1) {
            const double s = std::abs(out[1]);
            g.cov(0, 0) = s * s;
        } else {
            for (std::size_t i = 0; i < D; ++i)
                for (std::size_t j = 0; j < D; ++j) {
                    double c = 0.0;
                    for (std::size_t r = 0; r < D; ++r) c += out[D + r * D + i] * out[D + r * D + j];
                    g.cov(i, j) = c;
                }
        }
        tape.mixture.components.push_back({tape.weights[k], std::move(g)});
    }
    return tape;
}

inline PTTape pt_forward_tape(const PTParams& p, const FiniteMetricSpace& space, std::size_t point) {
    return pt_forward_features(p, landmark_features(space, p.landmarks, point));
}

/// T(x): softmax-weighted mixture of the K head Gaussians N(mu_k, S_k^T S_k).
inline GaussianMixtureD pt_forward(const PTParams& p, const FiniteMetricSpace& space, std::size_t point) {
    return pt_forward_tape(p, space, point).mixture;
}

/// Univariate view of a D = 1 transformer output, with std = |s_k|.
inline GaussianMixture1D pt_forward_1d(const PTTape& tape, const PTParams& p) {
    detail::require(p.output_dim == 1, "univariate view requires output dimension 1");
    GaussianMixture1D m;
    for (std::size_t k = 0; k < p.mixture_count(); ++k)
        m.components.push_back({tape.weights[k], {tape.heads[k].output[0], std::abs(tape.heads[k].output[1])}});
    return m;
}

inline GaussianMixture1D pt_forward_1d(const PTParams& p, const FiniteMetricSpace& space, std::size_t point) {
    return pt_forward_1d(pt_forward_tape(p, space, point), p);
}

/// Loss gradient with respect to one transformer output.
///
/// `cov` holds, per component, d loss / d std when D == 1, and
/// d loss / d covariance (row-major D x D) otherwise.
struct MixtureUpstream {
    std::vector<double> weight;
    std::vector<std::vector<double>> mean;
    std::vector<std::vector<double>> cov;

    static MixtureUpstream zeros(std::size_t K, std::size_t D) {
        const std::size_t cov_len = D == 1 ? 1 : D * D;
        return {std::vector<double>(K, 0.0), std::vector<std::vector<double>>(K, std::vector<double>(D, 0.0)),
                std::vector<std::vector<double>>(K, std::vector<double>(cov_len, 0.0))};
    }
};

inline PTParams zeros_like(const PTParams& p) {
    PTParams z;
    z.landmarks = p.landmarks;
    z.output_dim = p.output_dim;
    if (p.trunk) z.trunk = zeros_like(*p.trunk);
    z.weight_net = zeros_like(p.weight_net);
    for (const auto& head : p.heads) z.heads.push_back(zeros_like(head));
    return z;
}

/// Reverse-mode gradient of one forward pass, accumulated into `grad`.
inline void pt_backward(const PTParams& p, const PTTape& tape, const MixtureUpstream& upstream, PTParams& grad) {
    const std::size_t K = p.mixture_count(), D = p.output_dim;
    const std::size_t cov_len = D == 1 ? 1 : D * D;
    detail::require(upstream.weight.size() == K && upstream.mean.size() == K && upstream.cov.size() == K,
                    "pt_backward: upstream has the wrong number of components");
    for (std::size_t k = 0; k < K; ++k)
        detail::require(upstream.mean[k].size() == D && upstream.cov[k].size() == cov_len,
                        "pt_backward: upstream component has the wrong shape");

    std::vector<double> hidden_grad(tape.hidden.size(), 0.0);
    const auto add_into = [](std::vector<double>& acc, const std::vector<double>& v) {
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
    };

    // Softmax: dlogit_k = w_k (g_k - sum_j w_j g_j).
    double mean_g = 0.0;
    for (std::size_t k = 0; k < K; ++k) mean_g += tape.weights[k] * upstream.weight[k];
    std::vector<double> logit_grad(K);
    for (std::size_t k = 0; k < K; ++k) logit_grad[k] = tape.weights[k] * (upstream.weight[k] - mean_g);
    add_into(hidden_grad, mlp_backward(p.weight_net, tape.weight_net, logit_grad, grad.weight_net));

    for (std::size_t k = 0; k < K; ++k) {
        const auto& out = tape.heads[k].output;
        std::vector<double> head_grad(p.head_out_dim(), 0.0);
        for (std::size_t i = 0; i < D; ++i) head_grad[i] = upstream.mean[k][i];
        if (D == 1) {
            const double s = out[1];
            head_grad[1] = s > 0.0 ? upstream.cov[k][0] : (s < 0.0 ? -upstream.cov[k][0] : 0.0);
        } else {
            // cov = S^T S  =>  dL/dS = S (G + G^T).
            for (std::size_t r = 0; r < D; ++r)
                for (std::size_t c = 0; c < D; ++c) {
                    double acc = 0.0;
                    for (std::size_t m = 0; m < D; ++m)
                        acc += out[D + r * D + m] * (upstream.cov[k][m * D + c] + upstream.cov[k][c * D + m]);
                    head_grad[D + r * D + c] = acc;
                }
        }
        add_into(hidden_grad, mlp_backward(p.heads[k], tape.heads[k], std::move(head_grad), grad.heads[k]));
    }

    if (p.trunk) {
        for (std::size_t i = 0; i < hidden_grad.size(); ++i)
            if (!(tape.trunk->output[i] > 0.0)) hidden_grad[i] = 0.0;
        mlp_backward(*p.trunk, *tape.trunk, std::move(hidden_grad), *grad.trunk);
    }
}

template <class Model, class F>
    requires std::same_as<std::remove_const_t<Model>, PTParams>
void for_each_parameter(Model& p, F&& f) {
    if (p.trunk) for_each_parameter(*p.trunk, f);
    for_each_parameter(p.weight_net, f);
    for (auto& head : p.heads) for_each_parameter(head, f);
}

/// Number of non-zero weight and bias entries across all sub-networks.
inline std::size_t param_count(const PTParams& p) {
    std::size_t n = p.trunk ? nonzero_count(*p.trunk) : 0;
    n += nonzero_count(p.weight_net);
    for (const auto& head : p.heads) n += nonzero_count(head);
    return n;
}

/// Widest layer output across all sub-networks.
inline std::size_t network_width(const PTParams& p) {
    std::size_t w = 0;
    const auto scan = [&](const MLPParams& m) {
        for (const auto& layer : m.layers) w = std::max(w, layer.out_dim());
    };
    if (p.trunk) scan(*p.trunk);
    scan(p.weight_net);
    for (const auto& head : p.heads) scan(head);
    return w;
}

/// Affine layers on the longest input-to-output path.
inline std::size_t network_depth(const PTParams& p) {
    std::size_t tail = p.weight_net.depth();
    for (const auto& head : p.heads) tail = std::max(tail, head.depth());
    return (p.trunk ? p.trunk->depth() : 0) + tail;
}

inline std::size_t effective_dimension(const PTParams& p) {
    return p.mixture_count() * p.head_out_dim();
}

/// Layer widths for a freshly initialized transformer.
struct PTArchitecture {
    std::vector<std::size_t> trunk_widths;  // hidden widths; empty means no trunk
    std::vector<std::size_t> head_hidden;   // hidden widths inside each head and the weight network
    std::size_t mixture_count = 5;
    std::size_t output_dim = 1;
};

inline PTParams init_pt(const PTArchitecture& arch, LandmarkSet landmarks, std::uint64_t seed) {
    detail::require(arch.mixture_count >= 1, "mixture count must be >= 1");
    detail::require(arch.output_dim >= 1, "output dimension must be >= 1");
    std::mt19937_64 rng(seed);
    PTParams p;
    p.output_dim = arch.output_dim;
    p.landmarks = std::move(landmarks);
    std::size_t feature_dim = p.landmark_count();
    if (!arch.trunk_widths.empty()) {
        std::vector<std::size_t> widths{feature_dim};
        widths.insert(widths.end(), arch.trunk_widths.begin(), arch.trunk_widths.end());
        p.trunk = init_mlp(widths, rng);
        feature_dim = arch.trunk_widths.back();
    }
    const auto head_widths = [&](std::size_t out) {
        std::vector<std::size_t> widths{feature_dim};
        widths.insert(widths.end(), arch.head_hidden.begin(), arch.head_hidden.end());
        widths.push_back(out);
        return widths;
    };
    p.weight_net = init_mlp(head_widths(arch.mixture_count), rng);
    for (std::size_t k = 0; k < arch.mixture_count; ++k) p.heads.push_back(init_mlp(head_widths(p.head_out_dim()), rng));
    return p;
}

// ---------------------------------------------------------------------------
// Complexity reporting

struct NamedValue {
    std::string name;
    double value = 0.0;
};

struct ComplexityReport {
    std::size_t par = 0;
    std::size_t width = 0;
    std::size_t depth = 0;
    std::size_t effdim = 0;
    std::vector<NamedValue> theorem_bounds;
    std::string note;
};

struct SpaceStats {
    std::size_t n = 2;
    double aspect = 1.0;
    double diameter = 1.0;
};

/// Optional inputs; a bound is reported only when everything it needs is present.
struct ComplexityExtras {
    std::optional<double> capacity;
    std::optional<double> spectral_radius;
    std::optional<double> manifold_dim;
    std::optional<double> alpha;
    std::optional<double> distortion;
};

/// Dimensional constant of the memorization bound, natural logarithms.
inline double dimensional_constant(std::size_t n) {
    const double nn = static_cast<double>(n);
    return (2.0 * std::log(5.0 * std::sqrt(2.0 * std::numbers::pi)) + 1.5 * std::log(nn) - 0.5 * std::log(nn + 1.0)) /
           (2.0 * std::log(2.0));
}

/// Network size of `p` together with the theoretical effective-dimension,
/// depth and width bounds evaluated for the given space. Unspecified
/// absolute constants are set to 1.
inline ComplexityReport complexity_report(const PTParams& p, const SpaceStats& stats, const ComplexityExtras& extras = {}) {
    detail::require(stats.n >= 2, "complexity_report needs n >= 2");
    ComplexityReport r;
    r.par = param_count(p);
    r.width = network_width(p);
    r.depth = network_depth(p);
    r.effdim = effective_dimension(p);
    r.note = "bounds marked [C=1] hold up to an unspecified absolute constant, set to 1 here";

    const double n = static_cast<double>(stats.n);
    auto& b = r.theorem_bounds;
    b.push_back({"dimensional_constant_C_n", dimensional_constant(stats.n)});
    b.push_back({"depth_general", n * (1.0 + std::log(std::pow(n, 2.5) * stats.aspect))});
    b.push_back({"depth_graph", n * (1.0 + std::log(std::pow(n, 2.5) * stats.diameter))});
    b.push_back({"width_min", std::max(static_cast<double>(r.effdim), n * n)});

    if (extras.capacity && extras.alpha) {
        const double a = *extras.alpha, log_cap = std::log(*extras.capacity);
        b.push_back({"general_effdim [C=1]", 2.0 * std::ceil(12.0 * log_cap / a)});
        if (a < 1.0) b.push_back({"general_distortion [C=1]", std::ceil(std::pow(12.0 * log_cap / (1.0 - a), 1.0 + a))});
    }
    if (p.mixture_count() >= 2)
        b.push_back({"tree_distortion [C=1]", std::pow(n, 1.0 / (static_cast<double>(p.mixture_count()) - 1.0))});
    if (extras.spectral_radius && extras.alpha) {
        const double a = *extras.alpha, log_rho = std::log(1.0 + *extras.spectral_radius);
        b.push_back({"two_hop_effdim [C=1]", std::ceil(12.0 * log_rho / a)});
        if (a < 1.0) b.push_back({"two_hop_distortion [C=1]", std::ceil(std::pow(12.0 * log_rho / (1.0 - a), 1.0 + a))});
    }
    if (extras.manifold_dim && extras.alpha && *extras.alpha < 1.0) {
        const double m = *extras.manifold_dim, a = *extras.alpha;
        b.push_back({"manifold_effdim [C=1]", std::pow(m, 1.0 + a) / (a * std::pow(1.0 - a, 1.0 + a))});
        b.push_back({"manifold_distortion [C=1]", std::ceil(std::pow(m / (1.0 - a), 1.0 + a))});
    }
    if (extras.distortion && *extras.distortion > 1.0) {
        const double k = std::ceil(5.0 * std::pow(n, 4) * stats.aspect * stats.aspect / (2.0 * (*extras.distortion - 1.0)));
        b.push_back({"multivariate_mixtures_K", k});
        b.push_back({"multivariate_depth_N", n * (n - 1.0) / 2.0 * (5.0 * k + 2.0)});
    }
    return r;
}

}  // namespace mixembed
