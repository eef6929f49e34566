#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "error.hpp"
#include "metric_core.hpp"

namespace mixembed {

/// Embedded distance of one unordered pair of points.
struct PairDistance {
    std::size_t i = 0;
    std::size_t j = 0;
    double embedded = 0.0;
};

struct PairRatio {
    std::size_t i = 0;
    std::size_t j = 0;
    double original = 0.0;  // d(i, j)^alpha
    double embedded = 0.0;
    double ratio = 0.0;      // embedded / original
    double rel_error = 0.0;  // |original - embedded| / original
};

/// Per-pair ratios rho = D_emb / d^alpha with summary statistics.
/// scale_s = min rho and distortion_D = max rho / min rho (infinite if some rho is 0).
struct DistortionReport {
    std::vector<PairRatio> pairs;
    double mean_rel_error = 0.0;
    double max_rel_error = 0.0;
    double scale_s = 0.0;
    double distortion_D = 1.0;
};

inline DistortionReport distortion_report(const FiniteMetricSpace& space, const std::vector<PairDistance>& embedded,
                                          double alpha) {
    detail::require(alpha > 0.0 && alpha <= 1.0, "distortion_report: alpha must lie in (0, 1]");
    detail::require(!embedded.empty(), "distortion_report: no pairs given");
    DistortionReport r;
    r.pairs.reserve(embedded.size());
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0, sum = 0.0;
    for (const auto& e : embedded) {
        detail::require(e.i < space.size() && e.j < space.size() && e.i != e.j,
                        "distortion_report: pair indices must be distinct points of the space");
        detail::require(std::isfinite(e.embedded) && e.embedded >= 0.0,
                        "distortion_report: embedded distances must be finite and nonnegative");
        const double original = std::pow(space(e.i, e.j), alpha);
        detail::require(original > 0.0, "distortion_report: zero original distance");
        PairRatio p{e.i, e.j, original, e.embedded, e.embedded / original,
                    std::abs(original - e.embedded) / original};
        lo = std::min(lo, p.ratio);
        hi = std::max(hi, p.ratio);
        sum += p.rel_error;
        r.max_rel_error = std::max(r.max_rel_error, p.rel_error);
        r.pairs.push_back(p);
    }
    r.mean_rel_error = sum / static_cast<double>(r.pairs.size());
    r.scale_s = lo;
    r.distortion_D = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    return r;
}

/// Best fraction of pairs whose ratios fit a common window [s, s*D], per grid value D.
struct PacCurve {
    std::vector<double> distortion;
    std::vector<double> fraction;
};

inline PacCurve pac_fraction_curve(const DistortionReport& report, const std::vector<double>& grid) {
    detail::require(!report.pairs.empty(), "pac_fraction_curve: empty report");
    std::vector<double> rho;
    rho.reserve(report.pairs.size());
    for (const auto& p : report.pairs) rho.push_back(p.ratio);
    std::sort(rho.begin(), rho.end());
    const double total = static_cast<double>(rho.size());
    PacCurve curve;
    for (double D : grid) {
        detail::require(D >= 1.0, "pac_fraction_curve: distortion values must be >= 1");
        std::size_t best = 0;
        if (std::isinf(D)) {
            best = rho.size();
        } else {
            // An optimal window can always be slid left until it starts at a data point.
            std::size_t end = 0;
            for (std::size_t start = 0; start < rho.size(); ++start) {
                const double limit = rho[start] * D * (1.0 + 1e-12);
                end = std::max(end, start);
                while (end < rho.size() && rho[end] <= limit) ++end;
                best = std::max(best, end - start);
            }
        }
        curve.distortion.push_back(D);
        curve.fraction.push_back(static_cast<double>(best) / total);
    }
    return curve;
}

/// Smallest probability for which the PAC distortion formula is defined.
///
/// The formula needs lambda = log_n(sqrt(delta)) in (-1, 0), i.e. delta > 1/n^2,
/// and the guarantee is stated for delta > e^-2.
inline double pac_min_delta(std::size_t n) {
    const double nn = static_cast<double>(n);
    return std::max(std::exp(-2.0), 1.0 / (nn * nn));
}

/// D = -2 (1 + lambda)^((1 + lambda) / lambda) / lambda with lambda = log_n(sqrt(delta)).
inline double pac_distortion_from_delta(std::size_t n, double delta) {
    detail::require(n >= 2, "pac_distortion_from_delta: n must be >= 2");
    const double lower = pac_min_delta(n);
    if (!(delta > lower && delta < 1.0))
        throw ValidationError("pac_distortion_from_delta: delta must lie in (delta_n, 1) with delta_n = " +
                              std::to_string(lower));
    const double lambda = 0.5 * std::log(delta) / std::log(static_cast<double>(n));
    return -2.0 * std::pow(1.0 + lambda, (1.0 + lambda) / lambda) / lambda;
}

/// (1 - theta) theta^(theta / (1 - theta)), decreasing from 1 at theta = 0 to 0 at theta = 1.
inline double pac_theta_profile(double theta) {
    if (theta <= 0.0) return 1.0;
    return (1.0 - theta) * std::pow(theta, theta / (1.0 - theta));
}

/// The theta in [max(0, 1 - 2e/D), 1) solving 2/D = (1 - theta) theta^(theta / (1 - theta)).
inline double pac_theta_from_distortion(double D) {
    detail::require(D > 2.0 && std::isfinite(D), "pac_theta_from_distortion: D must be a finite value > 2");
    const double target = 2.0 / D;
    double lo = std::max(0.0, 1.0 - 2.0 * std::numbers::e / D);
    double hi = 1.0;
    for (int it = 0; it < 400 && hi - lo > 1e-16; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (pac_theta_profile(mid) > target) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// Reference success probabilities for a distortion D > 2 at sample size n.
struct PacBounds {
    double theta = 0.0;
    double theorem = 0.0;        // n^(-2 + 2 theta_D)
    double proof_rate = 0.0;     // n^(-4e / D), D = 2 + epsilon
    double headline_rate = 0.0;  // n^(-4e / (1 + D))
};

inline PacBounds pac_bounds(std::size_t n, double D) {
    detail::require(n >= 2, "pac_bounds: n must be >= 2");
    const double nn = static_cast<double>(n);
    PacBounds b;
    b.theta = pac_theta_from_distortion(D);
    b.theorem = std::pow(nn, -2.0 + 2.0 * b.theta);
    b.proof_rate = std::pow(nn, -4.0 * std::numbers::e / D);
    b.headline_rate = std::pow(nn, -4.0 * std::numbers::e / (1.0 + D));
    return b;
}

}  // namespace mixembed
