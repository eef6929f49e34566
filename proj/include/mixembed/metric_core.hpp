#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"

namespace mixembed {

/// Absolute slack allowed in triangle-inequality checks.
inline constexpr double kTriangleTolerance = 1e-9;

/// Above this size the triangle inequality is checked on a seeded sample of triples.
inline constexpr std::size_t kExhaustiveTriangleLimit = 200;

/// A finite metric space stored as a dense distance matrix.
///
/// Instances are only obtainable through validating factories, so every
/// FiniteMetricSpace satisfies the metric axioms.
class FiniteMetricSpace {
public:
    [[nodiscard]] std::size_t size() const { return dist_.rows(); }
    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const { return dist_(i, j); }
    [[nodiscard]] const Matrix& matrix() const { return dist_; }
    [[nodiscard]] const std::vector<std::string>& labels() const { return labels_; }

    friend FiniteMetricSpace build_metric_space(Matrix dist, std::vector<std::string> labels);

private:
    FiniteMetricSpace() = default;
    Matrix dist_;
    std::vector<std::string> labels_;
};

namespace detail {


inline void check_triangle(const Matrix& d, std::size_t i, std::size_t j, std::size_t k) {
    if (d(i, k) > d(i, j) + d(j, k) + kTriangleTolerance) {
        throw ValidationError("triangle inequality violated for pair " + pair_name(i, k) +
                              " via " + std::to_string(j));
    }
}

}  // namespace detail

/// Validates a distance matrix and wraps it as a metric space.
///
/// Rejects non-square input, negative or non-finite entries, asymmetry,
/// zero off-diagonal distances, nonzero diagonal, and triangle violations
/// beyond kTriangleTolerance. For n > kExhaustiveTriangleLimit the triangle
/// check runs on a fixed pseudo-random sample of 200000 triples.
inline FiniteMetricSpace build_metric_space(Matrix dist, std::vector<std::string> labels = {}) {
    detail::require(dist.square(), "distance matrix must be square");
    const std::size_t n = dist.rows();
    detail::require(n >= 1, "distance matrix must be nonempty");
    detail::require(labels.empty() || labels.size() == n, "label count must match point count");
    for (std::size_t i = 0; i < n; ++i) {
        if (dist(i, i) != 0.0)
            throw ValidationError("nonzero diagonal entry at " + detail::pair_name(i, i));
        for (std::size_t j = 0; j < n; ++j) {
            const double v = dist(i, j);
            if (!std::isfinite(v)) throw ValidationError("non-finite distance at " + detail::pair_name(i, j));
            if (v < 0.0) throw ValidationError("negative distance at " + detail::pair_name(i, j));
            if (v != dist(j, i)) throw ValidationError("asymmetric distance at " + detail::pair_name(i, j));
            if (i != j && v == 0.0)
                throw ValidationError("zero distance between distinct points " + detail::pair_name(i, j));
        }
    }
    if (n <= kExhaustiveTriangleLimit) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t k = i + 1; k < n; ++k) detail::check_triangle(dist, i, j, k);
    } else {
        std::mt19937_64 rng(0x5eedULL);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        for (int t = 0; t < 200000; ++t) detail::check_triangle(dist, pick(rng), pick(rng), pick(rng));
    }
    FiniteMetricSpace space;
    space.dist_ = std::move(dist);
    space.labels_ = std::move(labels);
    return space;
}

/// Simple undirected graph on vertices 0..n_vertices-1.
struct GraphSpec {
    std::size_t n_vertices = 0;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
};

/// Builds a GraphSpec, rejecting self-loops, duplicate edges and out-of-range endpoints.
inline GraphSpec make_graph(std::size_t n_vertices, std::vector<std::pair<std::size_t, std::size_t>> edges) {
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (auto& [u, v] : edges) {
        detail::require(u < n_vertices && v < n_vertices,
                        "edge " + detail::pair_name(u, v) + " references a missing vertex");
        detail::require(u != v, "self-loop at vertex " + std::to_string(u));
        if (!seen.insert(std::minmax(u, v)).second)
            throw ValidationError("duplicate edge " + detail::pair_name(u, v));
    }
    return GraphSpec{n_vertices, std::move(edges)};
}

inline std::vector<std::vector<std::size_t>> adjacency_lists(const GraphSpec& g) {
    std::vector<std::vector<std::size_t>> adj(g.n_vertices);
    for (const auto& [u, v] : g.edges) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    return adj;
}

/// All-pairs hop distances by breadth-first search from every vertex.
inline FiniteMetricSpace graph_geodesics(const GraphSpec& g) {
    const std::size_t n = g.n_vertices;
    detail::require(n >= 1, "graph has no vertices");
    const auto adj = adjacency_lists(g);
    constexpr std::size_t kUnseen = std::numeric_limits<std::size_t>::max();
    Matrix dist(n, n);
    std::vector<std::size_t> hops(n);
    std::queue<std::size_t> frontier;
    for (std::size_t s = 0; s < n; ++s) {
        std::fill(hops.begin(), hops.end(), kUnseen);
        hops[s] = 0;
        frontier.push(s);
        while (!frontier.empty()) {
            const std::size_t u = frontier.front();
            frontier.pop();
            for (std::size_t v : adj[u]) {
                if (hops[v] == kUnseen) {
                    hops[v] = hops[u] + 1;
                    frontier.push(v);
                }
            }
        }
        for (std::size_t t = 0; t < n; ++t) {
            if (hops[t] == kUnseen)
                throw ValidationError("graph is disconnected: no path for pair " + detail::pair_name(s, t));
            dist(s, t) = static_cast<double>(hops[t]);
        }
    }
    return build_metric_space(std::move(dist));
}

/// Full binary tree in heap order: children of v are 2v+1 and 2v+2.
inline GraphSpec gen_binary_tree(int depth) {
    detail::require(depth >= 0 && depth < 30, "tree depth must be in [0, 30)");
    const std::size_t n = (std::size_t{1} << (depth + 1)) - 1;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    edges.reserve(n - 1);
    for (std::size_t v = 1; v < n; ++v) edges.emplace_back((v - 1) / 2, v);
    return GraphSpec{n, std::move(edges)};
}

enum class TwoHopKind { star, wheel, complete_bipartite, friendship };

/// Size parameters of a 2-hop family member.
///
/// star: `a` leaves. wheel: hub plus a rim cycle of `a` vertices (a >= 3).
/// complete_bipartite: K_{a,b}. friendship: `a` triangles sharing vertex 0.
struct TwoHopParams {
    std::size_t a = 1;
    std::size_t b = 1;
};

inline double graph_diameter(const GraphSpec& g);

inline GraphSpec gen_two_hop(TwoHopKind kind, TwoHopParams params) {
    detail::require(params.a >= 1 && params.b >= 1, "2-hop graph sizes must be >= 1");
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::size_t n = 0;
    switch (kind) {
        case TwoHopKind::star:
            n = params.a + 1;
            for (std::size_t v = 1; v < n; ++v) edges.emplace_back(0, v);
            break;
        case TwoHopKind::wheel:
            detail::require(params.a >= 3, "wheel rim needs at least 3 vertices");
            n = params.a + 1;
            for (std::size_t v = 1; v < n; ++v) {
                edges.emplace_back(0, v);
                edges.emplace_back(v, v % params.a + 1);
            }
            break;
        case TwoHopKind::complete_bipartite:
            n = params.a + params.b;
            for (std::size_t u = 0; u < params.a; ++u)
                for (std::size_t v = 0; v < params.b; ++v) edges.emplace_back(u, params.a + v);
            break;
        case TwoHopKind::friendship:
            n = 2 * params.a + 1;
            for (std::size_t t = 0; t < params.a; ++t) {
                edges.emplace_back(0, 2 * t + 1);
                edges.emplace_back(0, 2 * t + 2);
                edges.emplace_back(2 * t + 1, 2 * t + 2);
            }
            break;
    }
    GraphSpec g = make_graph(n, std::move(edges));
    if (g.n_vertices > 1 && graph_diameter(g) > 2.0)
        throw ValidationError("parameters produce a graph of diameter > 2");
    return g;
}

/// Spectral radius of the adjacency matrix.
///
/// Power iteration on A + I, whose dominant eigenvalue is rho(A) + 1 for a
/// nonnegative symmetric A; the shift removes the +-rho oscillation of
/// bipartite graphs.
inline double spectral_radius(const GraphSpec& g) {
    const std::size_t n = g.n_vertices;
    detail::require(n >= 1, "graph has no vertices");
    if (g.edges.empty()) return 0.0;
    const auto adj = adjacency_lists(g);
    std::vector<double> x(n, 1.0 / std::sqrt(static_cast<double>(n))), y(n);
    double lambda = 0.0;
    for (int iter = 0; iter < 1'000'000; ++iter) {
        for (std::size_t u = 0; u < n; ++u) {
            double s = x[u];
            for (std::size_t v : adj[u]) s += x[v];
            y[u] = s;
        }
        double rayleigh = 0.0, norm2 = 0.0;
        for (std::size_t u = 0; u < n; ++u) {
            rayleigh += x[u] * y[u];
            norm2 += y[u] * y[u];
        }
        const double norm = std::sqrt(norm2);
        for (std::size_t u = 0; u < n; ++u) y[u] /= norm;
        double change = 0.0;
        for (std::size_t u = 0; u < n; ++u) change = std::max(change, std::abs(y[u] - x[u]));
        x.swap(y);
        const bool settled = iter > 0 && std::abs(rayleigh - lambda) <= 1e-13 * rayleigh;
        lambda = rayleigh;
        if (settled && change < 1e-9) break;
    }
    return lambda - 1.0;
}

/// Points on the unit sphere S^N, stored in R^{N+1}.
struct SpherePointSet {
    std::size_t ambient_dim = 0;
    std::vector<std::vector<double>> points;
};

inline double euclidean_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

/// Draws i.i.d. uniform points on S^N by normalizing standard Gaussian vectors.
inline SpherePointSet sphere_sample(std::size_t sphere_dim, std::size_t count, std::uint64_t seed) {
    detail::require(sphere_dim >= 1, "sphere dimension must be >= 1");
    detail::require(count >= 1, "sample count must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    SpherePointSet out{sphere_dim + 1, {}};
    out.points.reserve(count);
    while (out.points.size() < count) {
        std::vector<double> v(sphere_dim + 1);
        for (double& x : v) x = gauss(rng);
        const double norm = euclidean_norm(v);
        if (norm < 1e-12) continue;
        for (double& x : v) x /= norm;
        out.points.push_back(std::move(v));
    }
    return out;
}

/// Great-circle distance arccos(<x, y>) with the inner product clamped to [-1, 1].
inline double sphere_distance(const std::vector<double>& x, const std::vector<double>& y) {
    detail::require(x.size() == y.size(), "sphere points have different dimensions");
    detail::require(std::abs(euclidean_norm(x) - 1.0) <= 1e-9 && std::abs(euclidean_norm(y) - 1.0) <= 1e-9,
                    "sphere_distance requires unit vectors");
    double dot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
    return std::acos(std::clamp(dot, -1.0, 1.0));
}

/// Greedy farthest-point selection of L landmarks from a pool of 100*L uniform samples.
inline SpherePointSet quasi_uniform_landmarks(std::size_t sphere_dim, std::size_t count, std::uint64_t seed) {
    detail::require(count >= 1, "landmark count must be >= 1");
    const SpherePointSet pool = sphere_sample(sphere_dim, 100 * count, seed);
    const std::size_t m = pool.points.size();
    std::vector<double> nearest(m, std::numeric_limits<double>::infinity());
    SpherePointSet out{pool.ambient_dim, {}};
    std::size_t next = 0;
    for (std::size_t chosen = 0; chosen < count; ++chosen) {
        out.points.push_back(pool.points[next]);
        double best = -1.0;
        std::size_t best_idx = 0;
        for (std::size_t i = 0; i < m; ++i) {
            nearest[i] = std::min(nearest[i], sphere_distance(pool.points[i], pool.points[next]));
            if (nearest[i] > best) {
                best = nearest[i];
                best_idx = i;
            }
        }
        next = best_idx;
    }
    return out;
}

/// Geodesic metric space on a set of sphere points.
inline FiniteMetricSpace sphere_metric_space(const SpherePointSet& pts) {
    const std::size_t n = pts.points.size();
    Matrix d(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) d(i, j) = d(j, i) = sphere_distance(pts.points[i], pts.points[j]);
    return build_metric_space(std::move(d));
}

/// Ordered landmark indices into a FiniteMetricSpace.
struct LandmarkSet {
    std::vector<std::size_t> indices;
};

inline LandmarkSet make_landmarks(std::vector<std::size_t> indices, std::size_t space_size) {
    detail::require(!indices.empty(), "landmark set must be nonempty");
    std::set<std::size_t> seen;
    for (std::size_t i : indices) {
        detail::require(i < space_size, "landmark index " + std::to_string(i) + " out of range");
        detail::require(seen.insert(i).second, "duplicate landmark index " + std::to_string(i));
    }
    return LandmarkSet{std::move(indices)};
}

inline LandmarkSet all_points_as_landmarks(std::size_t n) {
    LandmarkSet l;
    l.indices.resize(n);
    for (std::size_t i = 0; i < n; ++i) l.indices[i] = i;
    return l;
}

/// Distances from a point to every landmark, in landmark order.
inline std::vector<double> landmark_features(const FiniteMetricSpace& space, const LandmarkSet& landmarks,
                                             std::size_t point) {
    detail::require(point < space.size(), "point index out of range");
    std::vector<double> u;
    u.reserve(landmarks.indices.size());
    for (std::size_t l : landmarks.indices) {
        detail::require(l < space.size(), "landmark index out of range");
        u.push_back(space(point, l));
    }
    return u;
}

struct AspectDiameter {
    double aspect = 0.0;
    double diameter = 0.0;
};

inline AspectDiameter aspect_ratio_and_diameter(const FiniteMetricSpace& space) {
    const std::size_t n = space.size();
    detail::require(n >= 2, "aspect ratio needs at least two points");
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            lo = std::min(lo, space(i, j));
            hi = std::max(hi, space(i, j));
        }
    return {hi / lo, hi};
}

inline double graph_diameter(const GraphSpec& g) {
    if (g.n_vertices < 2) return 0.0;
    return aspect_ratio_and_diameter(graph_geodesics(g)).diameter;
}

/// The snowflake metric d^alpha, 0 < alpha <= 1.
inline FiniteMetricSpace snowflake(const FiniteMetricSpace& space, double alpha) {
    detail::require(alpha > 0.0 && alpha <= 1.0, "snowflake exponent must lie in (0, 1]");
    Matrix d = space.matrix();
    if (alpha != 1.0)
        for (double& v : d.data()) v = std::pow(v, alpha);
    return build_metric_space(std::move(d), space.labels());
}

inline constexpr std::size_t kCapacityBruteForceLimit = 14;

namespace detail {

// Largest subset of `candidates` whose members are pairwise compatible.
inline int max_compatible_subset(const std::vector<std::uint32_t>& compatible, std::uint32_t candidates) {
    if (candidates == 0) return 0;
    const int v = std::countr_zero(candidates);
    const std::uint32_t rest = candidates & ~(std::uint32_t{1} << v);
    const int with_v = 1 + max_compatible_subset(compatible, rest & compatible[v]);
    if (with_v > std::popcount(rest)) return with_v;
    return std::max(with_v, max_compatible_subset(compatible, rest));
}

}  // namespace detail

/// Metric capacity by exhaustive search over centers, radii and packings.
///
/// Balls are open. Radii are swept over a finite candidate set on which
/// ball membership already takes every value it can take.
inline int metric_capacity_bruteforce(const FiniteMetricSpace& space) {
    const std::size_t n = space.size();
    if (n > kCapacityBruteForceLimit)
        throw ValidationError("metric_capacity_bruteforce supports at most " +
                              std::to_string(kCapacityBruteForceLimit) + " points (got " + std::to_string(n) + ")");
    if (n == 1) return 1;

    std::vector<double> thresholds;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            thresholds.push_back(space(i, j));
            thresholds.push_back(5.0 * space(i, j));
        }
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    std::vector<double> radii{thresholds.front() / 2.0, thresholds.back() * 2.0};
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
        radii.push_back(thresholds[t] * (1.0 + 1e-9));
        if (t + 1 < thresholds.size()) radii.push_back(0.5 * (thresholds[t] + thresholds[t + 1]));
    }

    int best = 1;
    std::vector<std::uint32_t> compatible(n);
    for (double r : radii) {
        const double small = r / 5.0;
        // Balls B(x_i, r/5) and B(x_j, r/5) are disjoint iff no point lies in both.
        for (std::size_t i = 0; i < n; ++i) {
            compatible[i] = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                bool disjoint = true;
                for (std::size_t y = 0; y < n && disjoint; ++y)
                    if (space(i, y) < small && space(j, y) < small) disjoint = false;
                if (disjoint) compatible[i] |= std::uint32_t{1} << j;
            }
        }
        for (std::size_t center = 0; center < n; ++center) {
            std::uint32_t eligible = 0;
            for (std::size_t i = 0; i < n; ++i) {
                bool contained = true;
                for (std::size_t y = 0; y < n && contained; ++y)
                    if (space(i, y) < small && !(space(center, y) < r)) contained = false;
                if (contained) eligible |= std::uint32_t{1} << i;
            }
            if (std::popcount(eligible) <= best) continue;
            best = std::max(best, detail::max_compatible_subset(compatible, eligible));
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Text formats: edge lists ("u v" per line, 0-based) and CSV distance matrices.

inline GraphSpec read_edge_list(std::istream& in) {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::size_t max_vertex = 0;
    bool any = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        long long u = -1, v = -1;
        if (!(ls >> u >> v) || u < 0 || v < 0)
            throw ValidationError("edge list line " + std::to_string(line_no) + ": expected 'u v'");
        edges.emplace_back(static_cast<std::size_t>(u), static_cast<std::size_t>(v));
        max_vertex = std::max({max_vertex, static_cast<std::size_t>(u), static_cast<std::size_t>(v)});
        any = true;
    }
    return make_graph(any ? max_vertex + 1 : 0, std::move(edges));
}

inline void write_edge_list(std::ostream& out, const GraphSpec& g) {
    for (const auto& [u, v] : g.edges) out << u << ' ' << v << '\n';
}

inline Matrix read_csv_matrix(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
            } catch (const std::exception&) {
                throw ValidationError("CSV: cannot parse '" + cell + "' as a number");
            }
        }
        rows.push_back(std::move(row));
    }
    Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        detail::require(rows[i].size() == m.cols(), "CSV: ragged rows");
        for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
    }
    return m;
}

inline void write_csv_matrix(std::ostream& out, const Matrix& m) {
    const auto old_precision = out.precision(17);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << m(i, j);
        }
        out << '\n';
    }
    out.precision(old_precision);
}

}  // namespace mixembed
