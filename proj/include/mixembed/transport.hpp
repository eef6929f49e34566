#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"

namespace mixembed {

// ---------------------------------------------------------------------------
// Gaussian and Gaussian-mixture values

/// Univariate Gaussian parameterized by its standard deviation; std == 0 is a point mass.
struct Gaussian1D {
    double mean = 0.0;
    double std = 0.0;
    bool operator==(const Gaussian1D&) const = default;
};

struct Component1D {
    double weight = 1.0;
    Gaussian1D gaussian;
    bool operator==(const Component1D&) const = default;
};

struct GaussianMixture1D {
    std::vector<Component1D> components;
    [[nodiscard]] std::size_t size() const { return components.size(); }
    bool operator==(const GaussianMixture1D&) const = default;
};

struct GaussianD {
    std::vector<double> mean;
    Matrix cov;
    [[nodiscard]] std::size_t dim() const { return mean.size(); }
};

struct ComponentD {
    double weight = 1.0;
    GaussianD gaussian;
};

struct GaussianMixtureD {
    std::vector<ComponentD> components;
    [[nodiscard]] std::size_t size() const { return components.size(); }
    [[nodiscard]] std::size_t dim() const { return components.empty() ? 0 : components.front().gaussian.dim(); }
};

inline constexpr double kWeightSumTolerance = 1e-10;

namespace detail {

inline void check_simplex(const std::vector<double>& w, const char* what) {
    require(!w.empty(), std::string(what) + ": weight vector is empty");
    double sum = 0.0;
    for (double v : w) {
        require(std::isfinite(v) && v >= 0.0, std::string(what) + ": weights must be finite and nonnegative");
        sum += v;
    }
    require(std::abs(sum - 1.0) <= kWeightSumTolerance,
            std::string(what) + ": weights must sum to 1 (got " + std::to_string(sum) + ")");
}

}  // namespace detail

inline std::vector<double> weights_of(const GaussianMixture1D& m) {
    std::vector<double> w;
    w.reserve(m.size());
    for (const auto& c : m.components) w.push_back(c.weight);
    return w;
}

inline std::vector<double> weights_of(const GaussianMixtureD& m) {
    std::vector<double> w;
    w.reserve(m.size());
    for (const auto& c : m.components) w.push_back(c.weight);
    return w;
}

/// Throws ValidationError unless `m` is a proper univariate mixture.
inline void validate(const GaussianMixture1D& m) {
    detail::require(m.size() >= 1, "mixture needs at least one component");
    for (const auto& c : m.components)
        detail::require(std::isfinite(c.gaussian.mean) && std::isfinite(c.gaussian.std) && c.gaussian.std >= 0.0,
                        "mixture component must have finite mean and std >= 0");
    detail::check_simplex(weights_of(m), "mixture");
}

inline void validate(const GaussianD& g) {
    const std::size_t d = g.dim();
    detail::require(d >= 1, "Gaussian needs dimension >= 1");
    detail::require(g.cov.rows() == d && g.cov.cols() == d, "covariance shape does not match mean");
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            detail::require(std::abs(g.cov(i, j) - g.cov(j, i)) <= 1e-12, "covariance must be symmetric");
}

inline void validate(const GaussianMixtureD& m) {
    detail::require(m.size() >= 1, "mixture needs at least one component");
    const std::size_t d = m.dim();
    for (const auto& c : m.components) {
        detail::require(c.gaussian.dim() == d, "mixture components must share a dimension");
        validate(c.gaussian);
    }
    detail::check_simplex(weights_of(m), "mixture");
}

// ---------------------------------------------------------------------------
// Closed-form Gaussian W2

inline double w2_gaussian_1d_squared(const Gaussian1D& a, const Gaussian1D& b) {
    const double dm = a.mean - b.mean;
    const double ds = a.std - b.std;
    return dm * dm + ds * ds;
}

inline double w2_gaussian_1d(const Gaussian1D& a, const Gaussian1D& b) {
    return std::sqrt(w2_gaussian_1d_squared(a, b));
}

struct SymmetricEigen {
    std::vector<double> values;
    Matrix vectors;  // columns are eigenvectors
};

/// Cyclic Jacobi eigendecomposition of a small symmetric matrix.
inline SymmetricEigen jacobi_eigen(Matrix a) {
    detail::require(a.square(), "jacobi_eigen: matrix must be square");
    const std::size_t n = a.rows();
    Matrix v = Matrix::identity(n);
    const double scale = std::max(a.frobenius_norm(), std::numeric_limits<double>::min());
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (std::sqrt(off) <= 1e-17 * scale) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    SymmetricEigen out{std::vector<double>(n), std::move(v)};
    for (std::size_t i = 0; i < n; ++i) out.values[i] = a(i, i);
    return out;
}

inline constexpr std::size_t kMaxJacobiDim = 16;

/// Principal square root of a symmetric positive-semidefinite matrix.
///
/// Eigenvalues in [-1e-8, 0) are treated as zero; anything more negative is rejected.
inline Matrix psd_sqrt(const Matrix& m) {
    detail::require(m.square(), "psd_sqrt: matrix must be square");
    const std::size_t n = m.rows();
    detail::require(n >= 1 && n <= kMaxJacobiDim, "psd_sqrt supports dimensions 1..16");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            detail::require(std::abs(m(i, j) - m(j, i)) <= 1e-12 * std::max(1.0, std::abs(m(i, j))),
                            "psd_sqrt: matrix must be symmetric");
    const SymmetricEigen eig = jacobi_eigen(m);
    Matrix r(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const double lambda = eig.values[k];
        if (lambda < -1e-8)
            throw ValidationError("psd_sqrt: matrix has negative eigenvalue " + std::to_string(lambda));
        const double root = std::sqrt(std::max(lambda, 0.0));
        if (root == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) r(i, j) += root * eig.vectors(i, k) * eig.vectors(j, k);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) r(i, j) = r(j, i) = 0.5 * (r(i, j) + r(j, i));
    return r;
}

/// Squared Bures-Wasserstein distance between two Gaussians.
inline double w2_gaussian_d_squared(const GaussianD& a, const GaussianD& b) {
    detail::require(a.dim() == b.dim(), "w2_gaussian_d: dimension mismatch");
    double mean_term = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) mean_term += (a.mean[i] - b.mean[i]) * (a.mean[i] - b.mean[i]);
    const Matrix root_a = psd_sqrt(a.cov);
    Matrix inner = root_a * b.cov * root_a;
    for (std::size_t i = 0; i < inner.rows(); ++i)
        for (std::size_t j = i + 1; j < inner.cols(); ++j) inner(i, j) = inner(j, i) = 0.5 * (inner(i, j) + inner(j, i));
    const double cross = psd_sqrt(inner).trace();
    return std::max(0.0, mean_term + a.cov.trace() + b.cov.trace() - 2.0 * cross);
}

inline double w2_gaussian_d(const GaussianD& a, const GaussianD& b) { return std::sqrt(w2_gaussian_d_squared(a, b)); }

// ---------------------------------------------------------------------------
// Transportation problem

/// Optimal coupling of a transportation LP together with its dual certificate.
struct TransportPlan {
    Matrix matrix;
    double value = 0.0;
    std::vector<double> dual_row;
    std::vector<double> dual_col;
    /// Basic cells of the final simplex basis (row-major cell indices).
    std::vector<std::size_t> basis;
};

namespace detail {

// Transportation simplex on a spanning-tree basis of I + J - 1 cells.
class TransportSimplex {
public:
    TransportSimplex(const Matrix& cost, const std::vector<double>& supply, const std::vector<double>& demand)
        : cost_(cost), rows_(cost.rows()), cols_(cost.cols()), x_(rows_, cols_), is_basic_(rows_ * cols_, 0),
          u_(rows_), v_(cols_) {
        double max_cost = 0.0;
        for (double c : cost.data()) max_cost = std::max(max_cost, std::abs(c));
        scale_ = std::max(1.0, max_cost);
        northwest_corner(supply, demand);
    }

    TransportPlan solve() {
        const double tol = 1e-12 * scale_;
        const std::size_t max_pivots = 50 * (rows_ + cols_) * rows_ * cols_ + 1000;
        for (std::size_t pivot = 0;; ++pivot) {
            if (pivot > max_pivots) throw NumericError("transportation simplex exceeded its pivot budget");
            compute_duals();
            // Bland's rule: lowest-index cell with a negative reduced cost enters.
            std::size_t entering = kNone;
            for (std::size_t cell = 0; cell < rows_ * cols_ && entering == kNone; ++cell) {
                if (is_basic_[cell]) continue;
                const std::size_t i = cell / cols_, j = cell % cols_;
                if (cost_(i, j) - u_[i] - v_[j] < -tol) entering = cell;
            }
            if (entering == kNone) break;
            pivot_on(entering);
        }
        return certify();
    }

private:
    static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

    void northwest_corner(std::vector<double> supply, std::vector<double> demand) {
        std::size_t i = 0, j = 0;
        for (;;) {
            const double amount = std::min(supply[i], demand[j]);
            x_(i, j) = amount;
            add_basic(i * cols_ + j);
            supply[i] -= amount;
            demand[j] -= amount;
            if (i + 1 == rows_ && j + 1 == cols_) break;
            if (i + 1 == rows_) ++j;
            else if (j + 1 == cols_) ++i;
            else if (supply[i] <= demand[j]) ++i;
            else ++j;
        }
    }

    void add_basic(std::size_t cell) {
        is_basic_[cell] = 1;
        basis_.push_back(cell);
    }

    void compute_duals() {
        std::vector<std::vector<std::size_t>> by_row(rows_), by_col(cols_);
        for (std::size_t cell : basis_) {
            by_row[cell / cols_].push_back(cell % cols_);
            by_col[cell % cols_].push_back(cell / cols_);
        }
        std::vector<char> row_set(rows_, 0), col_set(cols_, 0);
        std::vector<std::size_t> stack{0};  // node ids: rows 0..I-1, columns I..I+J-1
        u_[0] = 0.0;
        row_set[0] = 1;
        while (!stack.empty()) {
            const std::size_t node = stack.back();
            stack.pop_back();
            if (node < rows_) {
                for (std::size_t j : by_row[node])
                    if (!col_set[j]) {
                        v_[j] = cost_(node, j) - u_[node];
                        col_set[j] = 1;
                        stack.push_back(rows_ + j);
                    }
            } else {
                const std::size_t j = node - rows_;
                for (std::size_t i : by_col[j])
                    if (!row_set[i]) {
                        u_[i] = cost_(i, j) - v_[j];
                        row_set[i] = 1;
                        stack.push_back(i);
                    }
            }
        }
        for (char s : row_set)
            if (!s) throw NumericError("transportation basis is not a spanning tree");
        for (char s : col_set)
            if (!s) throw NumericError("transportation basis is not a spanning tree");
    }

    // Cells on the tree path from row node `row` to column node `col`.
    std::vector<std::size_t> tree_path(std::size_t row, std::size_t col) const {
        const std::size_t nodes = rows_ + cols_;
        std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(nodes);  // (neighbor, cell)
        for (std::size_t cell : basis_) {
            const std::size_t i = cell / cols_, j = cell % cols_;
            adj[i].emplace_back(rows_ + j, cell);
            adj[rows_ + j].emplace_back(i, cell);
        }
        std::vector<std::size_t> via(nodes, kNone), parent(nodes, kNone);
        std::vector<std::size_t> queue{row};
        parent[row] = row;
        for (std::size_t head = 0; head < queue.size() && parent[rows_ + col] == kNone; ++head) {
            const std::size_t node = queue[head];
            for (const auto& [next, cell] : adj[node])
                if (parent[next] == kNone) {
                    parent[next] = node;
                    via[next] = cell;
                    queue.push_back(next);
                }
        }
        if (parent[rows_ + col] == kNone) throw NumericError("transportation basis lost connectivity");
        std::vector<std::size_t> path;
        for (std::size_t node = rows_ + col; node != row; node = parent[node]) path.push_back(via[node]);
        std::reverse(path.begin(), path.end());
        return path;
    }

    void pivot_on(std::size_t entering) {
        const std::size_t ei = entering / cols_, ej = entering % cols_;
        // Path cells alternate -, +, -, ... starting next to the entering cell.
        const std::vector<std::size_t> path = tree_path(ei, ej);
        double theta = std::numeric_limits<double>::infinity();
        std::size_t leaving = kNone;
        for (std::size_t k = 0; k < path.size(); k += 2) {
            const std::size_t cell = path[k];
            const double value = x_.data()[cell];
            if (value < theta || (value == theta && cell < leaving)) {
                theta = value;
                leaving = cell;
            }
        }
        for (std::size_t k = 0; k < path.size(); ++k) {
            double& value = x_.data()[path[k]];
            value = (k % 2 == 0) ? value - theta : value + theta;
        }
        x_.data()[leaving] = 0.0;
        x_.data()[entering] = theta;
        is_basic_[leaving] = 0;
        std::replace(basis_.begin(), basis_.end(), leaving, entering);
        is_basic_[entering] = 1;
    }

    TransportPlan certify() {
        compute_duals();
        const double dual_tol = 1e-9 * scale_;
        double value = 0.0;
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) {
                if (u_[i] + v_[j] > cost_(i, j) + dual_tol)
                    throw NumericError("transport duals are infeasible at " + pair_name(i, j));
                value += x_(i, j) * cost_(i, j);
            }
        TransportPlan plan{std::move(x_), value, std::move(u_), std::move(v_), std::move(basis_)};
        return plan;
    }

    const Matrix& cost_;
    std::size_t rows_, cols_;
    Matrix x_;
    std::vector<char> is_basic_;
    std::vector<std::size_t> basis_;
    std::vector<double> u_, v_;
    double scale_ = 1.0;
};

}  // namespace detail

/// Solves min <V, cost> over couplings V with row sums w1 and column sums w2.
///
/// Exact transportation simplex: northwest-corner start, cycle pivoting and
/// Bland's rule. The returned duals satisfy dual_row_i + dual_col_j <= cost_ij
/// (to 1e-9 relative to the cost scale) and dual_row_0 == 0.
inline TransportPlan solve_transport(const Matrix& cost, const std::vector<double>& w1, const std::vector<double>& w2) {
    detail::require(cost.rows() == w1.size() && cost.cols() == w2.size(), "solve_transport: shape mismatch");
    detail::check_simplex(w1, "solve_transport row marginal");
    detail::check_simplex(w2, "solve_transport column marginal");
    for (double c : cost.data()) detail::require(std::isfinite(c), "solve_transport: costs must be finite");
    return detail::TransportSimplex(cost, w1, w2).solve();
}

// ---------------------------------------------------------------------------
// Mixture-Wasserstein distance

struct MixtureDistance {
    double distance = 0.0;
    TransportPlan plan;
};

inline Matrix component_costs(const GaussianMixture1D& p, const GaussianMixture1D& q) {
    Matrix cost(p.size(), q.size());
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < q.size(); ++j)
            cost(i, j) = w2_gaussian_1d_squared(p.components[i].gaussian, q.components[j].gaussian);
    return cost;
}

inline Matrix component_costs(const GaussianMixtureD& p, const GaussianMixtureD& q) {
    detail::require(p.dim() == q.dim(), "mw2: mixtures have different dimensions");
    Matrix cost(p.size(), q.size());
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < q.size(); ++j)
            cost(i, j) = w2_gaussian_d_squared(p.components[i].gaussian, q.components[j].gaussian);
    return cost;
}

/// MW2 between univariate mixtures: the transportation LP over pairwise Gaussian W2^2 costs.
inline MixtureDistance mw2(const GaussianMixture1D& p, const GaussianMixture1D& q) {
    validate(p);
    validate(q);
    TransportPlan plan = solve_transport(component_costs(p, q), weights_of(p), weights_of(q));
    const double distance = std::sqrt(std::max(0.0, plan.value));
    return {distance, std::move(plan)};
}

inline MixtureDistance mw2(const GaussianMixtureD& p, const GaussianMixtureD& q) {
    validate(p);
    validate(q);
    TransportPlan plan = solve_transport(component_costs(p, q), weights_of(p), weights_of(q));
    const double distance = std::sqrt(std::max(0.0, plan.value));
    return {distance, std::move(plan)};
}

// ---------------------------------------------------------------------------
// One-dimensional W2 oracles

/// An atom of a finitely supported measure on the line.
struct Atom {
    double weight = 0.0;
    double location = 0.0;
};

/// Exact W2 between discrete measures via the monotone (quantile) coupling.
inline double w2_empirical_1d(std::vector<Atom> a, std::vector<Atom> b) {
    std::vector<double> wa, wb;
    for (const auto& x : a) wa.push_back(x.weight);
    for (const auto& x : b) wb.push_back(x.weight);
    detail::check_simplex(wa, "w2_empirical_1d");
    detail::check_simplex(wb, "w2_empirical_1d");
    const auto by_location = [](const Atom& l, const Atom& r) { return l.location < r.location; };
    std::sort(a.begin(), a.end(), by_location);
    std::sort(b.begin(), b.end(), by_location);
    double total = 0.0;
    std::size_t i = 0, j = 0;
    double ra = a[0].weight, rb = b[0].weight;
    while (i < a.size() && j < b.size()) {
        const double mass = std::min(ra, rb);
        const double gap = a[i].location - b[j].location;
        total += mass * gap * gap;
        ra -= mass;
        rb -= mass;
        if (ra <= rb) {
            if (++i < a.size()) ra = a[i].weight;
        } else {
            if (++j < b.size()) rb = b[j].weight;
        }
    }
    return std::sqrt(total);
}

inline std::vector<Atom> atoms_of(const GaussianMixture1D& m) {
    std::vector<Atom> atoms;
    for (const auto& c : m.components) atoms.push_back({c.weight, c.gaussian.mean});
    return atoms;
}

inline double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// CDF of a univariate mixture; point-mass components contribute right-continuous jumps.
inline double mixture_cdf(const GaussianMixture1D& m, double x) {
    double f = 0.0;
    for (const auto& c : m.components) {
        if (c.gaussian.std > 0.0) f += c.weight * standard_normal_cdf((x - c.gaussian.mean) / c.gaussian.std);
        else if (x >= c.gaussian.mean) f += c.weight;
    }
    return f;
}

/// Survival function P(X > x) of a univariate mixture, accurate in the upper tail.
inline double mixture_sf(const GaussianMixture1D& m, double x) {
    double f = 0.0;
    for (const auto& c : m.components) {
        if (c.gaussian.std > 0.0) f += c.weight * standard_normal_cdf((c.gaussian.mean - x) / c.gaussian.std);
        else if (x < c.gaussian.mean) f += c.weight;
    }
    return f;
}

inline constexpr double kQuantileNodeSpan = 7.0;

namespace detail {

// Quantiles Q(Phi(s_k)) at midpoints s_k of a uniform grid on [-S, S], by
// warm-started bisection. Upper-tail levels bisect on the survival function.
inline std::vector<double> normal_node_quantiles(const GaussianMixture1D& m, const std::vector<double>& nodes) {
    double lo_bound = std::numeric_limits<double>::infinity();
    double hi_bound = -lo_bound;
    for (const auto& c : m.components) {
        lo_bound = std::min(lo_bound, c.gaussian.mean - 40.0 * c.gaussian.std);
        hi_bound = std::max(hi_bound, c.gaussian.mean + 40.0 * c.gaussian.std);
    }
    lo_bound -= 1.0;
    hi_bound += 1.0;
    std::vector<double> q(nodes.size());
    double lo = lo_bound;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        const double s = nodes[k];
        // below(x) is true while x lies strictly left of the quantile.
        const double level = s <= 0.0 ? standard_normal_cdf(s) : standard_normal_cdf(-s);
        const auto below = [&](double x) { return s <= 0.0 ? mixture_cdf(m, x) < level : mixture_sf(m, x) > level; };
        double hi = hi_bound;
        if (!below(lo) || below(hi)) throw NumericError("quantile bisection failed to bracket s = " + std::to_string(s));
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            if (below(mid)) lo = mid;
            else hi = mid;
        }
        q[k] = hi;
    }
    return q;
}

}  // namespace detail

/// W2 between univariate mixtures by quadrature of the quantile gap.
///
/// Returns sqrt( integral_0^1 (Q_p(t) - Q_q(t))^2 dt ), evaluated as a midpoint
/// rule in s after substituting t = Phi(s), s in [-7, 7], with the normal
/// density weights renormalized to sum to one.
inline double w2_mixture_1d_numeric(const GaussianMixture1D& p, const GaussianMixture1D& q, std::size_t grid = 2048) {
    detail::require(grid >= 64, "w2_mixture_1d_numeric needs at least 64 quadrature nodes");
    validate(p);
    validate(q);
    const double h = 2.0 * kQuantileNodeSpan / static_cast<double>(grid);
    std::vector<double> nodes(grid), weights(grid);
    double total = 0.0;
    for (std::size_t k = 0; k < grid; ++k) {
        nodes[k] = -kQuantileNodeSpan + (static_cast<double>(k) + 0.5) * h;
        total += weights[k] = std::exp(-0.5 * nodes[k] * nodes[k]);
    }
    const auto qp = detail::normal_node_quantiles(p, nodes);
    const auto qq = detail::normal_node_quantiles(q, nodes);
    double sum = 0.0;
    for (std::size_t k = 0; k < grid; ++k) sum += weights[k] * (qp[k] - qq[k]) * (qp[k] - qq[k]);
    return std::sqrt(sum / total);
}

// ---------------------------------------------------------------------------
// Envelope-theorem derivatives of MW2^2

struct MixtureGradient1D {
    std::vector<double> mean;
    std::vector<double> std;
    std::vector<double> weight;
};

struct MW2Gradients {
    MixtureGradient1D p;
    MixtureGradient1D q;
};

/// Dual vector shifted so its `w`-weighted mean is zero.
inline std::vector<double> centered_duals(const std::vector<double>& duals, const std::vector<double>& w) {
    double mean = 0.0;
    for (std::size_t i = 0; i < duals.size(); ++i) mean += w[i] * duals[i];
    std::vector<double> out(duals);
    for (double& v : out) v -= mean;
    return out;
}

/// Gradients of MW2^2(p, q) with respect to both mixtures' parameters.
///
/// Means and stds differentiate the fixed optimal plan; weights receive the
/// LP duals, centered so the gradient is orthogonal to the simplex normal.
/// Rejects plans that fail complementary slackness or marginal feasibility.
inline MW2Gradients mw2_gradients(const GaussianMixture1D& p, const GaussianMixture1D& q, const TransportPlan& plan) {
    const std::size_t I = p.size(), J = q.size();
    detail::require(plan.matrix.rows() == I && plan.matrix.cols() == J && plan.dual_row.size() == I &&
                        plan.dual_col.size() == J,
                    "mw2_gradients: plan shape does not match the mixtures");
    const Matrix cost = component_costs(p, q);
    double scale = 1.0;
    for (double c : cost.data()) scale = std::max(scale, std::abs(c));
    for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < J; ++j)
            if (plan.matrix(i, j) > 1e-12 &&
                std::abs(plan.dual_row[i] + plan.dual_col[j] - cost(i, j)) > 1e-8 * scale)
                throw ValidationError("mw2_gradients: plan violates complementary slackness at " +
                                      detail::pair_name(i, j));
    for (std::size_t i = 0; i < I; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < J; ++j) row += plan.matrix(i, j);
        detail::require(std::abs(row - p.components[i].weight) <= 1e-8, "mw2_gradients: plan rows do not match p");
    }
    for (std::size_t j = 0; j < J; ++j) {
        double col = 0.0;
        for (std::size_t i = 0; i < I; ++i) col += plan.matrix(i, j);
        detail::require(std::abs(col - q.components[j].weight) <= 1e-8, "mw2_gradients: plan columns do not match q");
    }

    MW2Gradients g;
    g.p.mean.assign(I, 0.0);
    g.p.std.assign(I, 0.0);
    g.q.mean.assign(J, 0.0);
    g.q.std.assign(J, 0.0);
    for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < J; ++j) {
            const double v = plan.matrix(i, j);
            if (v == 0.0) continue;
            const auto& a = p.components[i].gaussian;
            const auto& b = q.components[j].gaussian;
            g.p.mean[i] += 2.0 * v * (a.mean - b.mean);
            g.p.std[i] += 2.0 * v * (a.std - b.std);
            g.q.mean[j] += 2.0 * v * (b.mean - a.mean);
            g.q.std[j] += 2.0 * v * (b.std - a.std);
        }
    g.p.weight = centered_duals(plan.dual_row, weights_of(p));
    g.q.weight = centered_duals(plan.dual_col, weights_of(q));
    return g;
}

}  // namespace mixembed
