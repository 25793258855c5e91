#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hgdiff/error.hpp"
#include "hgdiff/hypergraph.hpp"

namespace hgdiff {

using Vec = std::vector<double>;

/// Hypergraph total variation: sum_e w_e (max_{i in e} u_i - min_{i in e} u_i).
inline double tv_h(const Hypergraph& H, std::span<const double> u) {
    if (u.size() != H.num_vertices()) {
        throw InvalidArgument("tv_h: vector length " + std::to_string(u.size()) + " != n " +
                              std::to_string(H.num_vertices()));
    }
    double total = 0.0;
    for (const auto& e : H.edges()) {
        double lo = u[e.vertices[0]], hi = lo;
        for (Index v : e.vertices) {
            lo = std::min(lo, u[v]);
            hi = std::max(hi, u[v]);
        }
        total += e.weight * (hi - lo);
    }
    return total;
}

/// Which norm sits in the denominator of the Rayleigh quotient.
enum class NormKind {
    WeightedL1,  ///< sum_i d_i |u_i|
    WeightedL2,  ///< sqrt(sum_i d_i u_i^2)
};

inline std::string to_string(NormKind k) { return k == NormKind::WeightedL1 ? "weighted_l1" : "weighted_l2"; }

inline NormKind norm_kind_from_string(const std::string& s) {
    if (s == "weighted_l1" || s == "l1") return NormKind::WeightedL1;
    if (s == "weighted_l2" || s == "l2") return NormKind::WeightedL2;
    throw InvalidArgument("unknown norm '" + s + "' (expected weighted_l1 or weighted_l2)");
}

inline void check_degree_weights(std::span<const double> d) {
    bool any_positive = false;
    for (double x : d) {
        if (!(std::isfinite(x) && x >= 0.0)) throw InvalidArgument("degree weights must be finite and >= 0");
        any_positive = any_positive || x > 0.0;
    }
    if (!any_positive) throw InvalidArgument("degree weights are all zero");
}

inline double weighted_norm(std::span<const double> u, std::span<const double> d,
                            NormKind kind = NormKind::WeightedL1) {
    if (u.size() != d.size()) throw InvalidArgument("weighted_norm: length mismatch");
    double acc = 0.0;
    if (kind == NormKind::WeightedL1) {
        for (std::size_t i = 0; i < u.size(); ++i) acc += d[i] * std::abs(u[i]);
        return acc;
    }
    for (std::size_t i = 0; i < u.size(); ++i) acc += d[i] * u[i] * u[i];
    return std::sqrt(acc);
}

struct NormSubgradient {
    double norm = 0.0;
    Vec q;
};

/// Norm value and one element q of its subdifferential at u.
/// For the weighted 1-norm q_i = d_i sign(u_i) with sign(0) = 0.
inline NormSubgradient norm_and_subgrad(std::span<const double> u, std::span<const double> d,
                                        NormKind kind = NormKind::WeightedL1) {
    if (u.size() != d.size()) throw InvalidArgument("norm_and_subgrad: length mismatch");
    check_degree_weights(d);
    NormSubgradient out;
    out.norm = weighted_norm(u, d, kind);
    if (out.norm == 0.0) throw NumericalError("flow degenerate at zero");
    out.q.resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (kind == NormKind::WeightedL1) {
            out.q[i] = u[i] > 0.0 ? d[i] : (u[i] < 0.0 ? -d[i] : 0.0);
        } else {
            out.q[i] = d[i] * u[i] / out.norm;
        }
    }
    return out;
}

/// q - (<d,q>/<d,d>) d, i.e. q with its component along d removed.
inline Vec remove_d_component(std::span<const double> q, std::span<const double> d) {
    if (q.size() != d.size()) throw InvalidArgument("remove_d_component: length mismatch");
    const double dd = std::inner_product(d.begin(), d.end(), d.begin(), 0.0);
    if (dd == 0.0) throw InvalidArgument("remove_d_component: d is zero");
    const double coef = std::inner_product(d.begin(), d.end(), q.begin(), 0.0) / dd;
    Vec out(q.begin(), q.end());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= coef * d[i];
    return out;
}

namespace detail {

// Threshold a with sum_i max(v_i - a, 0) = r (r > 0); the usual sort-based
// simplex-projection pivot.
inline double upper_threshold(std::span<const double> v, double r, std::vector<double>& scratch) {
    scratch.assign(v.begin(), v.end());
    std::sort(scratch.begin(), scratch.end(), std::greater<>());
    double cumsum = 0.0;
    for (std::size_t k = 0; k < scratch.size(); ++k) {
        cumsum += scratch[k];
        const double a = (cumsum - r) / static_cast<double>(k + 1);
        if (k + 1 == scratch.size() || scratch[k + 1] <= a) return a;
    }
    return 0.0;
}

// Mirror image: b with sum_i max(b - v_i, 0) = r.
inline double lower_threshold(std::span<const double> v, double r, std::vector<double>& scratch) {
    scratch.assign(v.begin(), v.end());
    std::sort(scratch.begin(), scratch.end());
    double cumsum = 0.0;
    for (std::size_t k = 0; k < scratch.size(); ++k) {
        cumsum += scratch[k];
        const double b = (cumsum + r) / static_cast<double>(k + 1);
        if (k + 1 == scratch.size() || scratch[k + 1] >= b) return b;
    }
    return 0.0;
}

}  // namespace detail

/**
 * Euclidean projection of v onto D(r) = { y : sum y = 0, sum max(y,0) <= r }.
 *
 * On the zero-sum hyperplane sum max(y,0) = ||y||_1 / 2, so D(r) is that
 * hyperplane cut by an l1 ball. When the centred point is outside the ball the
 * projection is max(v-a,0) - max(b-v,0) where a and b are the two thresholds
 * giving positive and negative mass exactly r; both are found exactly by sorting.
 */
inline void project_zero_sum_capped(std::span<double> v, double r, std::vector<double>& scratch) {
    const std::size_t m = v.size();
    if (m == 0) return;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(m);
    double pos_mass = 0.0;
    for (double x : v) pos_mass += std::max(x - mean, 0.0);
    if (pos_mass <= r) {
        for (double& x : v) x -= mean;
        return;
    }
    const double a = detail::upper_threshold(v, r, scratch);
    const double b = detail::lower_threshold(v, r, scratch);
    for (double& x : v) x = std::max(x - a, 0.0) - std::max(b - x, 0.0);
}

struct ProxParams {
    std::size_t max_iters = 5000;
    double gap_tol = 1e-10;
    std::size_t check_every = 10;
};

struct ProxResult {
    Vec x;
    double gap = 0.0;        ///< final primal-dual gap
    double residual = 0.0;   ///< ||(z - x) - K^T y||_inf; unconstrained prox only
    std::size_t iterations = 0;
    bool converged = false;
};

/// Affine feasible set for the constrained prox: coordinates with
/// fixed[i] != 0 are pinned to value[i]; optionally <normal, x> = rhs as well.
struct AffineConstraint {
    std::vector<char> fixed;
    Vec value;
    Vec normal;  ///< empty: no hyperplane
    double rhs = 0.0;

    /// Euclidean projection onto the set, in place.
    void project(std::span<double> x) const {
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (fixed[i]) x[i] = value[i];
        }
        if (normal.empty()) return;
        double dot = 0.0, free_sq = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            dot += normal[i] * x[i];
            if (!fixed[i]) free_sq += normal[i] * normal[i];
        }
        if (free_sq == 0.0) return;
        const double mu = (dot - rhs) / free_sq;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (!fixed[i]) x[i] -= mu * normal[i];
        }
    }
};

namespace detail {

inline ProxResult prox_tv_impl(const Hypergraph& H, std::span<const double> z, double t, const ProxParams& params,
                               const AffineConstraint* constraint) {
    const std::size_t n = H.num_vertices();
    if (z.size() != n) throw InvalidArgument("prox_tv: vector length mismatch");
    if (!(t > 0.0)) throw InvalidArgument("prox_tv: step t must be > 0");
    if (constraint && (constraint->fixed.size() != n || constraint->value.size() != n ||
                       (!constraint->normal.empty() && constraint->normal.size() != n))) {
        throw InvalidArgument("prox_tv: constraint size mismatch");
    }
    auto project = [&](std::span<double> v) {
        if (constraint) constraint->project(v);
    };

    ProxResult res;
    res.x.assign(z.begin(), z.end());
    project(res.x);
    if (H.num_edges() == 0) {
        res.converged = true;
        return res;
    }

    std::size_t max_count = 1;
    for (std::size_t c : H.edge_counts()) max_count = std::max(max_count, c);
    const double op_norm = std::sqrt(static_cast<double>(max_count));
    double tau = 1.0 / op_norm;
    double sigma = 1.0 / op_norm;

    // Dual blocks, laid out contiguously edge by edge.
    std::vector<std::size_t> offset(H.num_edges() + 1, 0);
    for (std::size_t e = 0; e < H.num_edges(); ++e) offset[e + 1] = offset[e] + H.edge(e).cardinality();
    Vec y(offset.back(), 0.0);
    Vec x = res.x, x_bar = x, x_prev(n), kty(n, 0.0), cand(n);
    std::vector<double> scratch;

    auto apply_kt = [&](const Vec& dual, Vec& out) {
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t e = 0; e < H.num_edges(); ++e) {
            const auto& verts = H.edge(e).vertices;
            for (std::size_t k = 0; k < verts.size(); ++k) out[verts[k]] += dual[offset[e] + k];
        }
    };
    auto primal_value = [&](const Vec& p) {
        double q = 0.0;
        for (std::size_t i = 0; i < n; ++i) q += 0.5 * (p[i] - z[i]) * (p[i] - z[i]);
        return q + t * tv_h(H, p);
    };
    // Dual function: min over the feasible set of 1/2||x - z||^2 + <K^T y, x>,
    // attained at the projection of z - K^T y.
    auto dual_value = [&](const Vec& k, Vec& xmin) {
        for (std::size_t i = 0; i < n; ++i) xmin[i] = z[i] - k[i];
        project(xmin);
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) v += 0.5 * (xmin[i] - z[i]) * (xmin[i] - z[i]) + k[i] * xmin[i];
        return v;
    };

    double best_primal = primal_value(x);
    Vec best_x = x;
    double best_gap = std::numeric_limits<double>::infinity();

    std::size_t it = 0;
    for (; it < params.max_iters; ++it) {
        for (std::size_t e = 0; e < H.num_edges(); ++e) {
            const auto& verts = H.edge(e).vertices;
            std::span<double> blk(y.data() + offset[e], verts.size());
            for (std::size_t k = 0; k < verts.size(); ++k) blk[k] += sigma * x_bar[verts[k]];
            project_zero_sum_capped(blk, t * H.edge(e).weight, scratch);
        }
        apply_kt(y, kty);
        x_prev = x;
        for (std::size_t i = 0; i < n; ++i) x[i] = (x[i] - tau * kty[i] + tau * z[i]) / (1.0 + tau);
        project(x);
        const double theta = 1.0 / std::sqrt(1.0 + 2.0 * tau);
        tau *= theta;
        sigma /= theta;
        for (std::size_t i = 0; i < n; ++i) x_bar[i] = x[i] + theta * (x[i] - x_prev[i]);

        if ((it + 1) % params.check_every == 0 || it + 1 == params.max_iters) {
            const double dval = dual_value(kty, cand);
            const double p1 = primal_value(x);
            const double p2 = primal_value(cand);
            const bool use_cand = p2 < p1;
            const double pval = use_cand ? p2 : p1;
            if (pval < best_primal) {
                best_primal = pval;
                best_x = use_cand ? cand : x;
            }
            best_gap = best_primal - dval;
            if (best_gap < params.gap_tol) {
                res.converged = true;
                ++it;
                break;
            }
        }
    }

    res.iterations = it;
    res.gap = std::max(best_gap, 0.0);
    res.x = std::move(best_x);
    if (!constraint) {
        for (std::size_t i = 0; i < n; ++i) res.residual = std::max(res.residual, std::abs(z[i] - res.x[i] - kty[i]));
    }
    return res;
}

}  // namespace detail

/**
 * prox_{t TV_H}(z) = argmin_x 1/2 ||x - z||^2 + t TV_H(x).
 *
 * Accelerated primal-dual iteration on the saddle problem
 *   min_x max_{y_e in D(t w_e)} 1/2 ||x - z||^2 + sum_e <y_e, x|_e>,
 * one dual block per hyperedge. The data term is 1-strongly convex so the
 * step sizes follow the O(1/N^2) schedule. Stops when the duality gap falls
 * below gap_tol; on the iteration cap the best primal candidate is returned
 * with converged = false.
 */
inline ProxResult prox_tv(const Hypergraph& H, std::span<const double> z, double t, const ProxParams& params = {}) {
    return detail::prox_tv_impl(H, z, t, params, nullptr);
}

/// Same minimisation restricted to an affine set (pinned coordinates and an
/// optional hyperplane). The projection is applied inside every primal update.
inline ProxResult prox_tv_constrained(const Hypergraph& H, std::span<const double> z, double t,
                                      const AffineConstraint& constraint, const ProxParams& params = {}) {
    return detail::prox_tv_impl(H, z, t, params, &constraint);
}

}  // namespace hgdiff
