#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "hgdiff/error.hpp"
#include "hgdiff/hypergraph.hpp"
#include "hgdiff/modality.hpp"
#include "hgdiff/tv.hpp"

namespace hgdiff {

struct FlowParams {
    double dt = 0.1;
    std::size_t max_outer_iters = 500;
    double ratio_tol = 1e-6;
    ProxParams inner{.max_iters = 20000, .gap_tol = 1e-10, .check_every = 10};
    double clamp_value = 0.0;  ///< c; 0 selects 1 / (sum of labeled degrees)
    NormKind norm = NormKind::WeightedL1;
    std::size_t init_smoothing_iters = 20;  ///< clamped averaging sweeps used to seed u_0
    bool center_init = true;                ///< remove the d-component of u_0 when only given labels are clamped
    double descent_slack = 1e-9;
    std::size_t max_backtracks = 20;  ///< dt halvings tried before a step is declared stalled
    bool parallel_classes = true;

    void validate() const {
        if (!(dt > 0.0)) throw InvalidArgument("flow: dt must be > 0");
        if (!(ratio_tol > 0.0)) throw InvalidArgument("flow: ratio_tol must be > 0");
        if (!(inner.gap_tol > 0.0)) throw InvalidArgument("flow: inner gap tolerance must be > 0");
        if (inner.max_iters == 0) throw InvalidArgument("flow: inner iteration cap must be > 0");
        if (clamp_value < 0.0) throw InvalidArgument("flow: clamp value must be >= 0");
    }
};

/// Rayleigh quotient TV_H(u) / ||u||.
inline double rayleigh_ratio(const Hypergraph& H, std::span<const double> u, NormKind norm = NormKind::WeightedL1) {
    const double den = weighted_norm(u, H.degrees(), norm);
    if (den == 0.0) throw NumericalError("rayleigh_ratio: zero vector");
    return tv_h(H, u) / den;
}

/// Signed clamp targets for the one-vs-rest flow of class `cls`:
/// +1 for nodes labeled cls, -1 for other labeled nodes, 0 for unlabeled ones.
inline std::vector<int> clamp_signs(const LabelState& labels, int cls) {
    std::vector<int> s(labels.size(), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels.is_labeled(i)) s[i] = labels[i].cls == cls ? 1 : -1;
    }
    return s;
}

inline double default_clamp_value(const Hypergraph& H, const LabelState& labels) {
    double acc = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels.is_labeled(i)) acc += H.degrees()[i];
    }
    if (acc == 0.0) throw InvalidArgument("flow: every labeled node is isolated");
    return 1.0 / acc;
}

/// Labeled coordinates pinned to +-c and <d, u> = 0.
inline AffineConstraint flow_constraint(const Hypergraph& H, const std::vector<int>& signs, double c) {
    const std::size_t n = H.num_vertices();
    AffineConstraint con;
    con.fixed.assign(n, 0);
    con.value.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (signs[i] != 0) {
            con.fixed[i] = 1;
            con.value[i] = signs[i] * c;
        }
    }
    con.normal = H.degrees();
    con.rhs = 0.0;
    return con;
}

inline void normalize_in_place(Vec& u, std::span<const double> d, NormKind norm) {
    const double nu = weighted_norm(u, d, norm);
    if (nu == 0.0) throw NumericalError("collapsed to zero; reduce dt");
    for (double& x : u) x /= nu;
}

/**
 * Starting point of the class-`cls` flow.
 *
 * Labeled nodes get +-c, unlabeled nodes the result of a few clamped
 * edge-averaging sweeps (zero if smoothing is disabled). When no pseudo
 * labels are present the d-component is then removed through the unlabeled
 * coordinates; with pseudo labels the clamp set already fixes the balance
 * and centring would only push the few free nodes to extreme values. The
 * flow preserves <d, u> from here on.
 */
inline Vec initial_function(const Hypergraph& H, const LabelState& labels, int cls, const FlowParams& params) {
    const std::size_t n = H.num_vertices();
    const auto signs = clamp_signs(labels, cls);
    const double c = params.clamp_value > 0.0 ? params.clamp_value : default_clamp_value(H, labels);
    Vec u(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) u[i] = signs[i] * c;

    Vec acc(n), wsum(n);
    for (std::size_t sweep = 0; sweep < params.init_smoothing_iters; ++sweep) {
        std::fill(acc.begin(), acc.end(), 0.0);
        std::fill(wsum.begin(), wsum.end(), 0.0);
        for (const auto& e : H.edges()) {
            double mean = 0.0;
            for (Index v : e.vertices) mean += u[v];
            mean /= static_cast<double>(e.cardinality());
            for (Index v : e.vertices) {
                acc[v] += e.weight * mean;
                wsum[v] += e.weight;
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (signs[i] == 0 && wsum[i] > 0.0) u[i] = acc[i] / wsum[i];
        }
    }
    bool has_pseudo = false;
    for (std::size_t i = 0; i < n; ++i) has_pseudo = has_pseudo || (labels.is_labeled(i) && !labels.is_given(i));
    if (params.center_init && !has_pseudo) flow_constraint(H, signs, c).project(u);
    normalize_in_place(u, H.degrees(), params.norm);
    return u;
}

struct FlowStepResult {
    Vec u;
    double ratio = 0.0;
    double prox_gap = 0.0;
    bool prox_converged = true;
    double dt_used = 0.0;
    std::size_t backtracks = 0;
    bool stalled = false;  ///< no descending step found; u is returned unchanged
};

/**
 * One semi-explicit step of the Rayleigh-quotient flow for class `cls`.
 *
 * With lambda = TV_H(u)/||u|| and q in the subdifferential of the norm,
 *   z      = v + dt * lambda * (q - <d,q>/<d,d> d)
 *   u_half = argmin_{x in C} 1/2 ||x - z||^2 + dt TV_H(x)
 *   u_next = u_half / ||u_half||
 * where v is u rescaled so its labeled entries sit at +-c and C pins labeled
 * nodes to +-c (class cls positive) and keeps <d, x> = <d, v>. Since v lies
 * in C the ratio cannot increase up to the prox tolerance; a step that still
 * increases it is retried with dt halved, and after max_backtracks the input
 * is returned with stalled = true.
 */
inline FlowStepResult flow_step(const Hypergraph& H, std::span<const double> u_k, const FlowParams& params,
                                const LabelState& labels, int cls) {
    const std::size_t n = H.num_vertices();
    if (u_k.size() != n) throw InvalidArgument("flow_step: vector length mismatch");
    if (labels.size() != n) throw InvalidArgument("flow_step: label state size mismatch");
    params.validate();
    const auto& d = H.degrees();
    const auto signs = clamp_signs(labels, cls);
    bool any_label = false;
    for (int s : signs) any_label = any_label || s != 0;
    const double c = !any_label ? 0.0 : (params.clamp_value > 0.0 ? params.clamp_value : default_clamp_value(H, labels));

    Vec v(u_k.begin(), u_k.end());
    if (any_label) {
        double mag = 0.0;
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (signs[i] != 0) {
                mag += std::abs(u_k[i]);
                ++cnt;
            }
        }
        mag /= static_cast<double>(cnt);
        if (mag == 0.0) throw NumericalError("flow_step: labeled entries vanished");
        for (double& x : v) x *= c / mag;
    }
    AffineConstraint con = flow_constraint(H, signs, c);
    con.rhs = std::inner_product(con.normal.begin(), con.normal.end(), v.begin(), 0.0);

    const double lambda = rayleigh_ratio(H, u_k, params.norm);
    const auto sub = norm_and_subgrad(v, d, params.norm);
    const Vec p = remove_d_component(sub.q, d);

    FlowStepResult out;
    double dt = params.dt;
    for (std::size_t attempt = 0; attempt <= params.max_backtracks; ++attempt, dt *= 0.5) {
        Vec z(n);
        for (std::size_t i = 0; i < n; ++i) z[i] = v[i] + dt * lambda * p[i];
        auto prox = prox_tv_constrained(H, z, dt, con, params.inner);
        Vec next = std::move(prox.x);
        if (weighted_norm(next, d, params.norm) == 0.0) throw NumericalError("collapsed to zero; reduce dt");
        normalize_in_place(next, d, params.norm);
        const double r = rayleigh_ratio(H, next, params.norm);
        out.prox_gap = prox.gap;
        out.prox_converged = prox.converged;
        out.backtracks = attempt;
        out.dt_used = dt;
        if (r <= lambda + params.descent_slack) {
            out.u = std::move(next);
            out.ratio = r;
            return out;
        }
    }
    out.u.assign(u_k.begin(), u_k.end());
    out.ratio = lambda;
    out.stalled = true;
    return out;
}

/// Per-iteration diagnostic of a class flow.
struct FlowRecord {
    int cls = 0;
    std::size_t iteration = 0;
    double ratio = 0.0;
    double gap = 0.0;
};

struct ClassFlow {
    Vec u;
    std::vector<double> ratio_history;
    std::vector<FlowRecord> records;
    bool converged = false;
    bool stalled = false;
    bool prox_warning = false;  ///< some inner solve hit its iteration cap
};

/// Runs the class-`cls` flow from its initial function until the relative
/// ratio change drops below ratio_tol or max_outer_iters is reached.
inline ClassFlow run_class_flow(const Hypergraph& H, const LabelState& labels, int cls, const FlowParams& params) {
    params.validate();
    ClassFlow out;
    out.u = initial_function(H, labels, cls, params);
    double ratio = rayleigh_ratio(H, out.u, params.norm);
    out.ratio_history.push_back(ratio);
    out.records.push_back({cls, 0, ratio, 0.0});
    for (std::size_t k = 0; k < params.max_outer_iters; ++k) {
        auto step = flow_step(H, out.u, params, labels, cls);
        out.prox_warning = out.prox_warning || !step.prox_converged;
        if (step.stalled) {
            out.stalled = true;
            out.converged = true;
            break;
        }
        const double prev = ratio;
        out.u = std::move(step.u);
        ratio = step.ratio;
        out.ratio_history.push_back(ratio);
        out.records.push_back({cls, k + 1, ratio, step.prox_gap});
        if (std::abs(prev - ratio) <= params.ratio_tol * prev) {
            out.converged = true;
            break;
        }
    }
    return out;
}

/// Breaks exact ties among `candidates` (class ids) for node i: the class whose
/// labeled nodes are fewest hyperedge hops away wins, then the lowest index.
inline int break_tie(const std::vector<int>& candidates, std::size_t i,
                     const std::vector<std::vector<std::size_t>>& class_hops) {
    int best = candidates.front();
    for (int c : candidates) {
        const auto dc = class_hops[static_cast<std::size_t>(c)][i];
        const auto db = class_hops[static_cast<std::size_t>(best)][i];
        if (dc < db || (dc == db && c < best)) best = c;
    }
    return best;
}

/// Hop distance from every node to the labeled nodes of each class.
inline std::vector<std::vector<std::size_t>> class_hop_distances(const Hypergraph& H, const LabelState& labels) {
    std::vector<std::vector<std::size_t>> out;
    for (int c = 0; c < labels.num_classes(); ++c) {
        std::vector<Index> src;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels.is_labeled(i) && labels[i].cls == c) src.push_back(i);
        }
        out.push_back(H.hop_distances(src));
    }
    return out;
}

/// Output of the L coupled class flows.
struct NodeFunctions {
    std::vector<Vec> columns;                 ///< columns[l][i] = u^l(x_i), each with unit norm
    std::vector<std::vector<double>> ratio_history;
    std::vector<char> converged;
    std::vector<FlowRecord> records;          ///< all classes, class-major
    bool prox_warning = false;

    std::size_t num_classes() const { return columns.size(); }
    std::size_t num_nodes() const { return columns.empty() ? 0 : columns.front().size(); }
    double operator()(std::size_t i, std::size_t l) const { return columns[l][i]; }
};

struct MulticlassResult {
    NodeFunctions functions;
    std::vector<int> prediction;
};

/**
 * One-vs-rest flows for every class followed by argmax labeling. Labeled
 * nodes (given or pseudo) keep their class; exact argmax ties are resolved by
 * hop distance to each class's labeled nodes, then by lowest class index.
 */
inline MulticlassResult run_multiclass(const Hypergraph& H, const LabelState& labels, const FlowParams& params) {
    if (labels.size() != H.num_vertices()) throw InvalidArgument("run_multiclass: label state size mismatch");
    params.validate();
    labels.require_all_classes();
    const int L = labels.num_classes();

    std::vector<ClassFlow> flows(static_cast<std::size_t>(L));
    if (params.parallel_classes && L > 1) {
        std::vector<std::future<ClassFlow>> jobs;
        for (int l = 0; l < L; ++l) {
            jobs.push_back(std::async(std::launch::async, [&H, &labels, &params, l] {
                return run_class_flow(H, labels, l, params);
            }));
        }
        for (int l = 0; l < L; ++l) flows[static_cast<std::size_t>(l)] = jobs[static_cast<std::size_t>(l)].get();
    } else {
        for (int l = 0; l < L; ++l) flows[static_cast<std::size_t>(l)] = run_class_flow(H, labels, l, params);
    }

    MulticlassResult res;
    auto& nf = res.functions;
    for (auto& f : flows) {
        nf.columns.push_back(std::move(f.u));
        nf.ratio_history.push_back(std::move(f.ratio_history));
        nf.converged.push_back(f.converged ? 1 : 0);
        nf.records.insert(nf.records.end(), f.records.begin(), f.records.end());
        nf.prox_warning = nf.prox_warning || f.prox_warning;
    }

    const std::size_t n = H.num_vertices();
    const auto hops = class_hop_distances(H, labels);
    res.prediction.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels.is_labeled(i)) {
            res.prediction[i] = labels[i].cls;
            continue;
        }
        double best = nf(i, 0);
        std::vector<int> ties{0};
        for (int l = 1; l < L; ++l) {
            const double v = nf(i, static_cast<std::size_t>(l));
            if (v > best) {
                best = v;
                ties.assign(1, l);
            } else if (v == best) {
                ties.push_back(l);
            }
        }
        res.prediction[i] = ties.size() == 1 ? ties.front() : break_tie(ties, i, hops);
    }
    return res;
}

struct BinaryResult {
    Vec u;                       ///< flow function of class 1
    std::vector<int> partition;  ///< +1 for class 1, -1 for class 0
    std::vector<double> ratio_history;
    bool converged = false;
};

/// Two-class flow: class 1 is the positive side, thresholded at zero.
inline BinaryResult run_binary_flow(const Hypergraph& H, const LabelState& labels, const FlowParams& params) {
    if (labels.num_classes() != 2) throw InvalidArgument("run_binary_flow: needs exactly 2 classes");
    if (labels.size() != H.num_vertices()) throw InvalidArgument("run_binary_flow: label state size mismatch");
    labels.require_all_classes();
    auto flow = run_class_flow(H, labels, 1, params);
    const auto hops = class_hop_distances(H, labels);
    BinaryResult out;
    out.partition.assign(H.num_vertices(), 0);
    for (std::size_t i = 0; i < H.num_vertices(); ++i) {
        int cls;
        if (labels.is_labeled(i)) {
            cls = labels[i].cls;
        } else if (flow.u[i] > 0.0) {
            cls = 1;
        } else if (flow.u[i] < 0.0) {
            cls = 0;
        } else {
            cls = break_tie({0, 1}, i, hops);
        }
        out.partition[i] = cls == 1 ? 1 : -1;
    }
    out.u = std::move(flow.u);
    out.ratio_history = std::move(flow.ratio_history);
    out.converged = flow.converged;
    return out;
}

}  // namespace hgdiff
