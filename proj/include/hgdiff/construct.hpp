#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hgdiff/error.hpp"
#include "hgdiff/hypergraph.hpp"
#include "hgdiff/modality.hpp"

namespace hgdiff {

inline constexpr double kMinIncidence = 1e-12;

/// Returns X with every row scaled to unit Euclidean norm.
inline Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd out = X;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const double nrm = X.row(i).norm();
        if (nrm == 0.0) throw InvalidArgument("normalize_rows: row " + std::to_string(i) + " is zero");
        out.row(i) /= nrm;
    }
    return out;
}

/// Throws with a norm report unless every row has unit norm within tol.
inline void require_unit_rows(const Eigen::MatrixXd& X, double tol = 1e-8) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const double nrm = X.row(i).norm();
        if (!(std::abs(nrm - 1.0) <= tol)) {
            std::ostringstream msg;
            msg.precision(10);
            msg << "embeddings are not unit-normalized: row " << i << " has norm " << nrm;
            throw InvalidArgument(msg.str());
        }
    }
}

/**
 * One star hyperedge per node: edge j = {j} + its k most cosine-similar rows
 * (ties to the lower index). Member i carries incidence cos(v_i, v_j), or
 * (1 + cos)/2 when the cosine is not positive (floored at kMinIncidence for
 * antipodal rows); the edge weight is the mean incidence. Vertex j is listed
 * first.
 */
inline Hypergraph knn_modal_hypergraph(const Eigen::MatrixXd& embeddings, std::size_t k) {
    const auto n = static_cast<std::size_t>(embeddings.rows());
    if (n < 2) throw InvalidArgument("knn_modal_hypergraph: need at least 2 rows");
    if (k < 1 || k >= n) {
        throw InvalidArgument("knn_modal_hypergraph: k must satisfy 1 <= k < n (k=" + std::to_string(k) +
                              ", n=" + std::to_string(n) + ")");
    }
    require_unit_rows(embeddings);
    const Eigen::MatrixXd S = embeddings * embeddings.transpose();

    auto incidence_of = [](double c) {
        c = std::min(c, 1.0);
        return c > 0.0 ? c : std::max(0.5 * (1.0 + c), kMinIncidence);
    };

    std::vector<HyperEdge> edges;
    edges.reserve(n);
    std::vector<Index> order;
    for (Index j = 0; j < n; ++j) {
        order.resize(n);
        std::iota(order.begin(), order.end(), Index{0});
        order.erase(order.begin() + static_cast<std::ptrdiff_t>(j));
        const auto col = static_cast<Eigen::Index>(j);
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                          [&](Index a, Index b) {
                              const double sa = S(static_cast<Eigen::Index>(a), col);
                              const double sb = S(static_cast<Eigen::Index>(b), col);
                              return sa > sb || (sa == sb && a < b);
                          });
        HyperEdge e;
        e.vertices.push_back(j);
        e.incidence.push_back(incidence_of(S(col, col)));
        for (std::size_t r = 0; r < k; ++r) {
            e.vertices.push_back(order[r]);
            e.incidence.push_back(incidence_of(S(static_cast<Eigen::Index>(order[r]), col)));
        }
        e.weight = std::accumulate(e.incidence.begin(), e.incidence.end(), 0.0) / static_cast<double>(e.incidence.size());
        edges.push_back(std::move(e));
    }
    return Hypergraph(n, std::move(edges));
}

struct ConstructionResult {
    Hypergraph hypergraph;
    std::vector<std::string> warnings;
};

/**
 * Hypergraph over a phenotypic measure.
 *
 * Categorical: one edge per category code with at least two members (weight 1,
 * incidence 1), in increasing code order. Numeric: for every subject, the
 * subject plus its k nearest subjects by |difference| (ties to the lower
 * index), vertices sorted, identical vertex sets emitted once. A constant
 * numeric column yields a single edge over all vertices.
 */
inline ConstructionResult phenotypic_hypergraph(const ModalityTable& measure, std::size_t k) {
    measure.validate();
    if (measure.kind != ModalityKind::Phenotypic) {
        throw InvalidArgument("phenotypic_hypergraph: modality '" + measure.name + "' is not phenotypic");
    }
    const std::size_t n = measure.rows();
    const auto& col = measure.features;
    ConstructionResult out;
    std::vector<HyperEdge> edges;

    if (measure.categorical) {
        std::map<long long, std::vector<Index>> groups;
        for (Index i = 0; i < n; ++i) {
            const double v = col(static_cast<Eigen::Index>(i), 0);
            if (v != std::round(v)) {
                throw InvalidArgument("phenotypic_hypergraph: non-integer category code in '" + measure.name + "'");
            }
            groups[std::llround(v)].push_back(i);
        }
        for (auto& [code, members] : groups) {
            if (members.size() < 2) {
                out.warnings.push_back("measure '" + measure.name + "': category " + std::to_string(code) +
                                       " has fewer than 2 members; no edge emitted");
                continue;
            }
            edges.push_back({members, 1.0, std::vector<double>(members.size(), 1.0)});
        }
        if (edges.empty()) out.warnings.push_back("measure '" + measure.name + "': no category edges emitted");
        out.hypergraph = Hypergraph(n, std::move(edges));
        return out;
    }

    if (n < 2) throw InvalidArgument("phenotypic_hypergraph: need at least 2 subjects");
    if (k < 1 || k >= n) {
        throw InvalidArgument("phenotypic_hypergraph: k must satisfy 1 <= k < n (k=" + std::to_string(k) + ")");
    }
    const double lo = col.minCoeff(), hi = col.maxCoeff();
    if (lo == hi) {
        out.warnings.push_back("measure '" + measure.name + "' is constant; emitting one edge over all subjects");
        std::vector<Index> all(n);
        std::iota(all.begin(), all.end(), Index{0});
        edges.push_back({all, 1.0, std::vector<double>(n, 1.0)});
        out.hypergraph = Hypergraph(n, std::move(edges));
        return out;
    }
    std::set<std::vector<Index>> seen;
    std::vector<Index> order;
    for (Index j = 0; j < n; ++j) {
        order.resize(n);
        std::iota(order.begin(), order.end(), Index{0});
        order.erase(order.begin() + static_cast<std::ptrdiff_t>(j));
        const double vj = col(static_cast<Eigen::Index>(j), 0);
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                          [&](Index a, Index b) {
                              const double da = std::abs(col(static_cast<Eigen::Index>(a), 0) - vj);
                              const double db = std::abs(col(static_cast<Eigen::Index>(b), 0) - vj);
                              return da < db || (da == db && a < b);
                          });
        std::vector<Index> verts(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
        verts.push_back(j);
        std::sort(verts.begin(), verts.end());
        if (!seen.insert(verts).second) continue;
        edges.push_back({verts, 1.0, std::vector<double>(verts.size(), 1.0)});
    }
    out.hypergraph = Hypergraph(n, std::move(edges));
    return out;
}

}  // namespace hgdiff
