#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hgdiff/error.hpp"

namespace hgdiff {

using Index = std::size_t;

/// One weighted hyperedge. `incidence[k]` is the (nonnegative) incidence value
/// of `vertices[k]`; membership is what counts for total variation, the values
/// are kept for construction-time weighting and serialization.
struct HyperEdge {
    std::vector<Index> vertices;
    double weight = 1.0;
    std::vector<double> incidence;

    std::size_t cardinality() const { return vertices.size(); }
};

/**
 * Immutable weighted hypergraph over vertices 0..n-1.
 *
 * Invariants (checked on construction):
 *  - every edge has cardinality >= 2 and distinct, in-range vertices;
 *  - every weight is finite and > 0;
 *  - incidence values are finite and > 0 for members;
 *  - degree(i) is the sum of w_e over the edges containing i.
 *
 * An edge-free hypergraph is representable (see `Hypergraph::empty`) because
 * some constructions legitimately produce nothing; `build_hypergraph` rejects
 * it as user input.
 */
class Hypergraph {
public:
    Hypergraph() = default;

    Hypergraph(std::size_t n, std::vector<HyperEdge> edges) : n_(n), edges_(std::move(edges)) {
        for (std::size_t e = 0; e < edges_.size(); ++e) {
            validate_edge(edges_[e], e);
        }
        recompute();
    }

    static Hypergraph empty(std::size_t n) { return Hypergraph(n, {}); }

    std::size_t num_vertices() const { return n_; }
    std::size_t num_edges() const { return edges_.size(); }
    const std::vector<HyperEdge>& edges() const { return edges_; }
    const HyperEdge& edge(std::size_t e) const { return edges_[e]; }
    const std::vector<double>& degrees() const { return degrees_; }

    /// Number of edges containing each vertex (unweighted).
    const std::vector<std::size_t>& edge_counts() const { return edge_counts_; }

    /// Edge ids incident to vertex i.
    std::span<const std::size_t> incident_edges(Index i) const {
        return {incident_.data() + incident_offsets_[i], incident_offsets_[i + 1] - incident_offsets_[i]};
    }

    std::vector<std::size_t> edge_cardinalities() const {
        std::vector<std::size_t> out;
        out.reserve(edges_.size());
        for (const auto& e : edges_) out.push_back(e.cardinality());
        return out;
    }

    /// Re-derives degrees from scratch and compares against the cached vector.
    bool degrees_consistent(double rel_tol = 1e-12) const {
        std::vector<double> d(n_, 0.0);
        for (const auto& e : edges_) {
            for (Index v : e.vertices) d[v] += e.weight;
        }
        for (std::size_t i = 0; i < n_; ++i) {
            if (std::abs(d[i] - degrees_[i]) > rel_tol * std::max(1.0, std::abs(d[i]))) return false;
        }
        return true;
    }

    /// Hop distance (number of hyperedges traversed) from the nearest source;
    /// unreachable vertices get SIZE_MAX.
    std::vector<std::size_t> hop_distances(std::span<const Index> sources) const {
        constexpr auto inf = std::numeric_limits<std::size_t>::max();
        std::vector<std::size_t> dist(n_, inf);
        std::vector<char> edge_seen(edges_.size(), 0);
        std::queue<Index> frontier;
        for (Index s : sources) {
            if (dist[s] != 0) {
                dist[s] = 0;
                frontier.push(s);
            }
        }
        while (!frontier.empty()) {
            Index v = frontier.front();
            frontier.pop();
            for (std::size_t e : incident_edges(v)) {
                if (edge_seen[e]) continue;
                edge_seen[e] = 1;
                for (Index w : edges_[e].vertices) {
                    if (dist[w] == inf) {
                        dist[w] = dist[v] + 1;
                        frontier.push(w);
                    }
                }
            }
        }
        return dist;
    }

    /// Connected component id per vertex (isolated vertices get their own id).
    std::vector<std::size_t> components() const {
        constexpr auto unset = std::numeric_limits<std::size_t>::max();
        std::vector<std::size_t> comp(n_, unset);
        std::size_t next = 0;
        for (Index s = 0; s < n_; ++s) {
            if (comp[s] != unset) continue;
            Index src[] = {s};
            auto dist = hop_distances(src);
            for (Index v = 0; v < n_; ++v) {
                if (dist[v] != unset) comp[v] = next;
            }
            ++next;
        }
        return comp;
    }

private:
    void validate_edge(HyperEdge& e, std::size_t idx) const {
        const std::string where = "edge " + std::to_string(idx);
        if (e.vertices.size() < 2) throw InvalidArgument(where + ": cardinality must be >= 2");
        if (!(std::isfinite(e.weight) && e.weight > 0.0)) throw InvalidArgument(where + ": weight must be > 0");
        if (e.incidence.empty()) e.incidence.assign(e.vertices.size(), 1.0);
        if (e.incidence.size() != e.vertices.size()) {
            throw InvalidArgument(where + ": incidence values do not match member count");
        }
        std::vector<Index> sorted = e.vertices;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            throw InvalidArgument(where + ": duplicate vertex");
        }
        if (sorted.back() >= n_) throw InvalidArgument(where + ": vertex index out of range");
        for (double h : e.incidence) {
            if (!(std::isfinite(h) && h > 0.0)) throw InvalidArgument(where + ": incidence values must be > 0");
        }
    }

    void recompute() {
        degrees_.assign(n_, 0.0);
        edge_counts_.assign(n_, 0);
        for (const auto& e : edges_) {
            for (Index v : e.vertices) {
                degrees_[v] += e.weight;
                ++edge_counts_[v];
            }
        }
        incident_offsets_.assign(n_ + 1, 0);
        for (std::size_t i = 0; i < n_; ++i) incident_offsets_[i + 1] = incident_offsets_[i] + edge_counts_[i];
        incident_.assign(incident_offsets_.back(), 0);
        std::vector<std::size_t> fill(incident_offsets_.begin(), incident_offsets_.end() - 1);
        for (std::size_t e = 0; e < edges_.size(); ++e) {
            for (Index v : edges_[e].vertices) incident_[fill[v]++] = e;
        }
    }

    std::size_t n_ = 0;
    std::vector<HyperEdge> edges_;
    std::vector<double> degrees_;
    std::vector<std::size_t> edge_counts_;
    std::vector<std::size_t> incident_offsets_{0};
    std::vector<std::size_t> incident_;
};

/// Validating factory for user-supplied edge lists; rejects an empty list.
inline Hypergraph build_hypergraph(std::vector<HyperEdge> edges, std::size_t n) {
    if (edges.empty()) throw InvalidArgument("build_hypergraph: empty edge list");
    return Hypergraph(n, std::move(edges));
}

/// Ordered union of the parts' edges; duplicates are kept.
inline Hypergraph concat_hypergraphs(std::span<const Hypergraph> parts) {
    if (parts.empty()) throw InvalidArgument("concat_hypergraphs: no parts");
    const std::size_t n = parts.front().num_vertices();
    std::vector<HyperEdge> edges;
    for (const auto& p : parts) {
        if (p.num_vertices() != n) {
            throw InvalidArgument("concat_hypergraphs: vertex count mismatch (" + std::to_string(n) + " vs " +
                                  std::to_string(p.num_vertices()) + ")");
        }
        edges.insert(edges.end(), p.edges().begin(), p.edges().end());
    }
    return Hypergraph(n, std::move(edges));
}

inline Hypergraph concat_hypergraphs(std::initializer_list<Hypergraph> parts) {
    return concat_hypergraphs(std::span<const Hypergraph>(parts.begin(), parts.size()));
}

// JSON form: {"n": 3, "edges": [{"verts": [0,1], "w": 1.0, "h": [1.0, 1.0]}]}
inline nlohmann::json to_json(const Hypergraph& H) {
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : H.edges()) {
        edges.push_back({{"verts", e.vertices}, {"w", e.weight}, {"h", e.incidence}});
    }
    return {{"n", H.num_vertices()}, {"edges", std::move(edges)}};
}

inline Hypergraph hypergraph_from_json(const nlohmann::json& j) {
    try {
        const auto n = j.at("n").get<std::size_t>();
        std::vector<HyperEdge> edges;
        for (const auto& je : j.at("edges")) {
            HyperEdge e;
            e.vertices = je.at("verts").get<std::vector<Index>>();
            e.weight = je.at("w").get<double>();
            if (je.contains("h")) e.incidence = je.at("h").get<std::vector<double>>();
            edges.push_back(std::move(e));
        }
        return Hypergraph(n, std::move(edges));
    } catch (const nlohmann::json::exception& ex) {
        throw InvalidArgument(std::string("hypergraph json: ") + ex.what());
    }
}

}  // namespace hgdiff
