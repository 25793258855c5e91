#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hgdiff/error.hpp"
#include "hgdiff/hypergraph.hpp"
#include "hgdiff/modality.hpp"
#include "hgdiff/tv.hpp"

namespace hgdiff {

/// Parameters of a planted-partition hypergraph benchmark.
struct PlantedSpec {
    std::size_t n = 60;
    int blocks = 2;
    std::size_t min_cardinality = 3;
    std::size_t max_cardinality = 3;
    std::size_t intra_edges_per_block = 0;  ///< 0 selects 2 x block size
    double cross_fraction = 0.05;           ///< share of all edges that straddle blocks
    std::size_t feature_dim = 8;
    double feature_separation = 1.0;        ///< scale of the per-block mean vectors
    double feature_noise = 1.0;             ///< sigma of the per-sample Gaussian noise
    double phenotype_flip = 0.2;
    std::uint64_t seed = 0;

    void validate() const {
        if (blocks < 2) throw InvalidArgument("planted spec: need at least 2 blocks");
        if (n < static_cast<std::size_t>(blocks) * 2) throw InvalidArgument("planted spec: n too small for block count");
        if (min_cardinality < 2 || max_cardinality < min_cardinality) {
            throw InvalidArgument("planted spec: invalid cardinality range");
        }
        if (max_cardinality > n / static_cast<std::size_t>(blocks)) {
            throw InvalidArgument("planted spec: edge cardinality exceeds block size");
        }
        if (!(cross_fraction >= 0.0 && cross_fraction < 1.0)) throw InvalidArgument("planted spec: cross fraction must be in [0,1)");
        if (!(phenotype_flip >= 0.0 && phenotype_flip <= 1.0)) throw InvalidArgument("planted spec: flip probability outside [0,1]");
        if (!(feature_noise >= 0.0)) throw InvalidArgument("planted spec: feature noise must be >= 0");
    }
};

struct PlantedInstance {
    Hypergraph hypergraph;
    ModalityTable features;   ///< Gaussian block-mean features (imaging-embedding stand-in)
    ModalityTable phenotype;  ///< categorical column equal to the block with flips
    std::vector<int> truth;
    std::size_t cross_edges = 0;
};

inline PlantedInstance gen_planted(const PlantedSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    const auto L = static_cast<std::size_t>(spec.blocks);

    std::vector<Index> perm(spec.n);
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> truth(spec.n);
    std::vector<std::vector<Index>> members(L);
    for (std::size_t k = 0; k < spec.n; ++k) truth[perm[k]] = static_cast<int>(k % L);
    for (Index i = 0; i < spec.n; ++i) members[static_cast<std::size_t>(truth[i])].push_back(i);

    std::uniform_int_distribution<std::size_t> card_dist(spec.min_cardinality, spec.max_cardinality);
    auto sample_from = [&](const std::vector<Index>& pool, std::size_t count, std::vector<Index>& out) {
        // Partial Fisher-Yates over a copy of the pool, skipping anything already in out.
        std::vector<Index> avail;
        for (Index v : pool) {
            if (std::find(out.begin(), out.end(), v) == out.end()) avail.push_back(v);
        }
        for (std::size_t k = 0; k < count; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, avail.size() - 1);
            std::swap(avail[k], avail[pick(rng)]);
            out.push_back(avail[k]);
        }
    };

    std::vector<HyperEdge> edges;
    for (std::size_t b = 0; b < L; ++b) {
        const std::size_t count = spec.intra_edges_per_block ? spec.intra_edges_per_block : 2 * members[b].size();
        std::vector<Index> cover = members[b];
        std::shuffle(cover.begin(), cover.end(), rng);
        for (std::size_t j = 0; j < count; ++j) {
            HyperEdge e;
            e.vertices.push_back(cover[j % cover.size()]);  // guarantees every vertex is covered
            sample_from(members[b], card_dist(rng) - 1, e.vertices);
            edges.push_back(std::move(e));
        }
    }
    const std::size_t intra = edges.size();
    const auto cross = static_cast<std::size_t>(
        std::llround(spec.cross_fraction * static_cast<double>(intra) / (1.0 - spec.cross_fraction)));
    std::uniform_int_distribution<std::size_t> block_dist(0, L - 1);
    for (std::size_t j = 0; j < cross; ++j) {
        const std::size_t b1 = block_dist(rng);
        std::size_t b2 = block_dist(rng);
        while (b2 == b1) b2 = block_dist(rng);
        const std::size_t k = card_dist(rng);
        std::uniform_int_distribution<std::size_t> split_dist(1, k - 1);
        const std::size_t from_first = split_dist(rng);
        HyperEdge e;
        sample_from(members[b1], from_first, e.vertices);
        sample_from(members[b2], k - from_first, e.vertices);
        edges.push_back(std::move(e));
    }
    for (auto& e : edges) e.incidence.assign(e.vertices.size(), 1.0);

    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto p = static_cast<Eigen::Index>(spec.feature_dim);
    Eigen::MatrixXd means(static_cast<Eigen::Index>(L), p);
    for (Eigen::Index b = 0; b < means.rows(); ++b) {
        for (Eigen::Index j = 0; j < p; ++j) means(b, j) = spec.feature_separation * gauss(rng);
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(spec.n), p);
    for (Index i = 0; i < spec.n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            x(static_cast<Eigen::Index>(i), j) = means(truth[i], j) + spec.feature_noise * gauss(rng);
        }
    }

    std::bernoulli_distribution flip(spec.phenotype_flip);
    std::uniform_int_distribution<int> other(0, spec.blocks - 2);
    std::vector<int> codes(spec.n);
    for (Index i = 0; i < spec.n; ++i) {
        codes[i] = truth[i];
        if (flip(rng)) {
            const int o = other(rng);
            codes[i] = o >= truth[i] ? o + 1 : o;
        }
    }

    PlantedInstance inst{Hypergraph(spec.n, std::move(edges)), ModalityTable::imaging("features", std::move(x)),
                         ModalityTable::phenotypic_categorical("category", codes), std::move(truth), cross};
    return inst;
}

/// Picks a stratified labeled subset: `per_class` nodes of each class, or, when
/// `fraction` > 0, round(fraction * class size) nodes (at least one) per class.
inline LabelState choose_labels(const std::vector<int>& truth, int num_classes, std::size_t per_class,
                                double fraction, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    LabelState state(truth.size(), num_classes);
    for (int c = 0; c < num_classes; ++c) {
        std::vector<Index> pool;
        for (Index i = 0; i < truth.size(); ++i) {
            if (truth[i] == c) pool.push_back(i);
        }
        if (pool.empty()) throw InvalidArgument("choose_labels: class " + std::to_string(c) + " has no members");
        std::size_t take = per_class;
        if (fraction > 0.0) {
            take = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pool.size()))));
        }
        take = std::min(take, pool.size());
        std::shuffle(pool.begin(), pool.end(), rng);
        for (std::size_t k = 0; k < take; ++k) state.set_given(pool[k], c);
    }
    return state;
}

/// Rayleigh ratio of a two-sided indicator. The +-1 vector is first made
/// d-orthogonal by subtracting the constant <d,b>/sum(d), which leaves TV_H
/// untouched, then measured in the chosen norm (so the weighted 1-norm case
/// gives the balanced cut  cut * vol / (2 vol+ vol-)).
inline double indicator_ratio(const Hypergraph& H, const std::vector<char>& positive,
                              NormKind norm = NormKind::WeightedL1) {
    const std::size_t n = H.num_vertices();
    if (positive.size() != n) throw InvalidArgument("indicator_ratio: length mismatch");
    const auto& d = H.degrees();
    Vec b(n);
    double db = 0.0, dsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        b[i] = positive[i] ? 1.0 : -1.0;
        db += d[i] * b[i];
        dsum += d[i];
    }
    if (dsum == 0.0) throw InvalidArgument("indicator_ratio: hypergraph has no edges");
    const double shift = db / dsum;
    for (double& v : b) v -= shift;
    const double denom = weighted_norm(b, d, norm);
    if (denom == 0.0) return std::numeric_limits<double>::infinity();
    return tv_h(H, b) / denom;
}

struct OracleResult {
    std::vector<char> positive;  ///< side containing vertex 0
    double ratio = 0.0;
};

/// Exhaustive minimum of indicator_ratio over all non-trivial bipartitions.
inline OracleResult brute_force_best_ratio(const Hypergraph& H, NormKind norm = NormKind::WeightedL1) {
    const std::size_t n = H.num_vertices();
    if (n > 16) throw InvalidArgument("brute_force_best_ratio: n > 16 is refused");
    if (n < 2) throw InvalidArgument("brute_force_best_ratio: need at least 2 vertices");
    OracleResult best;
    best.ratio = std::numeric_limits<double>::infinity();
    std::vector<char> side(n);
    // Vertex 0 is pinned to the positive side; the ratio is invariant under b -> -b.
    const std::uint32_t count = 1u << (n - 1);
    for (std::uint32_t mask = 0; mask + 1 < count; ++mask) {
        side[0] = 1;
        for (std::size_t i = 1; i < n; ++i) side[i] = (mask >> (i - 1)) & 1u;
        const double r = indicator_ratio(H, side, norm);
        if (r < best.ratio) {
            best.ratio = r;
            best.positive = side;
        }
    }
    return best;
}

}  // namespace hgdiff
