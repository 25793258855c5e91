#include <gtest/gtest.h>

#include <set>

#include "hgdiff/metrics.hpp"
#include "hgdiff/synth.hpp"
#include "support.hpp"

using namespace hgdiff;

namespace {

double balanced_cut(const Hypergraph& H, const std::vector<char>& side) {
    double cut = 0.0, vol_pos = 0.0, vol_neg = 0.0;
    for (const auto& e : H.edges()) {
        std::set<char> s;
        for (Index v : e.vertices) s.insert(side[v]);
        if (s.size() == 2) cut += e.weight;
    }
    for (std::size_t i = 0; i < side.size(); ++i) (side[i] ? vol_pos : vol_neg) += H.degrees()[i];
    return cut * (vol_pos + vol_neg) / (2.0 * vol_pos * vol_neg);
}

}  // namespace

TEST(Planted, ZeroCrossGivesDisconnectedBlocks) {
    for (int L : {2, 3, 4}) {
        PlantedSpec spec;
        spec.blocks = L;
        spec.cross_fraction = 0.0;
        spec.seed = static_cast<std::uint64_t>(L);
        auto inst = gen_planted(spec);
        auto comp = inst.hypergraph.components();
        EXPECT_GE(std::set<std::size_t>(comp.begin(), comp.end()).size(), static_cast<std::size_t>(L));
        for (const auto& e : inst.hypergraph.edges()) {
            for (Index v : e.vertices) EXPECT_EQ(inst.truth[v], inst.truth[e.vertices[0]]);
        }
        EXPECT_EQ(inst.cross_edges, 0u);
    }
}

TEST(Planted, DeterministicPerSeed) {
    PlantedSpec spec;
    spec.seed = 17;
    auto a = gen_planted(spec), b = gen_planted(spec);
    EXPECT_EQ(a.truth, b.truth);
    ASSERT_EQ(a.hypergraph.num_edges(), b.hypergraph.num_edges());
    for (std::size_t e = 0; e < a.hypergraph.num_edges(); ++e) {
        EXPECT_EQ(a.hypergraph.edge(e).vertices, b.hypergraph.edge(e).vertices);
    }
    EXPECT_EQ(a.features.features, b.features.features);
    EXPECT_EQ(a.phenotype.features, b.phenotype.features);
    spec.seed = 18;
    auto c = gen_planted(spec);
    EXPECT_NE(a.truth, c.truth);
}

TEST(Planted, CrossFractionAndBalance) {
    PlantedSpec spec;
    spec.blocks = 4;
    auto inst = gen_planted(spec);
    std::size_t cross = 0;
    for (const auto& e : inst.hypergraph.edges()) {
        std::set<int> blocks;
        for (Index v : e.vertices) blocks.insert(inst.truth[v]);
        cross += blocks.size() > 1;
    }
    EXPECT_EQ(cross, inst.cross_edges);
    EXPECT_NEAR(static_cast<double>(cross) / static_cast<double>(inst.hypergraph.num_edges()), 0.05, 0.01);
    std::vector<int> sizes(4, 0);
    for (int t : inst.truth) ++sizes[static_cast<std::size_t>(t)];
    for (int s : sizes) EXPECT_EQ(s, 15);
    for (double d : inst.hypergraph.degrees()) EXPECT_GT(d, 0.0);
}

TEST(Planted, InfeasibleSpecsRejected) {
    PlantedSpec spec;
    spec.n = 6;
    spec.blocks = 3;
    spec.max_cardinality = 3;
    EXPECT_THROW(gen_planted(spec), InvalidArgument);
    spec = PlantedSpec{};
    spec.blocks = 1;
    EXPECT_THROW(gen_planted(spec), InvalidArgument);
    spec = PlantedSpec{};
    spec.cross_fraction = 1.0;
    EXPECT_THROW(gen_planted(spec), InvalidArgument);
}

TEST(ChooseLabels, StratifiedCounts) {
    std::vector<int> truth = {0, 1, 0, 1, 0, 1, 2, 2, 2, 2};
    auto a = choose_labels(truth, 3, 2, 0.0, 1);
    EXPECT_EQ(a.count(LabelStatus::Given), 6u);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (a.is_given(i)) {
            EXPECT_EQ(a[i].cls, truth[i]);
        }
    }
    auto b = choose_labels(truth, 3, 0, 0.1, 1);
    EXPECT_EQ(b.count(LabelStatus::Given), 3u);
}

TEST(Oracle, DisjointEdgesGiveZero) {
    auto H = build_hypergraph({HyperEdge{{0, 1}, 1.0, {}}, HyperEdge{{2, 3}, 1.0, {}}}, 4);
    auto r = brute_force_best_ratio(H);
    EXPECT_EQ(r.ratio, 0.0);
    EXPECT_EQ(r.positive, (std::vector<char>{1, 1, 0, 0}));
}

TEST(Oracle, TriangleAllSplitsEqual) {
    auto H = build_hypergraph({HyperEdge{{0, 1}, 1.0, {}}, HyperEdge{{1, 2}, 1.0, {}}, HyperEdge{{0, 2}, 1.0, {}}}, 3);
    auto r = brute_force_best_ratio(H);
    // each split cuts 2 of 3 edges with vol 6 = 2 + 4
    EXPECT_NEAR(r.ratio, 2.0 * 6.0 / (2.0 * 2.0 * 4.0), 1e-15);
    for (std::vector<char> side : {std::vector<char>{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}) {
        EXPECT_NEAR(indicator_ratio(H, side), r.ratio, 1e-15);
    }
}

TEST(Oracle, MatchesClosedFormEnumeration) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto H = hgtest::random_hypergraph(8, 12, 300 + s);
        double best = std::numeric_limits<double>::infinity();
        for (unsigned mask = 1; mask < 255; ++mask) {
            std::vector<char> side(8);
            for (std::size_t i = 0; i < 8; ++i) side[i] = (mask >> i) & 1u;
            best = std::min(best, balanced_cut(H, side));
        }
        auto r = brute_force_best_ratio(H);
        EXPECT_NEAR(r.ratio, best, 1e-12 * best);
        EXPECT_EQ(r.positive[0], 1);
        EXPECT_NEAR(indicator_ratio(H, r.positive), r.ratio, 1e-15);
    }
}

TEST(Oracle, NotBeatenByRandomPartitions) {
    auto H = hgtest::random_hypergraph(8, 12, 42);
    const double best = brute_force_best_ratio(H).ratio;
    std::mt19937_64 rng(7);
    std::bernoulli_distribution coin(0.5);
    for (int t = 0; t < 1000; ++t) {
        std::vector<char> side(8);
        for (auto& c : side) c = coin(rng);
        if (std::count(side.begin(), side.end(), 1) % 8 == 0) continue;
        EXPECT_GE(indicator_ratio(H, side), best - 1e-12);
    }
}

TEST(Oracle, SizeLimits) {
    EXPECT_THROW(brute_force_best_ratio(hgtest::random_hypergraph(17, 20, 1)), InvalidArgument);
    EXPECT_NO_THROW(brute_force_best_ratio(hgtest::random_hypergraph(12, 20, 1)));
}

TEST(Metrics, Perfect) {
    auto r = metrics({0, 1, 1, 0, 2}, {0, 1, 1, 0, 2}, 1);
    EXPECT_EQ(*r.acc, 1.0);
    EXPECT_EQ(*r.sen, 1.0);
    EXPECT_EQ(*r.ppv, 1.0);
    EXPECT_EQ(*r.error_rate, 0.0);
}

TEST(Metrics, AllNegativePredictions) {
    auto r = metrics({1, 1, 0, 0}, {0, 0, 0, 0}, 1);
    EXPECT_EQ(*r.sen, 0.0);
    EXPECT_FALSE(r.ppv.has_value());
    EXPECT_EQ(format_rate(r.ppv), "undefined");
    EXPECT_EQ(*r.acc, 0.5);
}

TEST(Metrics, HandExample) {
    auto r = metrics({1, 1, 0, 0}, {1, 0, 0, 1}, 1);
    EXPECT_EQ(*r.acc, 0.5);
    EXPECT_EQ(*r.sen, 0.5);
    EXPECT_EQ(*r.ppv, 0.5);
}

TEST(Metrics, PermutationInvariant) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> cls(0, 2);
    std::vector<int> t(50), p(50);
    for (std::size_t i = 0; i < 50; ++i) {
        t[i] = cls(rng);
        p[i] = cls(rng);
    }
    auto base = metrics(t, p, 2);
    std::vector<std::size_t> idx(50);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<int> t2(50), p2(50);
    for (std::size_t i = 0; i < 50; ++i) {
        t2[i] = t[idx[i]];
        p2[i] = p[idx[i]];
    }
    auto perm = metrics(t2, p2, 2);
    EXPECT_EQ(base.acc, perm.acc);
    EXPECT_EQ(base.sen_per_class, perm.sen_per_class);
    EXPECT_EQ(base.ppv_per_class, perm.ppv_per_class);
}

TEST(Metrics, Rejections) {
    EXPECT_THROW(metrics({0, 1}, {0}, 1), InvalidArgument);
    EXPECT_THROW(metrics({0, -1}, {0, 1}, 1), InvalidArgument);
}

TEST(MeanCI, KnownValues) {
    auto one = mean_ci({0.7});
    EXPECT_EQ(one.mean, 0.7);
    EXPECT_EQ(one.half_width, 0.0);
    auto r = mean_ci({1.0, 2.0, 3.0, 4.0});
    EXPECT_DOUBLE_EQ(r.mean, 2.5);
    EXPECT_NEAR(r.half_width, 1.96 * std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
    EXPECT_THROW(mean_ci({}), InvalidArgument);
}
