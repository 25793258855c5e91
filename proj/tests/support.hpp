#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "hgdiff/hypergraph.hpp"
#include "hgdiff/tv.hpp"

namespace hgtest {

using hgdiff::HyperEdge;
using hgdiff::Hypergraph;
using hgdiff::Index;

/// Random weighted hypergraph with cardinalities in [cmin, cmax] and weights in [0.5, 2].
inline Hypergraph random_hypergraph(std::size_t n, std::size_t m, std::uint64_t seed, std::size_t cmin = 2,
                                    std::size_t cmax = 4) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> card(cmin, std::min(cmax, n));
    std::uniform_real_distribution<double> weight(0.5, 2.0);
    std::vector<Index> pool(n);
    std::vector<HyperEdge> edges;
    for (std::size_t e = 0; e < m; ++e) {
        std::iota(pool.begin(), pool.end(), Index{0});
        std::shuffle(pool.begin(), pool.end(), rng);
        HyperEdge he;
        he.vertices.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(card(rng)));
        he.weight = weight(rng);
        edges.push_back(std::move(he));
    }
    return Hypergraph(n, std::move(edges));
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, scale);
    std::vector<double> v(n);
    for (double& x : v) x = g(rng);
    return v;
}

inline double prox_objective(const Hypergraph& H, const std::vector<double>& x, const std::vector<double>& z, double t) {
    double q = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) q += 0.5 * (x[i] - z[i]) * (x[i] - z[i]);
    return q + t * hgdiff::tv_h(H, x);
}

/// Primal subgradient method on 0.5||x-z||^2 + t TV_H(x) with step 1/(k+1)
/// and k-weighted averaging (strongly convex rate).
inline std::vector<double> subgradient_prox_oracle(const Hypergraph& H, const std::vector<double>& z, double t,
                                                   std::size_t iters = 400000) {
    const std::size_t n = z.size();
    std::vector<double> x = z, avg(n, 0.0), g(n);
    double wsum = 0.0;
    for (std::size_t k = 1; k <= iters; ++k) {
        for (std::size_t i = 0; i < n; ++i) g[i] = x[i] - z[i];
        for (const auto& e : H.edges()) {
            Index imax = e.vertices[0], imin = e.vertices[0];
            for (Index v : e.vertices) {
                if (x[v] > x[imax]) imax = v;
                if (x[v] < x[imin]) imin = v;
            }
            if (imax != imin) {
                g[imax] += t * e.weight;
                g[imin] -= t * e.weight;
            }
        }
        const double step = 2.0 / (static_cast<double>(k) + 1.0);
        for (std::size_t i = 0; i < n; ++i) x[i] -= step * g[i];
        const double w = static_cast<double>(k);
        wsum += w;
        for (std::size_t i = 0; i < n; ++i) avg[i] += w * (x[i] - avg[i]) / wsum;
    }
    return avg;
}

/// Dykstra's alternating projections onto {sum y = 0} and {sum max(y,0) <= r}.
inline std::vector<double> dykstra_projection(std::vector<double> v, double r, std::size_t iters = 20000) {
    const std::size_t m = v.size();
    std::vector<double> p(m, 0.0), q(m, 0.0), y(m), x = v;
    auto proj_plane = [&](std::vector<double> a) {
        const double mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(m);
        for (double& s : a) s -= mean;
        return a;
    };
    auto proj_cap = [&](std::vector<double> a) {
        double pos = 0.0;
        for (double s : a) pos += std::max(s, 0.0);
        if (pos <= r) return a;
        double lo = 0.0, hi = *std::max_element(a.begin(), a.end());
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            double mass = 0.0;
            for (double s : a) mass += std::max(s - mid, 0.0);
            (mass > r ? lo : hi) = mid;
        }
        for (double& s : a) {
            if (s > 0.0) s = std::max(s - hi, 0.0);
        }
        return a;
    };
    for (std::size_t it = 0; it < iters; ++it) {
        std::vector<double> a(m);
        for (std::size_t i = 0; i < m; ++i) a[i] = x[i] + p[i];
        y = proj_plane(a);
        for (std::size_t i = 0; i < m; ++i) p[i] = a[i] - y[i];
        for (std::size_t i = 0; i < m; ++i) a[i] = y[i] + q[i];
        x = proj_cap(a);
        for (std::size_t i = 0; i < m; ++i) q[i] = a[i] - x[i];
    }
    return x;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace hgtest
