#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hgdiff/construct.hpp"
#include "hgdiff/error.hpp"
#include "hgdiff/hypergraph.hpp"
#include "hgdiff/modality.hpp"

namespace hgdiff {

inline double cosine_sim(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidArgument("cosine_sim: length mismatch");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) throw InvalidArgument("cosine_sim: zero vector");
    return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

struct NTXentResult {
    double loss = 0.0;
    Eigen::MatrixXd grad;  ///< 2n x p: rows 0..n-1 for view_a, n..2n-1 for view_b
};

/**
 * NT-Xent over two views. The 2n rows are pooled; anchor r's positive is the
 * same sample in the other view and its softmax runs over all 2n-1 other rows:
 *   loss = 1/(2n) sum_r -log( exp(f(r,pos)/tau) / sum_{k != r} exp(f(r,k)/tau) )
 * with f the cosine similarity. The gradient is taken through the cosine, so
 * it is exact for rows of any nonzero norm.
 */
inline NTXentResult ntxent_loss(const Eigen::MatrixXd& view_a, const Eigen::MatrixXd& view_b, double tau) {
    if (!(tau > 0.0)) throw InvalidArgument("ntxent_loss: temperature must be > 0");
    if (view_a.rows() != view_b.rows() || view_a.cols() != view_b.cols()) {
        throw InvalidArgument("ntxent_loss: view shapes differ");
    }
    const Eigen::Index n = view_a.rows();
    if (n < 2) throw InvalidArgument("ntxent_loss: need at least 2 samples");
    const Eigen::Index m = 2 * n;
    Eigen::MatrixXd Z(m, view_a.cols());
    Z << view_a, view_b;

    Eigen::VectorXd norms = Z.rowwise().norm();
    for (Eigen::Index r = 0; r < m; ++r) {
        if (norms(r) == 0.0) throw InvalidArgument("ntxent_loss: zero embedding row " + std::to_string(r));
    }
    Eigen::MatrixXd Zn = Z.array().colwise() / norms.array();
    Eigen::MatrixXd S = Zn * Zn.transpose();

    // G(r,k) = d loss / d S(r,k) counting S(r,k) as an entry of row r only.
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(m, m);
    double total = 0.0;
    for (Eigen::Index r = 0; r < m; ++r) {
        const Eigen::Index pos = r < n ? r + n : r - n;
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < m; ++k) {
            if (k != r) mx = std::max(mx, S(r, k) / tau);
        }
        double denom = 0.0;
        for (Eigen::Index k = 0; k < m; ++k) {
            if (k != r) denom += std::exp(S(r, k) / tau - mx);
        }
        total += -S(r, pos) / tau + mx + std::log(denom);
        for (Eigen::Index k = 0; k < m; ++k) {
            if (k == r) continue;
            const double p = std::exp(S(r, k) / tau - mx) / denom;
            G(r, k) = (p - (k == pos ? 1.0 : 0.0)) / (tau * static_cast<double>(m));
        }
    }

    NTXentResult out;
    out.loss = total / static_cast<double>(m);
    const Eigen::MatrixXd Gs = G + G.transpose();
    // d cos(z_r, z_k) / d z_r = zn_k / |z_r| - cos * zn_r / |z_r|
    Eigen::MatrixXd dZn = Gs * Zn;
    out.grad.resize(m, Z.cols());
    for (Eigen::Index r = 0; r < m; ++r) {
        const double radial = (Gs.row(r).array() * S.row(r).array()).sum();
        out.grad.row(r) = (dZn.row(r) - radial * Zn.row(r)) / norms(r);
    }
    return out;
}

struct AugmentPolicy {
    double feature_noise_sigma = 0.1;
    double feature_mask_prob = 0.1;
    double node_drop_prob = 0.1;
    double edge_perturb_ratio = 0.1;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(feature_noise_sigma >= 0.0)) throw InvalidArgument("augment policy: noise sigma must be >= 0");
        auto in01 = [](double p) { return p >= 0.0 && p <= 1.0; };
        if (!in01(feature_mask_prob)) throw InvalidArgument("augment policy: mask probability outside [0,1]");
        if (!in01(node_drop_prob)) throw InvalidArgument("augment policy: node drop probability outside [0,1]");
        if (!in01(edge_perturb_ratio)) throw InvalidArgument("augment policy: edge perturb ratio outside [0,1]");
    }
};

/// X + N(0, sigma^2) noise, then each coordinate zeroed with mask_prob. Draws
/// come from `rng` in row-major order, noise before mask for each entry.
inline Eigen::MatrixXd augment_features(const Eigen::MatrixXd& X, const AugmentPolicy& policy, std::mt19937_64& rng) {
    policy.validate();
    std::normal_distribution<double> noise(0.0, 1.0);
    std::bernoulli_distribution mask(policy.feature_mask_prob);
    Eigen::MatrixXd out = X;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            double v = X(i, j);
            if (policy.feature_noise_sigma > 0.0) v += policy.feature_noise_sigma * noise(rng);
            if (policy.feature_mask_prob > 0.0 && mask(rng)) v = 0.0;
            out(i, j) = v;
        }
    }
    return out;
}

inline Eigen::MatrixXd augment_features(const Eigen::MatrixXd& X, const AugmentPolicy& policy) {
    std::mt19937_64 rng(policy.seed);
    return augment_features(X, policy, rng);
}

/**
 * Node dropping then edge perturbation. Each vertex is dropped with
 * node_drop_prob (one draw per vertex, in index order) and removed from every
 * edge; edges left with fewer than 2 members disappear. Then
 * round(edge_perturb_ratio * surviving edges) edges, chosen uniformly, each
 * get one uniformly chosen member replaced by a uniformly chosen vertex that
 * is neither a member nor dropped. Weights and incidence slots are kept.
 */
inline Hypergraph augment_hypergraph(const Hypergraph& H, const AugmentPolicy& policy, std::mt19937_64& rng) {
    policy.validate();
    const std::size_t n = H.num_vertices();
    std::bernoulli_distribution drop(policy.node_drop_prob);
    std::vector<char> dropped(n, 0);
    for (std::size_t i = 0; i < n; ++i) dropped[i] = policy.node_drop_prob > 0.0 && drop(rng) ? 1 : 0;

    std::vector<HyperEdge> edges;
    for (const auto& e : H.edges()) {
        HyperEdge kept;
        kept.weight = e.weight;
        for (std::size_t k = 0; k < e.vertices.size(); ++k) {
            if (dropped[e.vertices[k]]) continue;
            kept.vertices.push_back(e.vertices[k]);
            kept.incidence.push_back(e.incidence[k]);
        }
        if (kept.vertices.size() >= 2) edges.push_back(std::move(kept));
    }
    if (edges.empty()) throw InvalidArgument("augmentation destroyed hypergraph");

    const auto perturb = static_cast<std::size_t>(std::llround(policy.edge_perturb_ratio * static_cast<double>(edges.size())));
    if (perturb > 0) {
        std::vector<std::size_t> pick(edges.size());
        std::iota(pick.begin(), pick.end(), std::size_t{0});
        for (std::size_t k = 0; k < perturb; ++k) {
            std::uniform_int_distribution<std::size_t> u(k, pick.size() - 1);
            std::swap(pick[k], pick[u(rng)]);
        }
        std::vector<Index> candidates;
        for (std::size_t k = 0; k < perturb; ++k) {
            auto& e = edges[pick[k]];
            candidates.clear();
            for (Index v = 0; v < n; ++v) {
                if (!dropped[v] && std::find(e.vertices.begin(), e.vertices.end(), v) == e.vertices.end()) {
                    candidates.push_back(v);
                }
            }
            if (candidates.empty()) continue;
            std::uniform_int_distribution<std::size_t> slot(0, e.vertices.size() - 1);
            std::uniform_int_distribution<std::size_t> repl(0, candidates.size() - 1);
            const std::size_t s = slot(rng);
            e.vertices[s] = candidates[repl(rng)];
        }
    }
    return Hypergraph(n, std::move(edges));
}

inline Hypergraph augment_hypergraph(const Hypergraph& H, const AugmentPolicy& policy) {
    std::mt19937_64 rng(policy.seed);
    return augment_hypergraph(H, policy, rng);
}

/// Affine encoder h = W x + b followed by row normalisation.
struct EncoderParams {
    Eigen::MatrixXd W;  ///< p' x p
    Eigen::VectorXd b;  ///< p'
    double tau = 0.5;
    double step_size = 0.5;
    std::size_t steps = 200;

    void validate(Eigen::Index input_dim) const {
        if (!(tau > 0.0)) throw InvalidArgument("encoder: temperature must be > 0");
        if (!(step_size > 0.0)) throw InvalidArgument("encoder: step size must be > 0");
        if (W.cols() != input_dim) throw InvalidArgument("encoder: weight matrix does not match input dimension");
        if (b.size() != W.rows()) throw InvalidArgument("encoder: bias length does not match output dimension");
    }

    /// W with N(0, 1/p) entries and zero bias.
    static EncoderParams random(Eigen::Index input_dim, Eigen::Index output_dim, std::uint64_t seed) {
        if (input_dim < 1 || output_dim < 1) throw InvalidArgument("encoder: dimensions must be >= 1");
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(static_cast<double>(input_dim)));
        EncoderParams p;
        p.W.resize(output_dim, input_dim);
        for (Eigen::Index i = 0; i < output_dim; ++i) {
            for (Eigen::Index j = 0; j < input_dim; ++j) p.W(i, j) = g(rng);
        }
        p.b = Eigen::VectorXd::Zero(output_dim);
        return p;
    }
};

inline Eigen::MatrixXd encode_raw(const Eigen::MatrixXd& X, const EncoderParams& p) {
    return (X * p.W.transpose()).rowwise() + p.b.transpose();
}

inline Eigen::MatrixXd encode(const Eigen::MatrixXd& X, const EncoderParams& p) {
    return normalize_rows(encode_raw(X, p));
}

struct EncoderResult {
    EncoderParams params;
    Eigen::MatrixXd embeddings;        ///< n x p', unit rows
    std::vector<double> loss_history;  ///< loss of each step's batch before its update
    double first_batch_initial = 0.0;  ///< step-0 batch loss with the initial parameters
    double first_batch_final = 0.0;    ///< step-0 batch loss with the trained parameters
};

/// Full-batch gradient descent on NT-Xent between two fresh feature-level
/// augmentations per step; draws come from policy.seed.
inline EncoderResult train_encoder(const ModalityTable& X, const AugmentPolicy& policy, EncoderParams params) {
    X.validate();
    if (X.kind != ModalityKind::ImagingEmbedding) throw InvalidArgument("train_encoder: modality is not an embedding");
    if (X.rows() < 2) throw InvalidArgument("train_encoder: need at least 2 rows");
    policy.validate();
    params.validate(X.features.cols());
    std::mt19937_64 rng(policy.seed);

    EncoderResult out;
    Eigen::MatrixXd first_a, first_b;
    const Eigen::Index n = X.features.rows();
    for (std::size_t step = 0; step < params.steps; ++step) {
        Eigen::MatrixXd xa = augment_features(X.features, policy, rng);
        Eigen::MatrixXd xb = augment_features(X.features, policy, rng);
        auto res = ntxent_loss(encode_raw(xa, params), encode_raw(xb, params), params.tau);
        if (!std::isfinite(res.loss) || !res.grad.allFinite()) {
            throw NumericalError("encoder diverged at step " + std::to_string(step));
        }
        if (step == 0) {
            first_a = xa;
            first_b = xb;
            out.first_batch_initial = res.loss;
        }
        out.loss_history.push_back(res.loss);
        const auto ga = res.grad.topRows(n);
        const auto gb = res.grad.bottomRows(n);
        const Eigen::MatrixXd gW = ga.transpose() * xa + gb.transpose() * xb;
        const Eigen::VectorXd gbias = (ga.colwise().sum() + gb.colwise().sum()).transpose();
        params.W -= params.step_size * gW;
        params.b -= params.step_size * gbias;
        if (!params.W.allFinite() || !params.b.allFinite()) {
            throw NumericalError("encoder diverged at step " + std::to_string(step));
        }
    }
    if (params.steps > 0) {
        out.first_batch_final = ntxent_loss(encode_raw(first_a, params), encode_raw(first_b, params), params.tau).loss;
    }
    out.embeddings = encode(X.features, params);
    out.params = std::move(params);
    return out;
}

}  // namespace hgdiff
