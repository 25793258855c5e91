#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hgdiff/error.hpp"
#include "hgdiff/flow.hpp"
#include "hgdiff/hypergraph.hpp"
#include "hgdiff/modality.hpp"

namespace hgdiff {

struct UncertaintyWeights {
    std::vector<double> gamma;
    std::vector<double> entropy;
};

/// A row with negative entries is shifted by its minimum so it becomes
/// nonnegative; rows are then normalised to the simplex and scored
/// gamma_i = 1 - H_i / ln L. An all-zero row after the shift gets the uniform
/// distribution (gamma 0).
inline UncertaintyWeights entropy_weights(const Eigen::MatrixXd& U) {
    const Eigen::Index L = U.cols();
    if (L < 2) throw InvalidArgument("entropy_weights: need at least 2 columns");
    if (!U.allFinite()) throw InvalidArgument("entropy_weights: non-finite entry");
    const double logL = std::log(static_cast<double>(L));
    UncertaintyWeights out;
    out.gamma.resize(static_cast<std::size_t>(U.rows()));
    out.entropy.resize(static_cast<std::size_t>(U.rows()));
    for (Eigen::Index i = 0; i < U.rows(); ++i) {
        const Eigen::ArrayXd shifted = U.row(i).array() - std::min(U.row(i).minCoeff(), 0.0);
        const double total = shifted.sum();
        double H = logL;
        if (total > 0.0) {
            H = 0.0;
            for (Eigen::Index l = 0; l < L; ++l) {
                const double p = shifted(l) / total;
                if (p > 0.0) H -= p * std::log(p);
            }
        }
        const auto k = static_cast<std::size_t>(i);
        out.entropy[k] = H;
        out.gamma[k] = std::clamp(1.0 - H / logL, 0.0, 1.0);
    }
    return out;
}

/// n x L matrix view of the class flow columns.
inline Eigen::MatrixXd as_matrix(const NodeFunctions& nf) {
    Eigen::MatrixXd U(static_cast<Eigen::Index>(nf.num_nodes()), static_cast<Eigen::Index>(nf.num_classes()));
    for (std::size_t l = 0; l < nf.num_classes(); ++l) {
        for (std::size_t i = 0; i < nf.num_nodes(); ++i) {
            U(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) = nf(i, l);
        }
    }
    return U;
}

/// Softmax-affine classifier p(x) = softmax(W x + b).
struct ClassifierParams {
    Eigen::MatrixXd W;  ///< L x p
    Eigen::VectorXd b;  ///< L
    double learning_rate = 5e-2;
    double weight_decay = 2e-4;
    std::size_t epochs = 180;

    static ClassifierParams zeros(Eigen::Index classes, Eigen::Index dim) {
        ClassifierParams p;
        p.W = Eigen::MatrixXd::Zero(classes, dim);
        p.b = Eigen::VectorXd::Zero(classes);
        return p;
    }
};

inline Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd P(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const Eigen::ArrayXd e = (logits.row(i).array() - logits.row(i).maxCoeff()).exp();
        P.row(i) = (e / e.sum()).matrix().transpose();
    }
    return P;
}

inline Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& X, const ClassifierParams& p) {
    return softmax_rows((X * p.W.transpose()).rowwise() + p.b.transpose());
}

struct ClassifierObjective {
    double value = 0.0;
    Eigen::MatrixXd grad_W;
    Eigen::VectorXd grad_b;
};

/// sum_i weight_i * CE(softmax(W x_i + b), target_i) + weight_decay/2 ||W||^2;
/// rows with target -1 or weight 0 are skipped.
inline ClassifierObjective classifier_objective(const Eigen::MatrixXd& X, const std::vector<int>& targets,
                                                const std::vector<double>& weights, const ClassifierParams& p) {
    const auto n = static_cast<std::size_t>(X.rows());
    if (targets.size() != n || weights.size() != n) throw InvalidArgument("classifier: targets/weights length mismatch");
    if (p.W.cols() != X.cols() || p.b.size() != p.W.rows()) throw InvalidArgument("classifier: parameter shape mismatch");
    const Eigen::Index L = p.W.rows();
    const Eigen::MatrixXd logits = (X * p.W.transpose()).rowwise() + p.b.transpose();
    ClassifierObjective out;
    out.grad_W = p.weight_decay * p.W;
    out.grad_b = Eigen::VectorXd::Zero(L);
    out.value = 0.5 * p.weight_decay * p.W.squaredNorm();
    for (std::size_t i = 0; i < n; ++i) {
        if (targets[i] < 0 || weights[i] == 0.0) continue;
        if (targets[i] >= L) throw InvalidArgument("classifier: target class out of range");
        const auto r = static_cast<Eigen::Index>(i);
        const double mx = logits.row(r).maxCoeff();
        const Eigen::ArrayXd e = (logits.row(r).array() - mx).exp();
        const double lse = mx + std::log(e.sum());
        out.value += weights[i] * (lse - logits(r, targets[i]));
        Eigen::VectorXd g = (e / e.sum()).matrix().transpose();
        g(targets[i]) -= 1.0;
        g *= weights[i];
        out.grad_W += g * X.row(r);
        out.grad_b += g;
    }
    return out;
}

struct ClassifierResult {
    ClassifierParams params;
    Eigen::MatrixXd probs;               ///< n x L
    std::vector<double> objective_history;  ///< value before each epoch, then the final value
};

/**
 * Gradient descent on the uncertainty-weighted objective
 *   sum_{given} CE(f(x_i), y_i) + sum_{others} gamma_i CE(f(x_i), yhat_i) + wd/2 ||W||^2.
 * The step at epoch t is lr * (1 + cos(pi t / epochs)) / 2, halved until the
 * objective does not increase; if 40 halvings fail the loop stops early.
 */
inline ClassifierResult train_weighted_classifier(const Eigen::MatrixXd& X, const LabelState& labels,
                                                  const std::vector<int>& yhat, const std::vector<double>& gamma,
                                                  ClassifierParams params) {
    const std::size_t n = labels.size();
    if (static_cast<std::size_t>(X.rows()) != n || yhat.size() != n || gamma.size() != n) {
        throw InvalidArgument("train_weighted_classifier: inputs not aligned on n");
    }
    if (!(params.learning_rate > 0.0) || !(params.weight_decay >= 0.0)) {
        throw InvalidArgument("train_weighted_classifier: invalid learning rate or weight decay");
    }
    if (params.W.size() == 0) {
        params.W = Eigen::MatrixXd::Zero(labels.num_classes(), X.cols());
        params.b = Eigen::VectorXd::Zero(labels.num_classes());
    }
    if (params.W.rows() != labels.num_classes()) throw InvalidArgument("train_weighted_classifier: class count mismatch");

    std::vector<int> targets(n);
    std::vector<double> weights(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels.is_given(i)) {
            targets[i] = labels[i].cls;
            weights[i] = 1.0;
        } else {
            if (!(gamma[i] >= 0.0 && gamma[i] <= 1.0)) throw InvalidArgument("train_weighted_classifier: gamma outside [0,1]");
            targets[i] = yhat[i];
            weights[i] = gamma[i];
        }
    }

    ClassifierResult out;
    auto obj = classifier_objective(X, targets, weights, params);
    for (std::size_t t = 0; t < params.epochs; ++t) {
        if (!std::isfinite(obj.value)) throw NumericalError("classifier loss is NaN at epoch " + std::to_string(t));
        out.objective_history.push_back(obj.value);
        double step = params.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(t) /
                                                                    static_cast<double>(params.epochs)));
        bool moved = false;
        for (int half = 0; half < 40 && step > 0.0; ++half, step *= 0.5) {
            ClassifierParams trial = params;
            trial.W -= step * obj.grad_W;
            trial.b -= step * obj.grad_b;
            auto next = classifier_objective(X, targets, weights, trial);
            if (std::isfinite(next.value) && next.value <= obj.value) {
                params = std::move(trial);
                obj = std::move(next);
                moved = true;
                break;
            }
        }
        if (!moved) break;
    }
    if (!std::isfinite(obj.value)) throw NumericalError("classifier loss is NaN at the final epoch");
    out.objective_history.push_back(obj.value);
    out.probs = predict_proba(X, params);
    out.params = std::move(params);
    return out;
}

inline int argmax_row(const Eigen::MatrixXd& P, Eigen::Index i) {
    Eigen::Index best = 0;
    for (Eigen::Index l = 1; l < P.cols(); ++l) {
        if (P(i, l) > P(i, best)) best = l;
    }
    return static_cast<int>(best);
}

/// Given labels of `labels` plus pseudo(yhat_i, gamma_i) for every other node
/// with gamma_i >= threshold whose classifier argmax agrees with yhat_i.
inline LabelState promote_pseudo_labels(const LabelState& labels, const std::vector<int>& yhat,
                                        const Eigen::MatrixXd& probs, const std::vector<double>& gamma,
                                        double threshold) {
    const std::size_t n = labels.size();
    if (yhat.size() != n || gamma.size() != n || static_cast<std::size_t>(probs.rows()) != n) {
        throw InvalidArgument("promote_pseudo_labels: inputs not aligned on n");
    }
    LabelState out = labels.given_only();
    for (std::size_t i = 0; i < n; ++i) {
        if (out.is_given(i)) continue;
        if (gamma[i] >= threshold && argmax_row(probs, static_cast<Eigen::Index>(i)) == yhat[i]) {
            out.set_pseudo(i, yhat[i], gamma[i]);
        }
    }
    return out;
}

struct LoopParams {
    std::size_t epochs = 5;
    double threshold = 0.7;
    FlowParams flow;
    ClassifierParams classifier;
};

struct EpochRecord {
    std::size_t epoch = 0;
    LabelState labels;             ///< labels clamped in this epoch's diffusion
    std::size_t given = 0;
    std::size_t pseudo = 0;
    std::size_t promoted = 0;      ///< pseudo labels handed to the next epoch
    double mean_gamma = 0.0;       ///< over nodes without a given label
    double classifier_objective = 0.0;
    std::optional<double> accuracy;  ///< over nodes without a given label
    std::vector<FlowRecord> flow_records;
};

struct LoopResult {
    std::vector<int> prediction;
    NodeFunctions functions;
    std::vector<double> gamma;
    LabelState labels;  ///< labels used by the final diffusion
    Eigen::MatrixXd probs;
    std::vector<EpochRecord> history;
};

/**
 * Alternates diffusion and classifier training for `epochs` rounds. Each round
 * diffuses with the given labels plus the previous round's promotions, scores
 * the result with entropy weights, trains the classifier (warm-started), and
 * recomputes the promotions from scratch.
 */
inline LoopResult alternate(const Hypergraph& H, const Eigen::MatrixXd& X, const LabelState& given,
                            const LoopParams& params, const std::vector<int>* truth = nullptr) {
    if (params.epochs < 1) throw InvalidArgument("alternate: need at least one epoch");
    const std::size_t n = H.num_vertices();
    if (given.size() != n || static_cast<std::size_t>(X.rows()) != n) throw InvalidArgument("alternate: inputs not aligned on n");
    if (truth && truth->size() != n) throw InvalidArgument("alternate: truth length mismatch");
    given.require_all_classes();

    LoopResult out;
    LabelState current = given.given_only();
    ClassifierParams clf = params.classifier;
    for (std::size_t epoch = 1; epoch <= params.epochs; ++epoch) {
        const std::string ctx = "epoch " + std::to_string(epoch) + ": ";
        try {
            auto diff = run_multiclass(H, current, params.flow);
            auto uw = entropy_weights(as_matrix(diff.functions));
            auto trained = train_weighted_classifier(X, current, diff.prediction, uw.gamma, clf);
            clf = trained.params;
            LabelState next = promote_pseudo_labels(current, diff.prediction, trained.probs, uw.gamma, params.threshold);

            EpochRecord rec;
            rec.epoch = epoch;
            rec.labels = current;
            rec.given = current.count(LabelStatus::Given);
            rec.pseudo = current.count(LabelStatus::Pseudo);
            rec.promoted = next.count(LabelStatus::Pseudo);
            rec.classifier_objective = trained.objective_history.back();
            double gsum = 0.0;
            std::size_t free = 0, correct = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (current.is_given(i)) continue;
                gsum += uw.gamma[i];
                ++free;
                if (truth && diff.prediction[i] == (*truth)[i]) ++correct;
            }
            rec.mean_gamma = free ? gsum / static_cast<double>(free) : 1.0;
            if (truth && free) rec.accuracy = static_cast<double>(correct) / static_cast<double>(free);
            rec.flow_records = diff.functions.records;
            out.history.push_back(std::move(rec));

            out.prediction = std::move(diff.prediction);
            out.functions = std::move(diff.functions);
            out.gamma = std::move(uw.gamma);
            out.labels = current;
            out.probs = std::move(trained.probs);
            current = std::move(next);
        } catch (const NumericalError& e) {
            throw NumericalError(ctx + e.what());
        } catch (const InvalidArgument& e) {
            throw InvalidArgument(ctx + e.what());
        }
    }
    return out;
}

}  // namespace hgdiff
