#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hgdiff/error.hpp"

namespace hgdiff {

enum class ModalityKind { ImagingEmbedding, Phenotypic };

/// One modality over the n subjects: an n x p feature matrix for an embedding
/// modality, or an n x 1 measure column for a phenotypic one. Categorical
/// phenotypic columns hold integer category codes.
struct ModalityTable {
    std::string name;
    ModalityKind kind = ModalityKind::ImagingEmbedding;
    Eigen::MatrixXd features;
    bool categorical = false;

    std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }

    void validate() const {
        if (features.rows() == 0) throw InvalidArgument("modality '" + name + "': no rows");
        if (kind == ModalityKind::Phenotypic && features.cols() != 1) {
            throw InvalidArgument("modality '" + name + "': phenotypic measure must be a single column");
        }
        for (Eigen::Index i = 0; i < features.rows(); ++i) {
            for (Eigen::Index j = 0; j < features.cols(); ++j) {
                if (!std::isfinite(features(i, j))) {
                    throw InvalidArgument("modality '" + name + "': non-finite entry at row " + std::to_string(i));
                }
            }
        }
    }

    static ModalityTable imaging(std::string name, Eigen::MatrixXd x) {
        return {std::move(name), ModalityKind::ImagingEmbedding, std::move(x), false};
    }

    static ModalityTable phenotypic_numeric(std::string name, const std::vector<double>& values) {
        Eigen::MatrixXd col(static_cast<Eigen::Index>(values.size()), 1);
        for (std::size_t i = 0; i < values.size(); ++i) col(static_cast<Eigen::Index>(i), 0) = values[i];
        return {std::move(name), ModalityKind::Phenotypic, std::move(col), false};
    }

    static ModalityTable phenotypic_categorical(std::string name, const std::vector<int>& codes) {
        Eigen::MatrixXd col(static_cast<Eigen::Index>(codes.size()), 1);
        for (std::size_t i = 0; i < codes.size(); ++i) col(static_cast<Eigen::Index>(i), 0) = codes[i];
        return {std::move(name), ModalityKind::Phenotypic, std::move(col), true};
    }
};

enum class LabelStatus { Unknown, Given, Pseudo };

struct NodeLabel {
    LabelStatus status = LabelStatus::Unknown;
    int cls = -1;
    double confidence = 0.0;  ///< only meaningful for pseudo labels

    bool operator==(const NodeLabel&) const = default;
};

/// Per-node label status for a transductive problem with `num_classes` classes.
class LabelState {
public:
    LabelState() = default;
    LabelState(std::size_t n, int num_classes) : classes_(num_classes), nodes_(n) {
        if (num_classes < 2) throw InvalidArgument("LabelState: need at least 2 classes");
    }

    /// Builds a state from a dense vector where -1 marks unlabeled nodes.
    static LabelState from_given(const std::vector<int>& labels, int num_classes) {
        LabelState s(labels.size(), num_classes);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] >= 0) s.set_given(i, labels[i]);
        }
        return s;
    }

    std::size_t size() const { return nodes_.size(); }
    int num_classes() const { return classes_; }
    const NodeLabel& operator[](std::size_t i) const { return nodes_[i]; }

    void set_given(std::size_t i, int cls) {
        check_class(cls);
        nodes_.at(i) = {LabelStatus::Given, cls, 1.0};
    }
    void set_pseudo(std::size_t i, int cls, double confidence) {
        check_class(cls);
        if (!(confidence >= 0.0 && confidence <= 1.0)) throw InvalidArgument("pseudo-label confidence outside [0,1]");
        if (nodes_.at(i).status == LabelStatus::Given) throw InvalidArgument("cannot overwrite a given label");
        nodes_[i] = {LabelStatus::Pseudo, cls, confidence};
    }
    void clear(std::size_t i) {
        if (nodes_.at(i).status != LabelStatus::Given) nodes_[i] = {};
    }

    bool is_labeled(std::size_t i) const { return nodes_[i].status != LabelStatus::Unknown; }
    bool is_given(std::size_t i) const { return nodes_[i].status == LabelStatus::Given; }

    std::size_t count(LabelStatus st) const {
        std::size_t c = 0;
        for (const auto& nl : nodes_) c += nl.status == st ? 1 : 0;
        return c;
    }

    /// Same given labels, all pseudo labels dropped.
    LabelState given_only() const {
        LabelState s = *this;
        for (auto& nl : s.nodes_) {
            if (nl.status == LabelStatus::Pseudo) nl = {};
        }
        return s;
    }

    /// Throws unless every class has at least one given label.
    void require_all_classes() const {
        std::vector<int> seen(static_cast<std::size_t>(classes_), 0);
        for (const auto& nl : nodes_) {
            if (nl.status == LabelStatus::Given) seen[static_cast<std::size_t>(nl.cls)] = 1;
        }
        for (int c = 0; c < classes_; ++c) {
            if (!seen[static_cast<std::size_t>(c)]) {
                throw InvalidArgument("no given label for class " + std::to_string(c));
            }
        }
    }

    bool operator==(const LabelState&) const = default;

private:
    void check_class(int cls) const {
        if (cls < 0 || cls >= classes_) throw InvalidArgument("class index " + std::to_string(cls) + " out of range");
    }

    int classes_ = 2;
    std::vector<NodeLabel> nodes_;
};

}  // namespace hgdiff
