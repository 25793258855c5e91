#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hgdiff/construct.hpp"
#include "hgdiff/contrastive.hpp"
#include "hgdiff/error.hpp"
#include "hgdiff/flow.hpp"
#include "hgdiff/io.hpp"
#include "hgdiff/metrics.hpp"
#include "hgdiff/synth.hpp"
#include "hgdiff/uncertainty.hpp"

namespace hgdiff {

/// Every tunable of a pipeline run. Defaults are the desk-scale profile.
struct RunConfig {
    std::vector<std::string> imaging;
    std::vector<std::string> phenotypic;
    std::vector<std::string> categorical;  ///< phenotypic files forced categorical
    std::string labels;
    std::string truth;
    std::string out_dir = "hgdiff_out";
    int num_classes = 0;
    std::string profile = "desk";

    std::size_t k = 10;
    std::size_t k_pheno = 5;

    bool encoder = false;
    std::size_t encoder_dim = 0;  ///< 0 keeps the input dimension
    double tau = 0.5;
    std::size_t encoder_steps = 100;
    double encoder_lr = 0.5;
    double aug_noise = 0.1;
    double aug_mask = 0.1;
    double aug_node_drop = 0.1;
    double aug_edge_perturb = 0.1;

    double dt = 0.1;
    std::size_t max_outer_iters = 500;
    double ratio_tol = 1e-6;
    std::size_t inner_iters = 20000;
    double gap_tol = 1e-10;
    std::string norm = "weighted_l1";
    std::size_t init_sweeps = 20;

    std::size_t epochs = 5;
    double threshold = 0.7;
    double learning_rate = 5e-2;
    double weight_decay = 2e-4;
    std::size_t classifier_epochs = 60;

    std::uint64_t seed = 0;

    FlowParams flow_params() const {
        FlowParams fp;
        fp.dt = dt;
        fp.max_outer_iters = max_outer_iters;
        fp.ratio_tol = ratio_tol;
        fp.inner.max_iters = inner_iters;
        fp.inner.gap_tol = gap_tol;
        fp.norm = norm_kind_from_string(norm);
        fp.init_smoothing_iters = init_sweeps;
        return fp;
    }

    LoopParams loop_params() const {
        LoopParams lp;
        lp.epochs = epochs;
        lp.threshold = threshold;
        lp.flow = flow_params();
        lp.classifier.learning_rate = learning_rate;
        lp.classifier.weight_decay = weight_decay;
        lp.classifier.epochs = classifier_epochs;
        return lp;
    }

    AugmentPolicy augment_policy(std::uint64_t stream) const {
        return {aug_noise, aug_mask, aug_node_drop, aug_edge_perturb, seed * 1000003u + stream};
    }

    /// Large-cohort values for every field the caller did not set explicitly.
    void apply_paper_profile(const std::function<bool(const std::string&)>& is_explicit) {
        if (!is_explicit("k")) k = 50;
        if (!is_explicit("classifier-epochs")) classifier_epochs = 180;
        if (!is_explicit("learning-rate")) learning_rate = 5e-2;
        if (!is_explicit("weight-decay")) weight_decay = 2e-4;
        if (!is_explicit("encoder-steps")) encoder_steps = 200;
        if (!is_explicit("epochs")) epochs = 10;
    }

    void validate() const {
        if (imaging.empty() && phenotypic.empty()) throw InvalidArgument("config: no modality files");
        if (labels.empty()) throw InvalidArgument("config: no labels file");
        if (epochs < 1) throw InvalidArgument("config: epochs must be >= 1");
        if (!(threshold >= 0.0 && threshold <= 1.0)) throw InvalidArgument("config: threshold outside [0,1]");
        norm_kind_from_string(norm);
        flow_params().validate();
        auto exists = [](const std::string& p, const char* what) {
            if (!std::filesystem::exists(p)) throw InvalidArgument(std::string("config: ") + what + " file not found: " + p);
        };
        for (const auto& p : imaging) exists(p, "imaging");
        for (const auto& p : phenotypic) exists(p, "phenotypic");
        exists(labels, "labels");
        if (!truth.empty()) exists(truth, "truth");
    }
};

/// Stable 64-bit FNV-1a digest, printed as 16 hex digits.
inline std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace detail {

inline std::string toml_string(const std::string& s) {
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"' || ch == '\\') out += '\\';
        out += ch;
    }
    return out + "\"";
}

inline std::string toml_list(const std::vector<std::string>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + toml_string(v[i]);
    return out + "]";
}

}  // namespace detail

/// Flat key = value snapshot whose keys are the CLI option names, so the file
/// can be fed back through --config. Doubles are printed round-trip exact.
inline std::string config_snapshot(const RunConfig& c) {
    std::ostringstream s;
    auto kv = [&](const char* key, const std::string& value) { s << key << " = " << value << "\n"; };
    auto num = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    kv("imaging", detail::toml_list(c.imaging));
    kv("phenotypic", detail::toml_list(c.phenotypic));
    kv("categorical", detail::toml_list(c.categorical));
    kv("labels", detail::toml_string(c.labels));
    kv("truth", detail::toml_string(c.truth));
    kv("num-classes", std::to_string(c.num_classes));
    kv("profile", detail::toml_string(c.profile));
    kv("k", std::to_string(c.k));
    kv("k-pheno", std::to_string(c.k_pheno));
    kv("encoder", c.encoder ? "true" : "false");
    kv("encoder-dim", std::to_string(c.encoder_dim));
    kv("tau", num(c.tau));
    kv("encoder-steps", std::to_string(c.encoder_steps));
    kv("encoder-lr", num(c.encoder_lr));
    kv("aug-noise", num(c.aug_noise));
    kv("aug-mask", num(c.aug_mask));
    kv("aug-node-drop", num(c.aug_node_drop));
    kv("aug-edge-perturb", num(c.aug_edge_perturb));
    kv("dt", num(c.dt));
    kv("max-outer-iters", std::to_string(c.max_outer_iters));
    kv("ratio-tol", num(c.ratio_tol));
    kv("inner-iters", std::to_string(c.inner_iters));
    kv("gap-tol", num(c.gap_tol));
    kv("norm", detail::toml_string(c.norm));
    kv("init-sweeps", std::to_string(c.init_sweeps));
    kv("epochs", std::to_string(c.epochs));
    kv("threshold", num(c.threshold));
    kv("learning-rate", num(c.learning_rate));
    kv("weight-decay", num(c.weight_decay));
    kv("classifier-epochs", std::to_string(c.classifier_epochs));
    kv("seed", std::to_string(c.seed));
    kv("out", detail::toml_string(c.out_dir));
    return s.str();
}

/// Digest of the snapshot with the output directory blanked, so the same
/// experiment written to two places shares one hash.
inline std::string config_hash(RunConfig c) {
    c.out_dir.clear();
    return fnv1a_hex(config_snapshot(c));
}

using Logger = std::function<void(const std::string&)>;

template <class F>
auto with_stage(const std::string& stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const NumericalError& e) {
        throw NumericalError("stage '" + stage + "': " + e.what());
    } catch (const InvalidArgument& e) {
        throw InvalidArgument("stage '" + stage + "': " + e.what());
    } catch (const Error& e) {
        throw Error("stage '" + stage + "': " + e.what());
    }
}

inline Dataset load_run_dataset(const RunConfig& cfg) {
    std::vector<ModalitySource> sources;
    for (const auto& p : cfg.imaging) sources.push_back({p, ModalityKind::ImagingEmbedding, false});
    for (const auto& p : cfg.phenotypic) {
        const bool cat = std::find(cfg.categorical.begin(), cfg.categorical.end(), p) != cfg.categorical.end();
        sources.push_back({p, ModalityKind::Phenotypic, cat});
    }
    return load_dataset(sources, cfg.labels, cfg.truth, cfg.num_classes);
}

/// Replaces every imaging modality by contrastively trained embeddings; each
/// modality gets its own encoder and seed stream.
inline void train_encoders(Dataset& ds, const RunConfig& cfg, const Logger& log) {
    std::uint64_t stream = 0;
    for (auto& m : ds.modalities) {
        ++stream;
        if (m.kind != ModalityKind::ImagingEmbedding) continue;
        const auto p = m.features.cols();
        const auto out_dim = cfg.encoder_dim ? static_cast<Eigen::Index>(cfg.encoder_dim) : p;
        auto params = EncoderParams::random(p, out_dim, cfg.seed * 1000003u + 500 + stream);
        params.tau = cfg.tau;
        params.steps = cfg.encoder_steps;
        params.step_size = cfg.encoder_lr;
        auto res = train_encoder(m, cfg.augment_policy(stream), params);
        if (log && !res.loss_history.empty()) {
            std::ostringstream msg;
            msg << "encoder '" << m.name << "': batch loss " << res.first_batch_initial << " -> " << res.first_batch_final;
            log(msg.str());
        }
        m.features = std::move(res.embeddings);
    }
}

/// One kNN star hypergraph per imaging modality plus one per phenotypic
/// measure, concatenated in modality order.
inline ConstructionResult build_modal_hypergraph(const Dataset& ds, const RunConfig& cfg) {
    ConstructionResult out;
    std::vector<Hypergraph> parts;
    for (const auto& m : ds.modalities) {
        if (m.kind == ModalityKind::ImagingEmbedding) {
            parts.push_back(knn_modal_hypergraph(normalize_rows(m.features), cfg.k));
        } else {
            auto r = phenotypic_hypergraph(m, cfg.k_pheno);
            out.warnings.insert(out.warnings.end(), r.warnings.begin(), r.warnings.end());
            parts.push_back(std::move(r.hypergraph));
        }
    }
    out.hypergraph = concat_hypergraphs(parts);
    if (out.hypergraph.num_edges() == 0) throw InvalidArgument("combined hypergraph has no edges");
    return out;
}

/// Classifier input: standardised imaging and numeric columns plus one-hot
/// categorical codes. Constant columns become zero.
inline Eigen::MatrixXd classifier_features(const std::vector<ModalityTable>& modalities) {
    std::vector<Eigen::VectorXd> cols;
    auto standardized = [](Eigen::VectorXd c) {
        const double mean = c.mean();
        c.array() -= mean;
        const double sd = std::sqrt(c.squaredNorm() / static_cast<double>(c.size()));
        if (sd > 0.0) c /= sd;
        return c;
    };
    for (const auto& m : modalities) {
        if (m.categorical) {
            const auto maxc = static_cast<Eigen::Index>(m.features.maxCoeff());
            for (Eigen::Index code = 0; code <= maxc; ++code) {
                cols.push_back((m.features.col(0).array() == static_cast<double>(code)).cast<double>().matrix());
            }
        } else {
            for (Eigen::Index j = 0; j < m.features.cols(); ++j) cols.push_back(standardized(m.features.col(j)));
        }
    }
    if (cols.empty()) throw InvalidArgument("classifier_features: no feature columns");
    Eigen::MatrixXd X(cols.front().size(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) X.col(static_cast<Eigen::Index>(j)) = cols[j];
    return X;
}

inline std::string metrics_header() { return "spec_hash,seed,method,acc,sen,ppv,error_rate\n"; }

inline std::string metrics_row(const std::string& spec_hash, std::uint64_t seed, const std::string& method,
                               const MetricsReport& r) {
    return spec_hash + "," + std::to_string(seed) + "," + method + "," + format_rate(r.acc) + "," + format_rate(r.sen) +
           "," + format_rate(r.ppv) + "," + format_rate(r.error_rate) + "\n";
}

inline std::string history_jsonl(const std::vector<EpochRecord>& history) {
    std::string out;
    for (const auto& h : history) {
        nlohmann::json j = {{"epoch", h.epoch},
                            {"given", h.given},
                            {"pseudo", h.pseudo},
                            {"promoted", h.promoted},
                            {"mean_gamma", h.mean_gamma},
                            {"classifier_objective", h.classifier_objective}};
        if (h.accuracy) j["unlabeled_accuracy"] = *h.accuracy;
        out += j.dump() + "\n";
    }
    return out;
}

inline std::string diagnostics_jsonl(const std::vector<FlowRecord>& records, std::optional<std::size_t> epoch = {}) {
    std::string out;
    for (const auto& r : records) {
        nlohmann::json j;
        if (epoch) j["epoch"] = *epoch;
        j["class"] = r.cls;
        j["k"] = r.iteration;
        j["ratio"] = r.ratio;
        j["gap"] = r.gap;
        out += j.dump() + "\n";
    }
    return out;
}

struct RunSummary {
    std::string spec_hash;
    std::size_t nodes = 0;
    std::size_t edges = 0;
    std::optional<MetricsReport> metrics;
    std::vector<std::string> written;
};

/**
 * load -> (encoder) -> construct -> alternate -> write. All artifacts are
 * computed before anything is written; each file goes through a temporary
 * name, and the predictions file is written last.
 */
inline RunSummary run_pipeline(const RunConfig& cfg, const Logger& log = {}) {
    with_stage("config", [&] { cfg.validate(); });
    RunSummary summary;
    summary.spec_hash = config_hash(cfg);

    Dataset ds = with_stage("load", [&] { return load_run_dataset(cfg); });
    if (log) {
        log("loaded " + std::to_string(ds.size()) + " nodes, " + std::to_string(ds.modalities.size()) + " modalities, " +
            std::to_string(ds.given.count(LabelStatus::Given)) + " labeled, " + std::to_string(ds.given.num_classes()) +
            " classes");
    }
    if (cfg.encoder) with_stage("encoder", [&] { train_encoders(ds, cfg, log); });
    auto built = with_stage("construct", [&] { return build_modal_hypergraph(ds, cfg); });
    if (log) {
        for (const auto& w : built.warnings) log("warning: " + w);
        log("hypergraph: " + std::to_string(built.hypergraph.num_edges()) + " edges");
    }
    const Eigen::MatrixXd X = classifier_features(ds.modalities);
    const std::vector<int>* truth = ds.truth ? &*ds.truth : nullptr;

    auto result = with_stage("diffusion-loop", [&] {
        auto lp = cfg.loop_params();
        return alternate(built.hypergraph, X, ds.given, lp, truth);
    });
    std::string diagnostics;
    for (const auto& h : result.history) diagnostics += diagnostics_jsonl(h.flow_records, h.epoch);
    if (result.functions.prox_warning && log) log("warning: some proximal solves hit the iteration cap");

    const std::filesystem::path dir(cfg.out_dir);
    std::vector<std::pair<std::filesystem::path, std::string>> files;
    files.emplace_back(dir / "config.toml", config_snapshot(cfg));
    files.emplace_back(dir / "hypergraph.json", to_json(built.hypergraph).dump() + "\n");
    files.emplace_back(dir / "history.jsonl", history_jsonl(result.history));
    files.emplace_back(dir / "diagnostics.jsonl", diagnostics);
    if (ds.truth) {
        summary.metrics = metrics(*ds.truth, result.prediction, 1);
        files.emplace_back(dir / "metrics.csv",
                           metrics_header() + metrics_row(summary.spec_hash, cfg.seed,
                                                          cfg.epochs == 1 ? "diffusion" : "loop", *summary.metrics));
    }
    files.emplace_back(dir / "predictions.csv", predictions_csv(ds.ids, result.prediction, result.gamma, result.labels));
    with_stage("write", [&] {
        for (const auto& [path, content] : files) {
            write_file_atomic(path, content);
            summary.written.push_back(path.string());
        }
    });
    summary.nodes = ds.size();
    summary.edges = built.hypergraph.num_edges();
    return summary;
}

/// Synthetic benchmark suite: one metrics row per (repetition, method).
struct BenchConfig {
    PlantedSpec spec;
    std::size_t reps = 5;
    std::uint64_t seed = 0;
    std::size_t labels_per_class = 2;
    double label_fraction = 0.0;  ///< > 0 overrides labels_per_class
    std::string graph = "planted";  ///< planted | knn | knn+pheno
    std::size_t k = 5;
    std::vector<std::string> methods = {"diffusion", "loop"};
    LoopParams loop;

    std::string describe() const {
        std::ostringstream s;
        s << "n=" << spec.n << ";blocks=" << spec.blocks << ";card=" << spec.min_cardinality << "-" << spec.max_cardinality
          << ";cross=" << spec.cross_fraction << ";noise=" << spec.feature_noise << ";flip=" << spec.phenotype_flip
          << ";reps=" << reps << ";lpc=" << labels_per_class << ";lfrac=" << label_fraction << ";graph=" << graph
          << ";k=" << k << ";epochs=" << loop.epochs << ";thr=" << loop.threshold;
        return s.str();
    }
};

struct BenchRow {
    std::uint64_t seed = 0;
    std::string method;
    MetricsReport report;
};

inline std::vector<BenchRow> run_bench(const BenchConfig& cfg) {
    if (cfg.graph != "planted" && cfg.graph != "knn" && cfg.graph != "knn+pheno") {
        throw InvalidArgument("bench: unknown graph source '" + cfg.graph + "'");
    }
    std::vector<BenchRow> rows;
    for (std::size_t r = 0; r < cfg.reps; ++r) {
        const std::uint64_t seed = cfg.seed + r;
        PlantedSpec spec = cfg.spec;
        spec.seed = seed;
        auto inst = gen_planted(spec);
        auto labels = choose_labels(inst.truth, spec.blocks, cfg.labels_per_class, cfg.label_fraction, seed);
        Hypergraph H = inst.hypergraph;
        if (cfg.graph != "planted") {
            H = knn_modal_hypergraph(normalize_rows(inst.features.features), cfg.k);
            if (cfg.graph == "knn+pheno") H = concat_hypergraphs({H, phenotypic_hypergraph(inst.phenotype, cfg.k).hypergraph});
        }
        const Eigen::MatrixXd X = classifier_features({inst.features, inst.phenotype});
        for (const auto& method : cfg.methods) {
            LoopParams lp = cfg.loop;
            if (method == "diffusion") {
                lp.epochs = 1;
                lp.threshold = 1.0;
            } else if (method != "loop") {
                throw InvalidArgument("bench: unknown method '" + method + "'");
            }
            auto res = alternate(H, X, labels, lp, &inst.truth);
            rows.push_back({seed, method, metrics(inst.truth, res.prediction, 1)});
        }
    }
    return rows;
}

}  // namespace hgdiff
