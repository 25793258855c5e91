#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hgdiff/pipeline.hpp"

namespace {

using namespace hgdiff;

enum class Verbosity { Quiet = 0, Info = 1, Debug = 2 };

Verbosity verbosity_from_env() {
    const char* v = std::getenv("HGDIFF_LOG");
    if (!v) return Verbosity::Info;
    const std::string s = v;
    if (s == "quiet" || s == "0") return Verbosity::Quiet;
    if (s == "debug" || s == "2") return Verbosity::Debug;
    return Verbosity::Info;
}

Logger make_logger(Verbosity level, Verbosity at) {
    if (level < at) return {};
    return [](const std::string& msg) { std::cerr << "[hgdiff] " << msg << "\n"; };
}

struct BenchOptions {
    std::size_t n = 60;
    int blocks = 2;
    std::size_t min_card = 3;
    std::size_t max_card = 3;
    double cross = 0.05;
    double noise = 1.0;
    double flip = 0.2;
    std::size_t reps = 5;
    std::size_t labels_per_class = 2;
    double label_fraction = 0.0;
    std::string graph = "planted";
    std::vector<std::string> methods = {"diffusion", "loop"};
};

void add_run_options(CLI::App& app, RunConfig& c) {
    app.add_option("--imaging", c.imaging, "imaging-embedding CSV (node_id + feature columns); repeatable")
        ->expected(0, CLI::detail::expected_max_vector_size);
    app.add_option("--phenotypic", c.phenotypic, "phenotypic CSV (node_id + one measure column); repeatable")
        ->expected(0, CLI::detail::expected_max_vector_size);
    app.add_option("--categorical", c.categorical, "phenotypic files to treat as categorical")
        ->expected(0, CLI::detail::expected_max_vector_size);
    app.add_option("--labels", c.labels, "labels CSV (node_id,label; -1 = unlabeled)");
    app.add_option("--truth", c.truth, "ground-truth CSV; enables metrics.csv");
    app.add_option("--out", c.out_dir, "output directory");
    app.add_option("--num-classes", c.num_classes, "class count (0 = infer from labels)");
    app.add_option("--profile", c.profile, "desk | paper")->check(CLI::IsMember({"desk", "paper"}));
    app.add_option("--k", c.k, "kNN neighbourhood for imaging modalities");
    app.add_option("--k-pheno", c.k_pheno, "kNN neighbourhood for numeric phenotypic measures");
    app.add_flag("--encoder", c.encoder, "train a contrastive encoder per imaging modality");
    app.add_option("--encoder-dim", c.encoder_dim, "encoder output dimension (0 = input dimension)");
    app.add_option("--tau", c.tau, "NT-Xent temperature");
    app.add_option("--encoder-steps", c.encoder_steps);
    app.add_option("--encoder-lr", c.encoder_lr);
    app.add_option("--aug-noise", c.aug_noise);
    app.add_option("--aug-mask", c.aug_mask);
    app.add_option("--aug-node-drop", c.aug_node_drop);
    app.add_option("--aug-edge-perturb", c.aug_edge_perturb);
    app.add_option("--dt", c.dt, "flow step size");
    app.add_option("--max-outer-iters", c.max_outer_iters);
    app.add_option("--ratio-tol", c.ratio_tol);
    app.add_option("--inner-iters", c.inner_iters, "proximal solver iteration cap");
    app.add_option("--gap-tol", c.gap_tol, "proximal solver duality-gap tolerance");
    app.add_option("--norm", c.norm, "weighted_l1 | weighted_l2")
        ->check(CLI::IsMember({"weighted_l1", "weighted_l2"}));
    app.add_option("--init-sweeps", c.init_sweeps, "averaging sweeps of the initial function");
    app.add_option("--epochs", c.epochs, "alternating epochs (1 = diffusion only)");
    app.add_option("--threshold", c.threshold, "gamma threshold for pseudo-label promotion");
    app.add_option("--learning-rate", c.learning_rate);
    app.add_option("--weight-decay", c.weight_decay);
    app.add_option("--classifier-epochs", c.classifier_epochs);
    app.add_option("--seed", c.seed, "seed of every randomized stage");
}

void require_seed(const CLI::App& root, const std::string& sub) {
    if (root.get_option("--seed")->count() == 0) throw CLI::RequiredError("--seed (for '" + sub + "')");
}

std::string embedding_csv(const std::vector<std::string>& ids, const Eigen::MatrixXd& E) {
    std::string out = "node_id";
    for (Eigen::Index j = 0; j < E.cols(); ++j) out += ",e" + std::to_string(j);
    out += "\n";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out += ids[i];
        for (Eigen::Index j = 0; j < E.cols(); ++j) out += "," + format_double(E(static_cast<Eigen::Index>(i), j));
        out += "\n";
    }
    return out;
}

/// Labels keyed by vertex index, for subcommands that start from a hypergraph file.
LabelState labels_for_graph(const std::string& path, std::size_t n, int num_classes, std::vector<std::string>& ids) {
    std::map<std::string, std::size_t> order;
    ids.clear();
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back(std::to_string(i));
        order[ids.back()] = i;
    }
    const auto labels = detail::read_label_column(path, order, n);
    int max_label = -1;
    for (int l : labels) max_label = std::max(max_label, l);
    if (max_label < 0) throw InvalidArgument(path + ": no labeled nodes");
    const int L = num_classes > 0 ? num_classes : std::max(2, max_label + 1);
    return LabelState::from_given(labels, L);
}

int cmd_build_graph(const RunConfig& cfg, const Logger& log) {
    if (cfg.imaging.empty() && cfg.phenotypic.empty()) throw InvalidArgument("build-graph: no modality files");
    RunConfig c = cfg;
    c.labels.clear();
    Dataset ds = with_stage("load", [&] { return load_run_dataset(c); });
    if (c.encoder) with_stage("encoder", [&] { train_encoders(ds, c, log); });
    auto built = with_stage("construct", [&] { return build_modal_hypergraph(ds, c); });
    if (log) {
        for (const auto& w : built.warnings) log("warning: " + w);
    }
    const auto path = std::filesystem::path(c.out_dir) / "hypergraph.json";
    write_file_atomic(path, to_json(built.hypergraph).dump() + "\n");
    std::cout << path.string() << ": " << built.hypergraph.num_vertices() << " vertices, " << built.hypergraph.num_edges()
              << " edges\n";
    return 0;
}

int cmd_train_encoder(const RunConfig& cfg, const Logger& log) {
    if (cfg.imaging.empty()) throw InvalidArgument("train-encoder: no imaging files");
    RunConfig c = cfg;
    c.labels.clear();
    c.phenotypic.clear();
    Dataset ds = with_stage("load", [&] { return load_run_dataset(c); });
    with_stage("encoder", [&] { train_encoders(ds, c, log); });
    for (std::size_t m = 0; m < ds.modalities.size(); ++m) {
        const auto path = std::filesystem::path(c.out_dir) / (ds.modalities[m].name + "_embedding.csv");
        write_file_atomic(path, embedding_csv(ds.ids, ds.modalities[m].features));
        std::cout << path.string() << "\n";
    }
    return 0;
}

int cmd_diffuse(const RunConfig& cfg, const std::string& graph_path, const Logger& log) {
    if (cfg.labels.empty()) throw InvalidArgument("diffuse: --labels is required");
    const Hypergraph H = with_stage("load", [&] { return load_hypergraph(graph_path); });
    std::vector<std::string> ids;
    const LabelState labels = with_stage("load", [&] { return labels_for_graph(cfg.labels, H.num_vertices(), cfg.num_classes, ids); });
    auto res = with_stage("diffusion", [&] { return run_multiclass(H, labels, cfg.flow_params()); });
    const auto weights = entropy_weights(as_matrix(res.functions));
    if (log && res.functions.prox_warning) log("warning: some proximal solves hit the iteration cap");

    const std::filesystem::path dir(cfg.out_dir);
    std::vector<std::pair<std::filesystem::path, std::string>> files;
    files.emplace_back(dir / "diagnostics.jsonl", diagnostics_jsonl(res.functions.records));
    if (!cfg.truth.empty()) {
        std::vector<std::string> unused;
        const auto truth = labels_for_graph(cfg.truth, H.num_vertices(), labels.num_classes(), unused);
        std::vector<int> t(H.num_vertices());
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (!truth.is_labeled(i)) throw InvalidArgument(cfg.truth + ": node " + ids[i] + " has no ground-truth label");
            t[i] = truth[i].cls;
        }
        files.emplace_back(dir / "metrics.csv", metrics_header() + metrics_row(config_hash(cfg), cfg.seed, "diffusion",
                                                                               metrics(t, res.prediction, 1)));
    }
    files.emplace_back(dir / "predictions.csv", predictions_csv(ids, res.prediction, weights.gamma, labels));
    for (const auto& [path, content] : files) write_file_atomic(path, content);
    std::cout << (dir / "predictions.csv").string() << "\n";
    return 0;
}

int cmd_run(const RunConfig& cfg, const Logger& log) {
    const auto summary = run_pipeline(cfg, log);
    std::cout << "spec_hash " << summary.spec_hash << ": " << summary.nodes << " nodes, " << summary.edges << " edges\n";
    if (summary.metrics) {
        std::cout << "acc " << format_rate(summary.metrics->acc) << " sen " << format_rate(summary.metrics->sen) << " ppv "
                  << format_rate(summary.metrics->ppv) << "\n";
    }
    for (const auto& f : summary.written) std::cout << f << "\n";
    return 0;
}

int cmd_bench(const RunConfig& cfg, const BenchOptions& o, const Logger& log) {
    BenchConfig b;
    b.spec.n = o.n;
    b.spec.blocks = o.blocks;
    b.spec.min_cardinality = o.min_card;
    b.spec.max_cardinality = o.max_card;
    b.spec.cross_fraction = o.cross;
    b.spec.feature_noise = o.noise;
    b.spec.phenotype_flip = o.flip;
    b.spec.validate();
    b.reps = o.reps;
    b.seed = cfg.seed;
    b.labels_per_class = o.labels_per_class;
    b.label_fraction = o.label_fraction;
    b.graph = o.graph;
    b.k = cfg.k;
    b.methods = o.methods;
    b.loop = cfg.loop_params();
    if (b.loop.epochs < 2) b.loop.epochs = 2;

    const std::string hash = fnv1a_hex(b.describe() + "\n" + config_snapshot([&] {
                                           RunConfig c = cfg;
                                           c.out_dir.clear();
                                           return c;
                                       }()));
    if (log) log("bench " + b.describe() + " spec_hash " + hash);
    const auto rows = with_stage("bench", [&] { return run_bench(b); });

    std::string csv = metrics_header();
    std::map<std::string, std::vector<double>> acc;
    for (const auto& r : rows) {
        csv += metrics_row(hash, r.seed, r.method, r.report);
        if (r.report.acc) acc[r.method].push_back(*r.report.acc);
    }
    const auto path = std::filesystem::path(cfg.out_dir) / "bench_metrics.csv";
    write_file_atomic(path, csv);
    for (const auto& method : b.methods) {
        const auto ci = mean_ci(acc[method]);
        std::printf("%-10s acc %.4f +- %.4f over %zu reps\n", method.c_str(), ci.mean, ci.half_width, acc[method].size());
    }
    std::cout << path.string() << "\n";
    return 0;
}

int cmd_oracle(const RunConfig& cfg, const std::string& graph_path) {
    const Hypergraph H = load_hypergraph(graph_path);
    const auto norm = norm_kind_from_string(cfg.norm);
    const auto best = brute_force_best_ratio(H, norm);
    nlohmann::json j;
    j["ratio"] = best.ratio;
    std::vector<std::size_t> positive;
    for (std::size_t i = 0; i < best.positive.size(); ++i) {
        if (best.positive[i]) positive.push_back(i);
    }
    j["positive"] = positive;
    if (!cfg.labels.empty()) {
        std::vector<std::string> ids;
        const auto labels = labels_for_graph(cfg.labels, H.num_vertices(), 2, ids);
        const auto flow = run_binary_flow(H, labels, cfg.flow_params());
        std::vector<char> side(H.num_vertices());
        for (std::size_t i = 0; i < side.size(); ++i) side[i] = flow.partition[i] > 0;
        j["flow_ratio"] = indicator_ratio(H, side, norm);
        j["flow_ratio_over_best"] = best.ratio > 0.0 ? nlohmann::json(j["flow_ratio"].get<double>() / best.ratio)
                                                     : nlohmann::json(nullptr);
    }
    std::cout << j.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hgdiff: hypergraph total-variation diffusion for multi-modal transductive classification"};
    app.set_config("--config", "", "flat TOML file whose keys are option names; flags win over the file");
    app.require_subcommand(1);

    RunConfig cfg;
    add_run_options(app, cfg);

    auto* build = app.add_subcommand("build-graph", "construct the multi-modal hypergraph -> <out>/hypergraph.json");
    auto* train = app.add_subcommand("train-encoder", "train contrastive encoders -> <out>/<modality>_embedding.csv");
    auto* diffuse = app.add_subcommand("diffuse", "one-vs-rest TV flows on a hypergraph file");
    auto* run = app.add_subcommand("run", "full pipeline: construct, diffusion, uncertainty loop, outputs");
    auto* bench = app.add_subcommand("bench", "planted-partition benchmark suite -> <out>/bench_metrics.csv");
    auto* oracle = app.add_subcommand("oracle", "exhaustive best bipartition ratio of a small hypergraph");

    std::string graph_path;
    diffuse->add_option("--graph", graph_path, "hypergraph JSON")->required()->check(CLI::ExistingFile);
    oracle->add_option("--graph", graph_path, "hypergraph JSON")->required()->check(CLI::ExistingFile);

    BenchOptions bo;
    bench->add_option("--n", bo.n);
    bench->add_option("--blocks", bo.blocks);
    bench->add_option("--min-card", bo.min_card);
    bench->add_option("--max-card", bo.max_card);
    bench->add_option("--cross", bo.cross, "share of edges straddling blocks");
    bench->add_option("--noise", bo.noise, "feature noise sigma");
    bench->add_option("--flip", bo.flip, "phenotype flip probability");
    bench->add_option("--reps", bo.reps);
    bench->add_option("--labels-per-class", bo.labels_per_class);
    bench->add_option("--label-fraction", bo.label_fraction, "overrides --labels-per-class when > 0");
    bench->add_option("--graph-source", bo.graph, "planted | knn | knn+pheno")
        ->check(CLI::IsMember({"planted", "knn", "knn+pheno"}));
    bench->add_option("--methods", bo.methods)->check(CLI::IsMember({"diffusion", "loop"}));

    for (auto* sub : {build, train, diffuse, run, bench, oracle}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    for (auto* files : {&cfg.imaging, &cfg.phenotypic, &cfg.categorical}) std::erase(*files, std::string{});

    const auto level = verbosity_from_env();
    const Logger log = make_logger(level, Verbosity::Info);
    try {
        if (cfg.profile == "paper") {
            cfg.apply_paper_profile([&](const std::string& name) { return app.get_option("--" + name)->count() > 0; });
        }
        if (run->parsed() || bench->parsed()) require_seed(app, run->parsed() ? "run" : "bench");
        if ((build->parsed() || train->parsed()) && (cfg.encoder || train->parsed())) {
            require_seed(app, build->parsed() ? "build-graph" : "train-encoder");
        }
        if (level >= Verbosity::Debug) std::cerr << config_snapshot(cfg);

        if (build->parsed()) return cmd_build_graph(cfg, log);
        if (train->parsed()) return cmd_train_encoder(cfg, log);
        if (diffuse->parsed()) return cmd_diffuse(cfg, graph_path, log);
        if (run->parsed()) return cmd_run(cfg, log);
        if (bench->parsed()) return cmd_bench(cfg, bo, log);
        if (oracle->parsed()) return cmd_oracle(cfg, graph_path);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "hgdiff: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
