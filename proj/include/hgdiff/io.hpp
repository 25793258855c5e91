#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "hgdiff/error.hpp"
#include "hgdiff/hypergraph.hpp"
#include "hgdiff/modality.hpp"

namespace hgdiff {

/// Comma-separated table with a header row. Cells are trimmed; quoting is not
/// supported.
struct CsvTable {
    std::string path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line;  ///< 1-based source line of each row

    std::string where(std::size_t r) const { return path + ":" + std::to_string(line[r]); }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

inline std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char* first = s.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline bool looks_missing(const std::string& s) {
    std::string l = s;
    std::transform(l.begin(), l.end(), l.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return l.empty() || l == "nan" || l == "na" || l == "null";
}

}  // namespace detail

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument(path + ": cannot open file");
    CsvTable t;
    t.path = path;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size()) {
            throw InvalidArgument(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                                  " columns, found " + std::to_string(cells.size()));
        }
        t.rows.push_back(std::move(cells));
        t.line.push_back(lineno);
    }
    if (t.header.empty()) throw InvalidArgument(path + ": missing header row");
    if (t.rows.empty()) throw InvalidArgument(path + ": no data rows");
    return t;
}

/// Node ids sorted numerically when all are integers, lexicographically otherwise.
inline void sort_node_ids(std::vector<std::string>& ids) {
    bool numeric = true;
    for (const auto& s : ids) {
        long long v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        numeric = numeric && ec == std::errc() && ptr == s.data() + s.size();
    }
    if (numeric) {
        std::sort(ids.begin(), ids.end(), [](const std::string& a, const std::string& b) {
            return std::stoll(a) < std::stoll(b);
        });
    } else {
        std::sort(ids.begin(), ids.end());
    }
}

struct Dataset {
    std::vector<std::string> ids;  ///< canonical node order
    std::vector<ModalityTable> modalities;
    LabelState given;
    std::optional<std::vector<int>> truth;
    std::vector<std::vector<std::string>> category_levels;  ///< per modality; empty unless categorical

    std::size_t size() const { return ids.size(); }
};

struct ModalitySource {
    std::string path;
    ModalityKind kind = ModalityKind::ImagingEmbedding;
    bool categorical = false;  ///< phenotypic only; non-numeric columns are categorical regardless
};

namespace detail {

inline std::map<std::string, std::size_t> index_ids(const CsvTable& t, const std::map<std::string, std::size_t>* reference) {
    std::map<std::string, std::size_t> pos;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& id = t.rows[r][0];
        if (id.empty()) throw InvalidArgument(t.where(r) + ": empty node_id");
        if (reference && !reference->count(id)) throw InvalidArgument(t.where(r) + ": unknown node_id '" + id + "'");
        if (!pos.emplace(id, r).second) throw InvalidArgument(t.where(r) + ": duplicate node_id '" + id + "'");
    }
    return pos;
}

inline std::vector<int> read_label_column(const std::string& path, const std::map<std::string, std::size_t>& order,
                                          std::size_t n) {
    const auto t = read_csv(path);
    if (t.header.size() != 2) throw InvalidArgument(path + ": expected columns node_id,label");
    std::vector<int> labels(n, -1);
    std::set<std::string> seen;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& id = t.rows[r][0];
        auto it = order.find(id);
        if (it == order.end()) throw InvalidArgument(t.where(r) + ": unknown node_id '" + id + "'");
        if (!seen.insert(id).second) throw InvalidArgument(t.where(r) + ": duplicate node_id '" + id + "'");
        const auto v = parse_number(t.rows[r][1]);
        if (!v || *v != std::round(*v) || *v < -1) {
            throw InvalidArgument(t.where(r) + ": label must be an integer >= -1, got '" + t.rows[r][1] + "'");
        }
        labels[it->second] = static_cast<int>(*v);
    }
    return labels;
}

}  // namespace detail

/**
 * Loads modality tables and labels, joined on node_id. The node order is the
 * sorted id set of the first modality; every other file must list exactly the
 * same ids in any order. Labels may omit nodes (treated as unlabeled);
 * num_classes = 0 infers max label + 1. An empty labels path loads features
 * only (no truth either).
 */
inline Dataset load_dataset(const std::vector<ModalitySource>& sources, const std::string& labels_path,
                            const std::string& truth_path = "", int num_classes = 0) {
    if (sources.empty()) throw InvalidArgument("load_dataset: no modality files");
    Dataset ds;
    std::vector<CsvTable> tables;
    for (const auto& src : sources) tables.push_back(read_csv(src.path));

    for (const auto& row : tables[0].rows) ds.ids.push_back(row[0]);
    detail::index_ids(tables[0], nullptr);
    sort_node_ids(ds.ids);
    std::map<std::string, std::size_t> order;
    for (std::size_t i = 0; i < ds.ids.size(); ++i) order[ds.ids[i]] = i;
    const std::size_t n = ds.ids.size();

    for (std::size_t m = 0; m < sources.size(); ++m) {
        const auto& t = tables[m];
        const auto& src = sources[m];
        if (t.rows.size() != n) {
            throw InvalidArgument(t.path + ": row-count mismatch (" + std::to_string(t.rows.size()) + " rows, expected " +
                                  std::to_string(n) + ")");
        }
        const auto pos = detail::index_ids(t, &order);
        const std::size_t p = t.header.size() - 1;
        if (p == 0) throw InvalidArgument(t.path + ": no feature columns");
        std::string name = std::filesystem::path(t.path).stem().string();

        if (src.kind == ModalityKind::ImagingEmbedding) {
            Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
            for (const auto& [id, r] : pos) {
                for (std::size_t j = 0; j < p; ++j) {
                    const auto& cell = t.rows[r][j + 1];
                    const auto v = detail::parse_number(cell);
                    if (detail::looks_missing(cell) || !v || !std::isfinite(*v)) {
                        throw InvalidArgument(t.where(r) + ": non-numeric or missing value '" + cell + "' in column '" +
                                              t.header[j + 1] + "'");
                    }
                    X(static_cast<Eigen::Index>(order.at(id)), static_cast<Eigen::Index>(j)) = *v;
                }
            }
            ds.modalities.push_back(ModalityTable::imaging(name, std::move(X)));
            ds.category_levels.emplace_back();
            continue;
        }

        if (p != 1) throw InvalidArgument(t.path + ": phenotypic file must have exactly one measure column");
        name = t.header[1];
        std::vector<std::string> cells(n);
        bool numeric = true;
        for (const auto& [id, r] : pos) {
            const auto& cell = t.rows[r][1];
            if (detail::looks_missing(cell)) throw InvalidArgument(t.where(r) + ": missing value in column '" + name + "'");
            const auto v = detail::parse_number(cell);
            numeric = numeric && v && std::isfinite(*v);
            cells[order.at(id)] = cell;
        }
        if (numeric && !src.categorical) {
            std::vector<double> vals(n);
            for (std::size_t i = 0; i < n; ++i) vals[i] = *detail::parse_number(cells[i]);
            ds.modalities.push_back(ModalityTable::phenotypic_numeric(name, vals));
            ds.category_levels.emplace_back();
            continue;
        }
        std::vector<std::string> levels(cells.begin(), cells.end());
        if (numeric) {
            std::sort(levels.begin(), levels.end(), [](const std::string& a, const std::string& b) {
                return *detail::parse_number(a) < *detail::parse_number(b);
            });
            levels.erase(std::unique(levels.begin(), levels.end(), [](const std::string& a, const std::string& b) {
                             return *detail::parse_number(a) == *detail::parse_number(b);
                         }),
                         levels.end());
        } else {
            std::sort(levels.begin(), levels.end());
            levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
        }
        std::vector<int> codes(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto it = std::find_if(levels.begin(), levels.end(), [&](const std::string& l) {
                if (numeric) return *detail::parse_number(l) == *detail::parse_number(cells[i]);
                return l == cells[i];
            });
            codes[i] = static_cast<int>(it - levels.begin());
        }
        ds.modalities.push_back(ModalityTable::phenotypic_categorical(name, codes));
        ds.category_levels.push_back(std::move(levels));
    }

    if (labels_path.empty()) {
        ds.given = LabelState(n, std::max(2, num_classes));
        return ds;
    }
    auto labels = detail::read_label_column(labels_path, order, n);
    int max_label = -1;
    for (int l : labels) max_label = std::max(max_label, l);
    if (max_label < 0) throw InvalidArgument(labels_path + ": no labeled nodes");
    const int L = num_classes > 0 ? num_classes : std::max(2, max_label + 1);
    if (max_label >= L) throw InvalidArgument(labels_path + ": label " + std::to_string(max_label) + " >= class count");
    ds.given = LabelState::from_given(labels, L);

    if (!truth_path.empty()) {
        auto truth = detail::read_label_column(truth_path, order, n);
        for (std::size_t i = 0; i < n; ++i) {
            if (truth[i] < 0) throw InvalidArgument(truth_path + ": node '" + ds.ids[i] + "' has no ground-truth label");
            if (truth[i] >= L) throw InvalidArgument(truth_path + ": truth label out of class range");
        }
        ds.truth = std::move(truth);
    }
    return ds;
}

/// Writes `content` to `path` through a temporary file and a rename, so a
/// failed run never leaves a truncated file behind.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
        if (!out) throw Error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument(path + ": cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Hypergraph load_hypergraph(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(path + ": " + e.what());
    }
    return hypergraph_from_json(j);
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string label_source(const LabelState& labels, std::size_t i) {
    switch (labels[i].status) {
        case LabelStatus::Given: return "given";
        case LabelStatus::Pseudo: return "pseudo";
        default: return "inferred";
    }
}

/// node_id,predicted_class,gamma,source
inline std::string predictions_csv(const std::vector<std::string>& ids, const std::vector<int>& prediction,
                                   const std::vector<double>& gamma, const LabelState& labels) {
    std::string out = "node_id,predicted_class,gamma,source\n";
    char buf[64];
    for (std::size_t i = 0; i < ids.size(); ++i) {
        std::snprintf(buf, sizeof buf, ",%d,%.6f,", prediction[i], gamma[i]);
        out += ids[i] + buf + label_source(labels, i) + "\n";
    }
    return out;
}

}  // namespace hgdiff
