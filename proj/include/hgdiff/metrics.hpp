#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "hgdiff/error.hpp"

namespace hgdiff {

/// A rate whose denominator may be zero; std::nullopt is the undefined marker.
using Rate = std::optional<double>;

inline std::string format_rate(const Rate& r, int precision = 6) {
    if (!r) return "undefined";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, *r);
    return buf;
}

struct MetricsReport {
    Rate acc;
    Rate sen;  ///< for the positive class
    Rate ppv;  ///< for the positive class
    std::vector<Rate> sen_per_class;
    std::vector<Rate> ppv_per_class;
    Rate error_rate;
};

/// ACC, and one-vs-rest SEN = TP/(TP+FN) and PPV = TP/(TP+FP) for every class
/// seen in either vector; the headline SEN/PPV are those of positive_class.
inline MetricsReport metrics(const std::vector<int>& y_true, const std::vector<int>& y_pred, int positive_class) {
    if (y_true.size() != y_pred.size()) throw InvalidArgument("metrics: length mismatch");
    int classes = positive_class + 1;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] < 0 || y_pred[i] < 0) throw InvalidArgument("metrics: negative class label");
        classes = std::max({classes, y_true[i] + 1, y_pred[i] + 1});
    }
    MetricsReport r;
    const auto total = static_cast<double>(y_true.size());
    std::size_t correct = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) correct += y_true[i] == y_pred[i] ? 1 : 0;
    if (total > 0) {
        r.acc = static_cast<double>(correct) / total;
        r.error_rate = 1.0 - *r.acc;
    }
    for (int c = 0; c < classes; ++c) {
        std::size_t tp = 0, fn = 0, fp = 0;
        for (std::size_t i = 0; i < y_true.size(); ++i) {
            const bool t = y_true[i] == c, p = y_pred[i] == c;
            tp += t && p;
            fn += t && !p;
            fp += !t && p;
        }
        r.sen_per_class.push_back(tp + fn ? Rate(static_cast<double>(tp) / static_cast<double>(tp + fn)) : std::nullopt);
        r.ppv_per_class.push_back(tp + fp ? Rate(static_cast<double>(tp) / static_cast<double>(tp + fp)) : std::nullopt);
    }
    r.sen = r.sen_per_class[static_cast<std::size_t>(positive_class)];
    r.ppv = r.ppv_per_class[static_cast<std::size_t>(positive_class)];
    return r;
}

struct MeanCI {
    double mean = 0.0;
    double half_width = 0.0;  ///< 1.96 * sample sd / sqrt(reps); 0 for one repetition
};

inline MeanCI mean_ci(const std::vector<double>& values) {
    if (values.empty()) throw InvalidArgument("mean_ci: no repetitions");
    MeanCI out;
    for (double v : values) out.mean += v;
    out.mean /= static_cast<double>(values.size());
    if (values.size() < 2) return out;
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    out.half_width = 1.96 * sd / std::sqrt(static_cast<double>(values.size()));
    return out;
}

}  // namespace hgdiff
