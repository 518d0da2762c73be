#include "modfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "modfuse/errors.hpp"

namespace modfuse {

namespace {

std::vector<std::size_t> descending_rank_order(const std::vector<double>& scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

void check_inputs(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) {
        raise(ErrorKind::LengthMismatch, std::to_string(scores.size()) + " scores vs " +
                                             std::to_string(labels.size()) + " labels");
    }
    bool any_positive = false;
    for (const int label : labels) {
        if (label != 0) any_positive = true;
    }
    if (!any_positive) {
        raise(ErrorKind::NoPositives, "average precision needs at least one positive label");
    }
}

// two-sided Student-t critical values; rows: level, cols: df 1..30
constexpr double kT95[30] = {12.7062, 4.30265, 3.18245, 2.77645, 2.57058, 2.44691, 2.36462,
                             2.30600, 2.26216, 2.22814, 2.20099, 2.17881, 2.16037, 2.14479,
                             2.13145, 2.11991, 2.10982, 2.10092, 2.09302, 2.08596, 2.07961,
                             2.07387, 2.06866, 2.06390, 2.05954, 2.05553, 2.05183, 2.04841,
                             2.04523, 2.04227};
constexpr double kT90[30] = {6.31375, 2.91999, 2.35336, 2.13185, 2.01505, 1.94318, 1.89458,
                             1.85955, 1.83311, 1.81246, 1.79588, 1.78229, 1.77093, 1.76131,
                             1.75305, 1.74588, 1.73961, 1.73406, 1.72913, 1.72472, 1.72074,
                             1.71714, 1.71387, 1.71088, 1.70814, 1.70562, 1.70329, 1.70113,
                             1.69913, 1.69726};
constexpr double kT99[30] = {63.6567, 9.92484, 5.84091, 4.60409, 4.03214, 3.70743, 3.49948,
                             3.35539, 3.24984, 3.16927, 3.10581, 3.05454, 3.01228, 2.97684,
                             2.94671, 2.92078, 2.89823, 2.87844, 2.86093, 2.84534, 2.83136,
                             2.81876, 2.80734, 2.79694, 2.78744, 2.77871, 2.77068, 2.76326,
                             2.75639, 2.75000};

double t_critical(int df, double level) {
    const double* table = nullptr;
    double asymptote = 0.0;
    if (level == 0.95) {
        table = kT95;
        asymptote = 1.95996;
    } else if (level == 0.90) {
        table = kT90;
        asymptote = 1.64485;
    } else if (level == 0.99) {
        table = kT99;
        asymptote = 2.57583;
    } else {
        raise(ErrorKind::InvalidConfig, "supported confidence levels: 0.90, 0.95, 0.99");
    }
    if (df <= 30) return table[df - 1];
    return asymptote;
}

}  // namespace

double auc_pr(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_inputs(scores, labels);
    const auto order = descending_rank_order(scores);
    std::int64_t positives_total = 0;
    for (const int label : labels) positives_total += label != 0 ? 1 : 0;

    double sum = 0.0;
    std::int64_t positives_seen = 0;
    for (std::size_t rank = 1; rank <= order.size(); ++rank) {
        if (labels[order[rank - 1]] != 0) {
            ++positives_seen;
            sum += static_cast<double>(positives_seen) / static_cast<double>(rank);
        }
    }
    return sum / static_cast<double>(positives_total);
}

PRCurve pr_curve(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_inputs(scores, labels);
    const auto order = descending_rank_order(scores);
    std::int64_t positives_total = 0;
    for (const int label : labels) positives_total += label != 0 ? 1 : 0;

    PRCurve curve;
    std::int64_t positives_seen = 0;
    for (std::size_t rank = 1; rank <= order.size(); ++rank) {
        if (labels[order[rank - 1]] != 0) ++positives_seen;
        const double precision =
            static_cast<double>(positives_seen) / static_cast<double>(rank);
        const double recall =
            static_cast<double>(positives_seen) / static_cast<double>(positives_total);
        if (rank == 1) {
            curve.points.push_back({0.0, precision});
        }
        curve.points.push_back({recall, precision});
    }
    return curve;
}

double pr_curve_step_area(const PRCurve& curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        area += (curve.points[i].recall - curve.points[i - 1].recall) * curve.points[i].precision;
    }
    return area;
}

double mean_of(const std::vector<double>& values) {
    double sum = 0.0;
    for (const double v : values) sum += v;
    return values.empty() ? 0.0 : sum / static_cast<double>(values.size());
}

ConfidenceInterval fold_ci(const std::vector<double>& values, double level) {
    const int n = static_cast<int>(values.size());
    if (n < 2) {
        raise(ErrorKind::TooFewFolds, "confidence interval needs >= 2 fold values");
    }
    const double mean = mean_of(values);
    double ssd = 0.0;
    for (const double v : values) ssd += (v - mean) * (v - mean);
    const double sd = std::sqrt(ssd / static_cast<double>(n - 1));
    const double half = t_critical(n - 1, level) * sd / std::sqrt(static_cast<double>(n));

    ConfidenceInterval ci;
    const double raw_low = mean - half;
    const double raw_high = mean + half;
    ci.low = std::max(0.0, raw_low);
    ci.high = std::min(1.0, raw_high);
    ci.clamped = raw_low < 0.0 || raw_high > 1.0;
    return ci;
}

std::pair<std::int64_t, std::int64_t> attribution_error_counts(
    const std::map<std::string, double>& predictions, const LabeledView& cmsd_view,
    const LabeledView& cmad_view, double threshold) {
    std::map<std::string, LabelKind> cmad_labels;
    for (const auto& entry : cmad_view.entries) cmad_labels[entry.clip_id] = entry.label;

    std::int64_t numerator = 0;
    std::int64_t denominator = 0;
    for (const auto& entry : cmsd_view.entries) {
        if (entry.label != LabelKind::Negative) continue;
        const auto cmad_it = cmad_labels.find(entry.clip_id);
        if (cmad_it == cmad_labels.end() || cmad_it->second != LabelKind::Positive) continue;
        // positive under CMAD, negative under this CMSD: an other-modality positive
        const auto pred_it = predictions.find(entry.clip_id);
        if (pred_it == predictions.end()) {
            raise(ErrorKind::MissingEntry,
                  "no prediction for clip '" + entry.clip_id + "' in attribution check");
        }
        ++denominator;
        if (pred_it->second >= threshold) ++numerator;
    }
    return {numerator, denominator};
}

std::optional<double> attribution_error_rate(const std::map<std::string, double>& predictions,
                                             const LabeledView& cmsd_view,
                                             const LabeledView& cmad_view, double threshold) {
    const auto [numerator, denominator] =
        attribution_error_counts(predictions, cmsd_view, cmad_view, threshold);
    if (denominator == 0) {
        return std::nullopt;
    }
    return static_cast<double>(numerator) / static_cast<double>(denominator);
}

}  // namespace modfuse
