#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "modfuse/splits.hpp"

namespace modfuse {

struct PRPoint {
    double recall = 0.0;
    double precision = 0.0;
};

struct PRCurve {
    std::vector<PRPoint> points;  // recall non-decreasing, anchored at recall 0
};

struct ConfidenceInterval {
    double low = 0.0;
    double high = 0.0;
    bool clamped = false;  // true when the raw interval left [0, 1]
};

// Average precision: scores are ranked descending (ties broken by original
// index, stable), and AP is the mean of precision-at-rank over the positive
// ranks. Step-wise, no interpolation.
double auc_pr(const std::vector<double>& scores, const std::vector<int>& labels);

// One point per rank of the descending sweep (the tie rule makes each rank a
// distinct threshold), anchored at (0, precision at rank 1). The step area
// under the curve equals auc_pr.
PRCurve pr_curve(const std::vector<double>& scores, const std::vector<int>& labels);

double pr_curve_step_area(const PRCurve& curve);

// Student-t interval over per-fold metric values, clamped to [0, 1].
// Supported levels: 0.90, 0.95, 0.99.
ConfidenceInterval fold_ci(const std::vector<double>& values, double level = 0.95);

double mean_of(const std::vector<double>& values);

// Among clips that CMAD labels positive but this model's CMSD labels
// negative (positives of other modalities), the fraction scored positive at
// the threshold. Empty denominator yields nullopt.
std::optional<double> attribution_error_rate(const std::map<std::string, double>& predictions,
                                             const LabeledView& cmsd_view,
                                             const LabeledView& cmad_view,
                                             double threshold = 0.5);

// Numerator/denominator form, for pooling across folds.
std::pair<std::int64_t, std::int64_t> attribution_error_counts(
    const std::map<std::string, double>& predictions, const LabeledView& cmsd_view,
    const LabeledView& cmad_view, double threshold = 0.5);

}  // namespace modfuse
