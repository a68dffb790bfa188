#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "cct/errors.hpp"

namespace cct {

// ---------------------------------------------------------------------------
// exact rational scalar
// ---------------------------------------------------------------------------

// Confusion-derived metrics are ratios of small integers; keeping them as
// reduced fractions makes identities like tpr + fnr = 1 hold exactly and
// defers rounding to the rendering step.
struct Fraction {
    long long num = 0;
    long long den = 1;

    static Fraction of(long long n, long long d) {
        if (d == 0) throw NumericError("fraction: zero denominator");
        if (d < 0) {
            n = -n;
            d = -d;
        }
        const long long g = std::gcd(n < 0 ? -n : n, d);
        if (g > 1) {
            n /= g;
            d /= g;
        }
        return Fraction{n, d};
    }

    static Fraction from_i128(__int128 n, __int128 d) {
        if (d == 0) throw NumericError("fraction: zero denominator");
        if (d < 0) {
            n = -n;
            d = -d;
        }
        __int128 a = n < 0 ? -n : n;
        __int128 b = d;
        while (b != 0) {
            __int128 t = a % b;
            a = b;
            b = t;
        }
        if (a > 1) {
            n /= a;
            d /= a;
        }
        const auto lim = static_cast<__int128>(std::numeric_limits<long long>::max());
        if (n > lim || n < -lim || d > lim) {
            throw NumericError("fraction: overflow after reduction");
        }
        return Fraction{static_cast<long long>(n), static_cast<long long>(d)};
    }

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }

    Fraction operator+(const Fraction& o) const {
        return from_i128(static_cast<__int128>(num) * o.den + static_cast<__int128>(o.num) * den,
                         static_cast<__int128>(den) * o.den);
    }
    Fraction operator-(const Fraction& o) const {
        return from_i128(static_cast<__int128>(num) * o.den - static_cast<__int128>(o.num) * den,
                         static_cast<__int128>(den) * o.den);
    }
    Fraction operator*(const Fraction& o) const {
        return from_i128(static_cast<__int128>(num) * o.num,
                         static_cast<__int128>(den) * o.den);
    }
    Fraction divided_by(long long k) const {
        return from_i128(num, static_cast<__int128>(den) * k);
    }
    bool operator==(const Fraction& o) const { return num == o.num && den == o.den; }
};

// Percent with two decimals, rounding half to even (banker's), e.g. 99/100
// renders "99.00".
inline std::string render_pct(const Fraction& f) {
    __int128 scaled = static_cast<__int128>(f.num) * 10000;  // hundredths of a percent
    const bool neg = scaled < 0;
    if (neg) scaled = -scaled;
    const __int128 d = f.den;
    __int128 q = scaled / d;
    const __int128 r = scaled % d;
    if (2 * r > d || (2 * r == d && (q % 2) == 1)) ++q;
    const long long whole = static_cast<long long>(q / 100);
    const long long cents = static_cast<long long>(q % 100);
    std::string out = neg && (whole || cents) ? "-" : "";
    out += std::to_string(whole);
    out += '.';
    if (cents < 10) out += '0';
    out += std::to_string(cents);
    return out;
}

// ---------------------------------------------------------------------------
// confusion matrix
// ---------------------------------------------------------------------------

struct ConfusionMatrix {
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
    long long tn = 0;

    long long total() const { return tp + fp + fn + tn; }

    ConfusionMatrix operator+(const ConfusionMatrix& o) const {
        return {tp + o.tp, fp + o.fp, fn + o.fn, tn + o.tn};
    }
};

// Standard definitions: TP/TN count correct predictions per class, FP counts
// negatives predicted positive, FN positives predicted negative.
template <typename C>
ConfusionMatrix confusion(const std::vector<C>& predictions, const std::vector<C>& labels,
                          const C& positive_category) {
    if (predictions.empty()) throw UsageError("confusion: empty input");
    if (predictions.size() != labels.size()) {
        throw UsageError("confusion: " + std::to_string(predictions.size()) +
                         " predictions vs " + std::to_string(labels.size()) + " labels");
    }
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const bool actual_pos = labels[i] == positive_category;
        const bool pred_pos = predictions[i] == positive_category;
        if (actual_pos && pred_pos) ++cm.tp;
        else if (!actual_pos && pred_pos) ++cm.fp;
        else if (actual_pos && !pred_pos) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

// ---------------------------------------------------------------------------
// ROC curve
// ---------------------------------------------------------------------------

struct RocPoint {
    double threshold;  // classify as positive when score >= threshold
    long long fp = 0;  // cumulative counts at this threshold
    long long tp = 0;
};

struct RocCurve {
    std::vector<RocPoint> points;  // starts at (0,0) with threshold +inf
    long long num_pos = 0;
    long long num_neg = 0;

    double fpr(std::size_t i) const {
        return static_cast<double>(points[i].fp) / static_cast<double>(num_neg);
    }
    double tpr(std::size_t i) const {
        return static_cast<double>(points[i].tp) / static_cast<double>(num_pos);
    }
};

// Threshold sweep over the distinct score values descending; tied scores
// grouped at one threshold. labels: 1 positive, 0 negative.
inline RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.empty() || scores.size() != labels.size()) {
        throw UsageError("roc_curve: need equally many scores and labels");
    }
    RocCurve curve;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) {
            throw DataError("roc_curve: non-finite score at index " + std::to_string(i));
        }
        if (labels[i] == 1) ++curve.num_pos;
        else if (labels[i] == 0) ++curve.num_neg;
        else throw DataError("roc_curve: labels must be 0 or 1");
    }
    if (curve.num_pos == 0 || curve.num_neg == 0) {
        throw DataError("roc_curve: degenerate input, only one category present");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    curve.points.push_back({std::numeric_limits<double>::infinity(), 0, 0});
    long long tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double t = scores[order[i]];
        while (i < order.size() && scores[order[i]] == t) {
            if (labels[order[i]] == 1) ++tp;
            else ++fp;
            ++i;
        }
        curve.points.push_back({t, fp, tp});
    }
    return curve;
}

// Trapezoidal area under the curve, computed exactly on the cumulative
// counts. Equals the tie-adjusted pairwise probability
// P(score_pos > score_neg) + 0.5 P(equal).
inline Fraction auc(const RocCurve& curve) {
    __int128 twice_area = 0;  // in units of 1/(num_pos*num_neg)
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        twice_area += static_cast<__int128>(b.fp - a.fp) * (b.tp + a.tp);
    }
    return Fraction::from_i128(twice_area,
                               static_cast<__int128>(2) * curve.num_pos * curve.num_neg);
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct MetricsReport {
    ConfusionMatrix cm{};
    Fraction accuracy, precision, recall, f1, auc_roc, tpr, fpr, fnr, tnr;
    std::vector<std::string> undefined;  // metrics whose denominator was zero
    std::vector<std::string> warnings;

    bool has_roc = false;
    RocCurve roc;

    // macro block: unweighted mean of the per-class metric (positive class
    // and negative class each scored as "positive")
    bool has_macro = false;
    Fraction macro_precision, macro_recall, macro_f1;
};

namespace detail {

inline Fraction ratio_or_zero(long long num, long long den, const char* name,
                              std::vector<std::string>& undefined) {
    if (den == 0) {
        undefined.push_back(name);
        return Fraction{0, 1};
    }
    return Fraction::of(num, den);
}

}  // namespace detail

// All scalar formulas evaluated exactly from the counts. Zero-denominator
// metrics come back as 0 and are listed in `undefined`.
inline MetricsReport scalar_metrics(const ConfusionMatrix& cm) {
    if (cm.total() <= 0) throw UsageError("scalar_metrics: empty confusion matrix");
    MetricsReport r;
    r.cm = cm;
    auto& u = r.undefined;
    r.accuracy = Fraction::of(cm.tp + cm.tn, cm.total());
    r.precision = detail::ratio_or_zero(cm.tp, cm.tp + cm.fp, "precision", u);
    r.recall = detail::ratio_or_zero(cm.tp, cm.tp + cm.fn, "recall", u);
    r.f1 = detail::ratio_or_zero(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn, "f1", u);
    r.tpr = detail::ratio_or_zero(cm.tp, cm.tp + cm.fn, "tpr", u);
    r.fpr = detail::ratio_or_zero(cm.fp, cm.fp + cm.tn, "fpr", u);
    r.fnr = detail::ratio_or_zero(cm.fn, cm.tp + cm.fn, "fnr", u);
    r.tnr = detail::ratio_or_zero(cm.tn, cm.tn + cm.fp, "tnr", u);

    // macro: average the positive-class view with the label-swapped view
    const ConfusionMatrix sw{cm.tn, cm.fn, cm.fp, cm.tp};
    std::vector<std::string> ignored;
    const Fraction p2 = detail::ratio_or_zero(sw.tp, sw.tp + sw.fp, "p", ignored);
    const Fraction r2 = detail::ratio_or_zero(sw.tp, sw.tp + sw.fn, "r", ignored);
    const Fraction f2 = detail::ratio_or_zero(2 * sw.tp, 2 * sw.tp + sw.fp + sw.fn, "f", ignored);
    r.has_macro = true;
    r.macro_precision = (r.precision + p2).divided_by(2);
    r.macro_recall = (r.recall + r2).divided_by(2);
    r.macro_f1 = (r.f1 + f2).divided_by(2);
    return r;
}

// Unweighted arithmetic mean of each scalar metric; confusion matrices are
// summed. ROC curves are reported per fold, never aggregated.
inline MetricsReport aggregate_folds(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) throw UsageError("aggregate_folds: empty report list");
    MetricsReport agg;
    const long long k = static_cast<long long>(reports.size());
    auto mean_of = [&](Fraction MetricsReport::* field) {
        Fraction sum{0, 1};
        for (const auto& r : reports) sum = sum + r.*field;
        return sum.divided_by(k);
    };
    agg.accuracy = mean_of(&MetricsReport::accuracy);
    agg.precision = mean_of(&MetricsReport::precision);
    agg.recall = mean_of(&MetricsReport::recall);
    agg.f1 = mean_of(&MetricsReport::f1);
    agg.auc_roc = mean_of(&MetricsReport::auc_roc);
    agg.tpr = mean_of(&MetricsReport::tpr);
    agg.fpr = mean_of(&MetricsReport::fpr);
    agg.fnr = mean_of(&MetricsReport::fnr);
    agg.tnr = mean_of(&MetricsReport::tnr);
    agg.has_macro = std::all_of(reports.begin(), reports.end(),
                                [](const MetricsReport& r) { return r.has_macro; });
    if (agg.has_macro) {
        agg.macro_precision = mean_of(&MetricsReport::macro_precision);
        agg.macro_recall = mean_of(&MetricsReport::macro_recall);
        agg.macro_f1 = mean_of(&MetricsReport::macro_f1);
    }
    for (const auto& r : reports) {
        agg.cm = agg.cm + r.cm;
        for (const auto& name : r.undefined) {
            if (std::find(agg.undefined.begin(), agg.undefined.end(), name) ==
                agg.undefined.end()) {
                agg.undefined.push_back(name);
            }
        }
    }
    return agg;
}

}  // namespace cct
