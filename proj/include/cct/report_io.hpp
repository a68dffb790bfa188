#pragma once

#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cct/encoding.hpp"
#include "cct/metrics.hpp"

namespace cct {

inline constexpr const char* kReportFormat = "cct-metrics-report/1";

// Flat JSON form of a metrics report: every scalar on the 0-1 scale as a
// number and on the 0-100 scale as an exactly-rendered 2-decimal string,
// plus the confusion matrix. `run` carries the replay manifest.
inline nlohmann::ordered_json report_to_json_object(
    const MetricsReport& report, const nlohmann::ordered_json& run = nullptr) {
    nlohmann::ordered_json j;
    j["format"] = kReportFormat;
    if (!run.is_null()) j["run"] = run;
    j["confusion_matrix"] = {{"tp", report.cm.tp},
                             {"fp", report.cm.fp},
                             {"fn", report.cm.fn},
                             {"tn", report.cm.tn}};
    const std::pair<const char*, const Fraction*> scalars[] = {
        {"accuracy", &report.accuracy}, {"precision", &report.precision},
        {"recall", &report.recall},     {"f1", &report.f1},
        {"auc_roc", &report.auc_roc},   {"tpr", &report.tpr},
        {"fpr", &report.fpr},           {"fnr", &report.fnr},
        {"tnr", &report.tnr}};
    nlohmann::ordered_json unit, pct;
    for (const auto& [name, frac] : scalars) {
        unit[name] = frac->value();
        pct[name] = render_pct(*frac);
    }
    j["metrics"] = unit;
    j["metrics_pct"] = pct;
    if (report.has_macro) {
        j["macro"] = {{"precision", report.macro_precision.value()},
                      {"recall", report.macro_recall.value()},
                      {"f1", report.macro_f1.value()}};
    }
    j["undefined"] = report.undefined;
    j["warnings"] = report.warnings;
    j["has_roc"] = report.has_roc;
    return j;
}

inline std::string report_to_json(const MetricsReport& report,
                                  const nlohmann::ordered_json& run = nullptr) {
    return report_to_json_object(report, run).dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// ROC CSV: threshold,fpr,tpr — one row per curve point
// ---------------------------------------------------------------------------

inline std::string roc_to_csv(const RocCurve& curve, const std::string& run_comment = "") {
    std::ostringstream out;
    if (!run_comment.empty()) out << "# " << run_comment << "\n";
    out << "threshold,fpr,tpr\n";
    for (std::size_t i = 0; i < curve.points.size(); ++i) {
        const double t = curve.points[i].threshold;
        out << (std::isinf(t) ? "inf" : fmt_double(t)) << ',' << fmt_double(curve.fpr(i)) << ','
            << fmt_double(curve.tpr(i)) << "\n";
    }
    return out.str();
}

// Parsed back as plain (threshold, fpr, tpr) rows for plotting; the count
// denominators are not recoverable from the CSV.
struct RocCsvRow {
    double threshold;
    double fpr;
    double tpr;
};

inline std::vector<RocCsvRow> roc_from_csv(const std::string& text) {
    std::vector<RocCsvRow> rows;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (!saw_header) {
            if (line != "threshold,fpr,tpr") {
                throw DataError("roc csv line " + std::to_string(line_no) +
                                ": unexpected header '" + line + "'");
            }
            saw_header = true;
            continue;
        }
        std::istringstream row(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (cells.size() != 3) {
            throw DataError("roc csv line " + std::to_string(line_no) + ": expected 3 cells");
        }
        RocCsvRow r;
        try {
            r.threshold = cells[0] == "inf" ? std::numeric_limits<double>::infinity()
                                            : parse_double(cells[0]);
            r.fpr = parse_double(cells[1]);
            r.tpr = parse_double(cells[2]);
        } catch (const CctError& e) {
            throw DataError("roc csv line " + std::to_string(line_no) + ": " + e.what());
        }
        rows.push_back(r);
    }
    if (!saw_header) throw DataError("roc csv: missing header");
    return rows;
}

}  // namespace cct
