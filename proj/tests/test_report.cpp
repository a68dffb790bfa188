#include <catch2/catch_amalgamated.hpp>

#include <string>

#include "cct/json_schema.hpp"
#include "cct/report_io.hpp"
#include "cct/svg.hpp"
#include "cct/run_config.hpp"
#include "cct/trainer.hpp"
#include "test_support.hpp"

namespace {

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
    std::size_t n = 0, at = 0;
    while ((at = text.find(needle, at)) != std::string::npos) {
        ++n;
        at += needle.size();
    }
    return n;
}

nlohmann::json shipped_schema() {
    return nlohmann::json::parse(
        testsup::read_file(std::string(CCT_SOURCE_DIR) + "/schemas/report.schema.json"));
}

}  // namespace

TEST_CASE("report json carries both scales and validates against the shipped schema") {
    auto report = cct::scalar_metrics({198, 2, 2, 198});
    report.roc = cct::roc_curve({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
    report.auc_roc = cct::auc(report.roc);
    report.has_roc = true;

    nlohmann::ordered_json run;
    run["version"] = "test";
    const std::string text = cct::report_to_json(report, run);
    auto j = nlohmann::json::parse(text);

    REQUIRE(j["format"] == "cct-metrics-report/1");
    REQUIRE(j["confusion_matrix"]["tp"] == 198);
    REQUIRE(j["confusion_matrix"]["fp"] == 2);
    REQUIRE(j["metrics"]["accuracy"] == 0.99);
    REQUIRE(j["metrics_pct"]["accuracy"] == "99.00");
    REQUIRE(j["metrics_pct"]["fpr"] == "1.00");
    REQUIRE(j["metrics_pct"]["auc_roc"] == "100.00");
    REQUIRE(j["macro"].contains("precision"));
    REQUIRE(j["has_roc"] == true);

    const auto errors = cct::validate_json(shipped_schema(), j);
    CAPTURE(errors);
    REQUIRE(errors.empty());
}

TEST_CASE("schema validation flags structural defects") {
    const auto schema = shipped_schema();

    auto report = cct::scalar_metrics({3, 1, 2, 4});
    auto j = nlohmann::json::parse(cct::report_to_json(report));
    REQUIRE(cct::validate_json(schema, j).empty());

    auto missing = j;
    missing.erase("metrics");
    REQUIRE(!cct::validate_json(schema, missing).empty());

    auto extra = j;
    extra["surprise"] = 1;
    REQUIRE(!cct::validate_json(schema, extra).empty());

    auto wrong_type = j;
    wrong_type["metrics"]["accuracy"] = "high";
    REQUIRE(!cct::validate_json(schema, wrong_type).empty());

    REQUIRE_THROWS_AS(cct::validate_json_or_throw(schema, missing, "report"), cct::DataError);
}

TEST_CASE("roc csv has one row per curve point plus the header") {
    auto curve = cct::roc_curve({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1});
    const std::string csv = cct::roc_to_csv(curve, "run: test");
    // 4 distinct thresholds + 2 = header + 5 points, plus the comment line
    REQUIRE(count_occurrences(csv, "\n") == 1 + 1 + 5);
    REQUIRE(csv.find("threshold,fpr,tpr\n") != std::string::npos);
    REQUIRE(csv.find("inf,0,0\n") != std::string::npos);

    auto rows = cct::roc_from_csv(csv);
    REQUIRE(rows.size() == 5);
    REQUIRE(std::isinf(rows[0].threshold));
    REQUIRE(rows[4].fpr == 1.0);
    REQUIRE(rows[4].tpr == 1.0);

    REQUIRE_THROWS_MATCHES(cct::roc_from_csv("a,b\n"), cct::DataError,
                           Catch::Matchers::MessageMatches(
                               Catch::Matchers::ContainsSubstring("line 1")));
}

TEST_CASE("svg output is byte-stable and tracks its inputs") {
    cct::TrainHistory h;
    h.records.push_back({1, 0.7, 0.5, true, 0.72, 0.45, 0});
    h.records.push_back({2, 0.5, 0.8, true, 0.55, 0.7, 0});

    std::vector<cct::SvgSeries> series;
    cct::SvgSeries train{"train", "#1f77b4", {}};
    cct::SvgSeries val{"val", "#d62728", {}};
    for (const auto& r : h.records) {
        train.points.push_back({static_cast<double>(r.epoch), r.train_accuracy});
        val.points.push_back({static_cast<double>(r.epoch), r.val_accuracy});
    }
    series = {train, val};

    const std::string a = cct::svg_line_chart(series, "Accuracy vs. epochs", "epoch", "acc");
    const std::string b = cct::svg_line_chart(series, "Accuracy vs. epochs", "epoch", "acc");
    REQUIRE(a == b);
    // two data points per series, rendered as circles
    REQUIRE(count_occurrences(a, "<circle") == 4);
    REQUIRE(a.find("Accuracy vs. epochs") != std::string::npos);

    series[0].points[1].second = 0.81;
    const std::string c = cct::svg_line_chart(series, "Accuracy vs. epochs", "epoch", "acc");
    REQUIRE(a != c);
}

TEST_CASE("confusion heatmap labels the published fixture counts") {
    const std::string svg = cct::svg_confusion({198, 2, 2, 198});
    REQUIRE(count_occurrences(svg, ">198<") == 2);
    REQUIRE(count_occurrences(svg, ">2<") == 2);
    REQUIRE(svg.find(">TP<") != std::string::npos);
    REQUIRE(svg.find(">FN<") != std::string::npos);
    REQUIRE(svg.find("predicted") != std::string::npos);
    REQUIRE(svg.find("actual") != std::string::npos);

    const std::string again = cct::svg_confusion({198, 2, 2, 198});
    REQUIRE(svg == again);
}

TEST_CASE("roc svg draws the curve and the chance diagonal") {
    auto curve = cct::roc_curve({0.9, 0.3, 0.6, 0.2}, {1, 0, 1, 0});
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < curve.points.size(); ++i) {
        pts.push_back({curve.fpr(i), curve.tpr(i)});
    }
    const std::string svg = cct::svg_roc(pts, "run: fixture");
    REQUIRE(svg.find("run: fixture") != std::string::npos);
    REQUIRE(svg.find("stroke-dasharray") != std::string::npos);
    REQUIRE(count_occurrences(svg, "<polyline") == 2);
    REQUIRE(cct::svg_roc(pts, "run: fixture") == svg);
}

TEST_CASE("run config parses defaults and rejects unknown or malformed keys") {
    {
        auto cfg = cct::run_config_from_json_text("{}");
        REQUIRE(cfg.model.embed_dim == 512);
        REQUIRE(cfg.train.optimizer == "adamw");
        REQUIRE(cfg.train.learning_rate == 5e-4);
        REQUIRE(cfg.data.channels == cfg.model.in_channels);
    }
    {
        auto cfg = cct::run_config_from_json_text(
            R"({"model": {"image_size": [64, 48], "embed_dim": 16, "num_heads": 4,
                          "gelu": "tanh"},
                "train": {"epochs": 3, "precision": "fp32"},
                "data": {"train_manifest": "a.csv"}})");
        REQUIRE(cfg.model.image_h == 64);
        REQUIRE(cfg.model.image_w == 48);
        REQUIRE(cfg.model.gelu_tanh);
        REQUIRE(cfg.train.epochs == 3);
        REQUIRE(cfg.train.precision == "fp32");
        REQUIRE(cfg.data.train_manifest == "a.csv");
    }

    REQUIRE_THROWS_MATCHES(cct::run_config_from_json_text(R"({"mode": {}})"), cct::ConfigError,
                           Catch::Matchers::MessageMatches(
                               Catch::Matchers::ContainsSubstring("unknown key 'mode'")));
    REQUIRE_THROWS_MATCHES(
        cct::run_config_from_json_text(R"({"model": {"embed_dims": 8}})"), cct::ConfigError,
        Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("embed_dims")));
    REQUIRE_THROWS_AS(cct::run_config_from_json_text(R"({"train": {"lr": 0.1}})"),
                      cct::ConfigError);
    REQUIRE_THROWS_AS(cct::run_config_from_json_text(R"({"data": {"shuffle": true}})"),
                      cct::ConfigError);
    REQUIRE_THROWS_AS(cct::run_config_from_json_text(R"({"model": {"image_size": [3]}})"),
                      cct::ConfigError);
    REQUIRE_THROWS_AS(cct::run_config_from_json_text(R"({"model": {"gelu": "fast"}})"),
                      cct::ConfigError);
    REQUIRE_THROWS_AS(cct::run_config_from_json_text("not json"), cct::ConfigError);
    // embed_dim/num_heads divisibility is validated up front
    REQUIRE_THROWS_AS(
        cct::run_config_from_json_text(R"({"model": {"embed_dim": 10, "num_heads": 4}})"),
        cct::ConfigError);
    // channel disagreement between data and model
    REQUIRE_THROWS_AS(cct::run_config_from_json_text(
                          R"({"model": {"in_channels": 1}, "data": {"channels": 3}})"),
                      cct::ConfigError);
    // normalization is pinned
    REQUIRE_THROWS_AS(
        cct::run_config_from_json_text(R"({"data": {"normalization": "zscore"}})"),
        cct::ConfigError);
}

TEST_CASE("shipped preset files parse cleanly") {
    for (const char* name : {"table5-literal.json", "table5-literal-3stage.json",
                             "table5-compat.json", "tiny-test.json"}) {
        const std::string path = std::string(CCT_SOURCE_DIR) + "/configs/" + name;
        auto cfg = cct::load_run_config(path);
        REQUIRE(cfg.model.num_classes == 2);
    }
    // presets in code agree with the shipped JSON files
    auto compat = cct::load_run_config(std::string(CCT_SOURCE_DIR) +
                                       "/configs/table5-compat.json");
    REQUIRE(compat.model.conv_stride == cct::preset_table5_compat().conv_stride);
    REQUIRE(compat.model.embed_dim == cct::preset_table5_compat().embed_dim);
    auto tiny = cct::load_run_config(std::string(CCT_SOURCE_DIR) + "/configs/tiny-test.json");
    REQUIRE(tiny.model.embed_dim == cct::preset_tiny_test().embed_dim);
    REQUIRE(tiny.model.tokenizer_stages == cct::preset_tiny_test().tokenizer_stages);
}
