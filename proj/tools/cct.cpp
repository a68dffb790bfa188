// cct: compact convolutional transformer toolkit for binary chest X-ray
// screening. Subcommands: plan, split, train, eval, report.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cct/checkpoint.hpp"
#include "cct/datasplit.hpp"
#include "cct/report_io.hpp"
#include "cct/run_config.hpp"
#include "cct/svg.hpp"
#include "cct/synthetic.hpp"
#include "cct/trainer.hpp"

namespace {

constexpr const char* kVersion = "1.0.0";

void write_text_file(const std::string& path, const std::string& content) {
    if (auto parent = std::filesystem::path(path).parent_path(); !parent.empty()) {
        std::filesystem::create_directories(parent);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw cct::DataError("cannot write file: " + path);
    out << content;
    if (!out) throw cct::DataError("failed while writing file: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw cct::DataError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// appended before the file extension: model.ckpt -> model-fold3.ckpt
std::string with_fold_suffix(const std::string& path, int fold, bool multi) {
    if (!multi) return path;
    const std::filesystem::path p(path);
    std::filesystem::path out = p.parent_path();
    out /= p.stem().string() + "-fold" + std::to_string(fold) + p.extension().string();
    return out.string();
}

// ---------------------------------------------------------------------------
// plan
// ---------------------------------------------------------------------------

struct PlanArgs {
    std::string config;
};

void cmd_plan(const PlanArgs& args) {
    const auto run_cfg = cct::load_run_config(args.config);
    const auto plan = cct::plan_tokenizer(run_cfg.model);

    if (!plan.stages.empty()) {
        std::cout << "stage  input        conv         pool         channels\n";
        for (std::size_t s = 0; s < plan.stages.size(); ++s) {
            const auto& st = plan.stages[s];
            std::ostringstream in, cv, pl;
            in << st.in_h << 'x' << st.in_w;
            cv << st.conv_h << 'x' << st.conv_w;
            pl << st.pool_h << 'x' << st.pool_w;
            std::cout << s + 1 << "      " << in.str() << std::string(13 - in.str().size(), ' ')
                      << cv.str() << std::string(13 - cv.str().size(), ' ') << pl.str()
                      << std::string(13 - pl.str().size(), ' ') << st.out_channels << "\n";
        }
    } else {
        std::cout << "patch tokenizer: " << run_cfg.model.patch_size << "x"
                  << run_cfg.model.patch_size << " patches\n";
    }
    std::cout << "sequence length: " << plan.sequence_length << "\n";
    std::cout << "token dim: " << plan.token_dim << "\n";
    std::cout << "parameters: " << cct::count_params(run_cfg.model) << "\n";
}

// ---------------------------------------------------------------------------
// split
// ---------------------------------------------------------------------------

struct SplitArgs {
    std::string policy;
    std::string train_manifest;
    std::string test_manifest;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::size_t k = 10;
    double ratio = 0.1;
    double val_fraction = 0.1;
    bool no_stratify = false;
    bool no_verify_files = false;
};

void print_plan_sizes(const cct::SplitPlan& plan,
                      const std::unordered_map<std::string, cct::Label>& label_of) {
    auto count = [&](const std::vector<std::string>& ids, cct::Label want) {
        std::size_t n = 0;
        for (const auto& id : ids) n += label_of.at(id) == want;
        return n;
    };
    const char* name = plan.fold_index >= 0 ? "fold" : "plan";
    std::cout << name;
    if (plan.fold_index >= 0) std::cout << ' ' << plan.fold_index;
    std::cout << ": train " << plan.train_ids.size() << " (" <<
        count(plan.train_ids, cct::Label::positive) << " positive, "
              << count(plan.train_ids, cct::Label::negative) << " negative)";
    if (!plan.val_ids.empty()) {
        std::cout << ", val " << plan.val_ids.size() << " ("
                  << count(plan.val_ids, cct::Label::positive) << " positive, "
                  << count(plan.val_ids, cct::Label::negative) << " negative)";
    }
    std::cout << ", test " << plan.test_ids.size() << " ("
              << count(plan.test_ids, cct::Label::positive) << " positive, "
              << count(plan.test_ids, cct::Label::negative) << " negative)\n";
}

void verify_partition(const cct::SplitPlan& plan, std::size_t universe_size) {
    std::unordered_set<std::string> seen;
    for (const auto* part : {&plan.train_ids, &plan.val_ids, &plan.test_ids}) {
        for (const auto& id : *part) {
            if (!seen.insert(id).second) {
                throw cct::NumericError("internal: split plan repeats id '" + id + "'");
            }
        }
    }
    if (seen.size() != universe_size) {
        throw cct::NumericError("internal: split plan does not cover the dataset");
    }
}

void cmd_split(const SplitArgs& args) {
    cct::IngestOptions opts{.verify_files = !args.no_verify_files};
    const auto train = cct::ingest(args.train_manifest, cct::DatasetOrigin::official_train, opts);
    const auto test = cct::ingest(args.test_manifest, cct::DatasetOrigin::official_test, opts);

    std::unordered_map<std::string, cct::Label> label_of;
    for (const auto& s : train.samples) label_of[s.id] = s.label;
    for (const auto& s : test.samples) label_of[s.id] = s.label;

    std::vector<cct::SplitPlan> plans;
    if (args.policy == "policy1") {
        plans.push_back(cct::policy1(train, test, args.val_fraction, args.seed));
    } else if (args.policy == "policy2") {
        plans = cct::policy2(train, test, args.k, args.seed, !args.no_stratify);
    } else if (args.policy == "policy3") {
        plans.push_back(cct::policy3(train, test, args.ratio, args.seed, !args.no_stratify));
    } else {
        throw cct::UsageError("unknown policy '" + args.policy + "'");
    }

    std::filesystem::create_directories(args.out_dir);
    nlohmann::ordered_json run;
    run["version"] = kVersion;
    run["command"] = "split";
    run["policy"] = args.policy;
    run["seed"] = args.seed;
    run["train_manifest"] = args.train_manifest;
    run["test_manifest"] = args.test_manifest;
    const std::size_t universe = train.samples.size() + test.samples.size();
    for (const auto& plan : plans) {
        verify_partition(plan, universe);
        const std::string name = plan.fold_index >= 0
                                     ? "plan-fold" + std::to_string(plan.fold_index) + ".json"
                                     : "plan.json";
        write_text_file((std::filesystem::path(args.out_dir) / name).string(),
                        cct::plan_to_json(plan, run));
        print_plan_sizes(plan, label_of);
    }
    std::cout << "wrote " << plans.size() << " plan file" << (plans.size() == 1 ? "" : "s")
              << " to " << args.out_dir << "\n";
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string config;
    std::vector<std::string> plans;
    std::string out;
    std::string history;
    std::size_t jobs = 1;
    bool wall_times = false;
    // optional overrides
    std::int64_t epochs = -1;
    std::int64_t seed = -1;
    std::int64_t batch_size = -1;
};

template <typename T>
std::string train_one(const cct::RunConfigFile& run_cfg, const cct::SplitPlan& plan,
                      const cct::LabeledDataset& data, const TrainArgs& args, int fold,
                      bool multi) {
    auto [params, history] = cct::train<T>(run_cfg.model, run_cfg.train, plan, data);
    const std::string ckpt_path = with_fold_suffix(args.out, fold, multi);
    std::ostringstream run_note;
    run_note << "cct " << kVersion << " train config=" << args.config
             << " plan=" << args.plans[static_cast<std::size_t>(fold)]
             << " seed=" << run_cfg.train.seed << " precision=" << run_cfg.train.precision;
    cct::save_checkpoint(params, run_cfg.model, ckpt_path, run_note.str());

    if (!args.history.empty()) {
        write_text_file(with_fold_suffix(args.history, fold, multi),
                        cct::history_to_csv(history, "run: " + run_note.str(), args.wall_times));
    }

    const auto& last = history.records.back();
    std::ostringstream line;
    if (multi) line << "fold " << fold << ": ";
    line << "epoch " << last.epoch << " train_loss " << cct::fmt_double(last.train_loss)
         << " train_acc " << cct::fmt_double(last.train_accuracy);
    if (last.has_val) {
        line << " val_loss " << cct::fmt_double(last.val_loss) << " val_acc "
             << cct::fmt_double(last.val_accuracy);
    }
    line << " -> " << ckpt_path;
    return line.str();
}

void cmd_train(const TrainArgs& args) {
    cct::RunConfigFile run_cfg = cct::load_run_config(args.config);
    if (args.epochs >= 0) run_cfg.train.epochs = static_cast<std::size_t>(args.epochs);
    if (args.seed >= 0) run_cfg.train.seed = static_cast<std::uint64_t>(args.seed);
    if (args.batch_size >= 0) run_cfg.train.batch_size = static_cast<std::size_t>(args.batch_size);
    run_cfg.train.validate();
    if (run_cfg.data.train_manifest.empty()) {
        throw cct::ConfigError("config: data.train_manifest is required for training");
    }

    cct::IngestOptions opts{.verify_files = run_cfg.data.verify_files};
    auto data = cct::ingest(run_cfg.data.train_manifest, cct::DatasetOrigin::official_train, opts);
    if (!run_cfg.data.test_manifest.empty()) {
        auto test = cct::ingest(run_cfg.data.test_manifest, cct::DatasetOrigin::official_test,
                                opts);
        data = cct::concat_datasets(data, test);
    }

    std::vector<cct::SplitPlan> plans;
    for (const auto& path : args.plans) plans.push_back(cct::plan_from_json(read_text_file(path)));
    const bool multi = plans.size() > 1;

    std::vector<std::string> summaries(plans.size());
    std::vector<std::string> failures(plans.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= plans.size()) return;
            try {
                summaries[i] = run_cfg.train.precision == "fp32"
                                   ? train_one<float>(run_cfg, plans[i], data, args,
                                                      static_cast<int>(i), multi)
                                   : train_one<double>(run_cfg, plans[i], data, args,
                                                       static_cast<int>(i), multi);
            } catch (const std::exception& e) {
                failures[i] = e.what();
            }
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(args.jobs, plans.size()));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& f : failures) {
        if (!f.empty()) throw cct::DataError(f);
    }
    for (const auto& s : summaries) std::cout << s << "\n";
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string checkpoint;
    std::string plan;
    std::vector<std::string> data;
    std::string report;
    std::string roc;
    bool no_verify_files = false;
};

void cmd_eval(const EvalArgs& args) {
    auto [params, model_cfg] = cct::load_checkpoint<double>(args.checkpoint);
    const auto plan = cct::plan_from_json(read_text_file(args.plan));

    cct::IngestOptions opts{.verify_files = !args.no_verify_files};
    cct::LabeledDataset data;
    data.origin = cct::DatasetOrigin::merged;
    for (const auto& manifest : args.data) {
        auto part = cct::ingest(manifest, cct::DatasetOrigin::merged, opts);
        data.samples.insert(data.samples.end(), part.samples.begin(), part.samples.end());
    }

    const auto index = cct::detail::index_by_id(data);
    const auto subset = cct::detail::resolve_ids(plan.test_ids, index);
    cct::ImageCache<double> cache(model_cfg.image_h, model_cfg.image_w, model_cfg.in_channels);
    const auto report = cct::evaluate<double>(params, model_cfg, subset, cache);

    std::ostringstream run_note;
    run_note << "cct " << kVersion << " eval checkpoint=" << args.checkpoint
             << " plan=" << args.plan << " seed=" << plan.seed;
    nlohmann::ordered_json run;
    run["version"] = kVersion;
    run["command"] = "eval";
    run["checkpoint"] = args.checkpoint;
    run["plan"] = args.plan;
    run["data"] = args.data;
    run["seed"] = plan.seed;
    write_text_file(args.report, cct::report_to_json(report, run));

    if (!args.roc.empty()) {
        if (report.has_roc) {
            write_text_file(args.roc, cct::roc_to_csv(report.roc, "run: " + run_note.str()));
        } else {
            write_text_file(args.roc, "# run: " + run_note.str() +
                                          "\n# no ROC: subset contains a single category\n"
                                          "threshold,fpr,tpr\n");
        }
    }

    std::cout << "test " << subset.size() << " samples: accuracy "
              << cct::render_pct(report.accuracy) << " precision "
              << cct::render_pct(report.precision) << " recall "
              << cct::render_pct(report.recall) << " f1 " << cct::render_pct(report.f1);
    if (report.has_roc) std::cout << " auc " << cct::render_pct(report.auc_roc);
    std::cout << "\n";
    for (const auto& w : report.warnings) std::cout << "warning: " << w << "\n";
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportArgs {
    std::string history;
    std::string roc;
    std::string cm;
    std::string svg_dir;
};

void cmd_report(const ReportArgs& args) {
    std::filesystem::create_directories(args.svg_dir);
    std::size_t written = 0;

    if (!args.history.empty()) {
        const auto history = cct::history_from_csv(read_text_file(args.history));
        const std::string comment = "run: cct " + std::string(kVersion) +
                                    " report history=" + args.history;
        std::vector<cct::SvgSeries> acc, loss;
        cct::SvgSeries train_acc{"train accuracy", "#1f77b4", {}};
        cct::SvgSeries val_acc{"validation accuracy", "#d62728", {}};
        cct::SvgSeries train_loss{"train loss", "#1f77b4", {}};
        cct::SvgSeries val_loss{"validation loss", "#d62728", {}};
        for (const auto& r : history.records) {
            const double e = static_cast<double>(r.epoch);
            train_acc.points.push_back({e, r.train_accuracy});
            train_loss.points.push_back({e, r.train_loss});
            if (r.has_val) {
                val_acc.points.push_back({e, r.val_accuracy});
                val_loss.points.push_back({e, r.val_loss});
            }
        }
        acc.push_back(train_acc);
        loss.push_back(train_loss);
        if (!val_acc.points.empty()) {
            acc.push_back(val_acc);
            loss.push_back(val_loss);
        }
        write_text_file((std::filesystem::path(args.svg_dir) / "accuracy.svg").string(),
                        cct::svg_line_chart(acc, "Accuracy vs. epochs", "epoch", "accuracy",
                                            comment));
        write_text_file((std::filesystem::path(args.svg_dir) / "loss.svg").string(),
                        cct::svg_line_chart(loss, "Loss vs. epochs", "epoch", "loss", comment));
        written += 2;
    }

    if (!args.roc.empty()) {
        const auto rows = cct::roc_from_csv(read_text_file(args.roc));
        std::vector<std::pair<double, double>> pts;
        for (const auto& r : rows) pts.push_back({r.fpr, r.tpr});
        const std::string comment = "run: cct " + std::string(kVersion) +
                                    " report roc=" + args.roc;
        write_text_file((std::filesystem::path(args.svg_dir) / "roc.svg").string(),
                        cct::svg_roc(pts, comment));
        ++written;
    }

    if (!args.cm.empty()) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_text_file(args.cm));
        } catch (const nlohmann::json::exception& e) {
            throw cct::DataError(args.cm + ": invalid JSON: " + e.what());
        }
        if (!j.contains("confusion_matrix")) {
            throw cct::DataError(args.cm + ": missing confusion_matrix object");
        }
        const auto& cmj = j["confusion_matrix"];
        cct::ConfusionMatrix cm{cmj.at("tp").get<long long>(), cmj.at("fp").get<long long>(),
                                cmj.at("fn").get<long long>(), cmj.at("tn").get<long long>()};
        const std::string comment = "run: cct " + std::string(kVersion) +
                                    " report cm=" + args.cm;
        write_text_file((std::filesystem::path(args.svg_dir) / "confusion_matrix.svg").string(),
                        cct::svg_confusion(cm, comment));
        ++written;
    }

    if (written == 0) {
        throw cct::UsageError("report: need at least one of --history, --roc, --cm");
    }
    std::cout << "wrote " << written << " svg file" << (written == 1 ? "" : "s") << " to "
              << args.svg_dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"compact convolutional transformer toolkit\n"
                 "env: CCT_NAN_CHECK=1 enables NaN/Inf assertions after every tensor op"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("cct ") + kVersion);
    app.failure_message(CLI::FailureMessage::help);

    PlanArgs plan_args;
    auto* plan_cmd = app.add_subcommand("plan", "print tokenizer geometry and parameter count");
    plan_cmd->add_option("--config", plan_args.config, "run-config JSON file")->required();

    SplitArgs split_args;
    auto* split_cmd = app.add_subcommand("split", "build split plans from manifests");
    split_cmd->add_option("--policy", split_args.policy, "policy1 | policy2 | policy3")
        ->required()
        ->check(CLI::IsMember({"policy1", "policy2", "policy3"}));
    split_cmd->add_option("--train-manifest", split_args.train_manifest, "official train CSV")
        ->required();
    split_cmd->add_option("--test-manifest", split_args.test_manifest, "official test CSV")
        ->required();
    split_cmd->add_option("--out-dir", split_args.out_dir, "directory for plan JSON files")
        ->required();
    split_cmd->add_option("--seed", split_args.seed, "split seed (default 0)");
    split_cmd->add_option("--k", split_args.k, "fold count for policy2 (default 10)");
    split_cmd->add_option("--ratio", split_args.ratio,
                          "target test/train ratio for policy3 (default 0.1)");
    split_cmd->add_option("--val-fraction", split_args.val_fraction,
                          "validation fraction of official train for policy1 (default 0.1)");
    split_cmd->add_flag("--no-stratify", split_args.no_stratify,
                        "split without per-class stratification");
    split_cmd->add_flag("--no-verify-files", split_args.no_verify_files,
                        "skip checking that referenced images exist");

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train a model over a split plan");
    train_cmd->add_option("--config", train_args.config, "run-config JSON file")->required();
    train_cmd->add_option("--plan", train_args.plans, "split plan JSON (repeat for folds)")
        ->required()
        ->expected(-1);
    train_cmd->add_option("--out", train_args.out, "checkpoint output path")->required();
    train_cmd->add_option("--history", train_args.history, "history CSV output path");
    train_cmd->add_option("--jobs", train_args.jobs, "parallel fold workers (default 1)")
        ->check(CLI::PositiveNumber);
    train_cmd->add_flag("--wall-times", train_args.wall_times,
                        "record measured epoch times in the history CSV (breaks byte "
                        "reproducibility)");
    train_cmd->add_option("--epochs", train_args.epochs, "override train.epochs")
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--seed", train_args.seed, "override train.seed")
        ->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--batch-size", train_args.batch_size, "override train.batch_size")
        ->check(CLI::PositiveNumber);

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a plan's test ids");
    eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "checkpoint file")->required();
    eval_cmd->add_option("--plan", eval_args.plan, "split plan JSON")->required();
    eval_cmd->add_option("--data", eval_args.data, "manifest CSV (repeatable)")
        ->required()
        ->expected(-1);
    eval_cmd->add_option("--report", eval_args.report, "metrics report JSON output")->required();
    eval_cmd->add_option("--roc", eval_args.roc, "ROC CSV output");
    eval_cmd->add_flag("--no-verify-files", eval_args.no_verify_files,
                       "skip manifest file existence checks");

    ReportArgs report_args;
    auto* report_cmd = app.add_subcommand("report", "render SVG plots from run artifacts");
    report_cmd->add_option("--history", report_args.history, "history CSV");
    report_cmd->add_option("--roc", report_args.roc, "ROC CSV");
    report_cmd->add_option("--cm", report_args.cm, "metrics report JSON (confusion matrix)");
    report_cmd->add_option("--svg-dir", report_args.svg_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return cct::kExitUsage;
    }

    try {
        if (app.got_subcommand(plan_cmd)) cmd_plan(plan_args);
        else if (app.got_subcommand(split_cmd)) cmd_split(split_args);
        else if (app.got_subcommand(train_cmd)) cmd_train(train_args);
        else if (app.got_subcommand(eval_cmd)) cmd_eval(eval_args);
        else if (app.got_subcommand(report_cmd)) cmd_report(report_args);
    } catch (const cct::CctError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
