#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "cct/checkpoint.hpp"
#include "cct/datasplit.hpp"
#include "cct/encoding.hpp"
#include "cct/image_io.hpp"
#include "cct/metrics.hpp"
#include "cct/model.hpp"

namespace cct {

// ---------------------------------------------------------------------------
// configuration and history
// ---------------------------------------------------------------------------

struct TrainConfig {
    std::string optimizer = "adamw";  // adamw | sgd_momentum
    double learning_rate = 5e-4;
    double weight_decay = 3e-2;  // adamw only
    double momentum = 0.9;       // sgd_momentum only
    std::size_t batch_size = 32;
    std::size_t epochs = 1;
    std::uint64_t seed = 0;
    std::size_t patience = 0;       // early stop on val loss; 0 disables
    std::size_t warmup_steps = 0;   // linear learning-rate warmup
    std::string precision = "fp64";  // fp64 | fp32

    void validate() const {
        if (optimizer != "adamw" && optimizer != "sgd_momentum") {
            throw ConfigError("unknown optimizer '" + optimizer + "'");
        }
        if (learning_rate < 0) throw ConfigError("learning_rate must be non-negative");
        if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
        if (epochs < 1) throw ConfigError("epochs must be at least 1");
        if (precision != "fp64" && precision != "fp32") {
            throw ConfigError("precision must be fp64 or fp32");
        }
    }
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0;
    double train_accuracy = 0;
    bool has_val = false;
    double val_loss = 0;
    double val_accuracy = 0;
    double wall_seconds = 0;
};

struct TrainHistory {
    std::vector<EpochRecord> records;
};

// CSV serialization: epoch,train_loss,train_acc,val_loss,val_acc,seconds.
// Wall times default to zero so identical runs produce identical bytes; pass
// include_wall_times to record the measured values instead.
inline std::string history_to_csv(const TrainHistory& history, const std::string& run_comment,
                                  bool include_wall_times = false) {
    std::ostringstream out;
    if (!run_comment.empty()) out << "# " << run_comment << "\n";
    out << "epoch,train_loss,train_acc,val_loss,val_acc,seconds\n";
    for (const auto& r : history.records) {
        out << r.epoch << ',' << fmt_double(r.train_loss) << ',' << fmt_double(r.train_accuracy)
            << ',';
        if (r.has_val) out << fmt_double(r.val_loss);
        out << ',';
        if (r.has_val) out << fmt_double(r.val_accuracy);
        out << ',' << fmt_double(include_wall_times ? r.wall_seconds : 0.0) << "\n";
    }
    return out.str();
}

inline TrainHistory history_from_csv(const std::string& text) {
    TrainHistory history;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (!saw_header) {
            if (line != "epoch,train_loss,train_acc,val_loss,val_acc,seconds") {
                throw DataError("history csv line " + std::to_string(line_no) +
                                ": unexpected header '" + line + "'");
            }
            saw_header = true;
            continue;
        }
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream row(line);
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.push_back("");
        if (cells.size() != 6) {
            throw DataError("history csv line " + std::to_string(line_no) + ": expected 6 cells");
        }
        EpochRecord r;
        try {
            r.epoch = std::stoull(cells[0]);
            r.train_loss = parse_double(cells[1]);
            r.train_accuracy = parse_double(cells[2]);
            r.has_val = !cells[3].empty();
            if (r.has_val) {
                r.val_loss = parse_double(cells[3]);
                r.val_accuracy = parse_double(cells[4]);
            }
            r.wall_seconds = parse_double(cells[5]);
        } catch (const CctError& e) {
            throw DataError("history csv line " + std::to_string(line_no) + ": " + e.what());
        }
        history.records.push_back(r);
    }
    if (!saw_header) throw DataError("history csv: missing header");
    return history;
}

inline std::string history_to_json(const TrainHistory& history,
                                   bool include_wall_times = false) {
    std::ostringstream out;
    out << "[\n";
    for (std::size_t i = 0; i < history.records.size(); ++i) {
        const auto& r = history.records[i];
        out << "  {\"epoch\": " << r.epoch << ", \"train_loss\": " << fmt_double(r.train_loss)
            << ", \"train_acc\": " << fmt_double(r.train_accuracy);
        if (r.has_val) {
            out << ", \"val_loss\": " << fmt_double(r.val_loss) << ", \"val_acc\": "
                << fmt_double(r.val_accuracy);
        } else {
            out << ", \"val_loss\": null, \"val_acc\": null";
        }
        out << ", \"seconds\": " << fmt_double(include_wall_times ? r.wall_seconds : 0.0) << "}"
            << (i + 1 < history.records.size() ? "," : "") << "\n";
    }
    out << "]\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// optimizers
// ---------------------------------------------------------------------------

template <typename T>
class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void step(ModelParams<T>& params) = 0;
};

// Decoupled weight decay; bias correction per step. The learning rate ramps
// linearly over warmup_steps when configured.
template <typename T>
class AdamW : public Optimizer<T> {
public:
    AdamW(double lr, double weight_decay, std::size_t warmup_steps, double beta1 = 0.9,
          double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), wd_(weight_decay), warmup_(warmup_steps), beta1_(beta1), beta2_(beta2),
          eps_(eps) {}

    void step(ModelParams<T>& params) override {
        ++t_;
        double lr = lr_;
        if (warmup_ > 0 && t_ <= warmup_) {
            lr = lr_ * static_cast<double>(t_) / static_cast<double>(warmup_);
        }
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        std::size_t slot = 0;
        for (const auto& name : params.names()) {
            auto& p = params.at(name);
            if (state_.size() <= slot) state_.push_back({std::vector<double>(p.numel(), 0.0),
                                                         std::vector<double>(p.numel(), 0.0)});
            auto& [m, v] = state_[slot++];
            const auto& g = p.grad();
            auto& values = p.values();
            for (std::size_t i = 0; i < values.size(); ++i) {
                const double gi = static_cast<double>(g[i]);
                m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
                v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                const double upd = mhat / (std::sqrt(vhat) + eps_) +
                                   wd_ * static_cast<double>(values[i]);
                values[i] = static_cast<T>(static_cast<double>(values[i]) - lr * upd);
            }
        }
    }

private:
    double lr_, wd_;
    std::size_t warmup_;
    double beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::vector<std::pair<std::vector<double>, std::vector<double>>> state_;
};

template <typename T>
class SgdMomentum : public Optimizer<T> {
public:
    SgdMomentum(double lr, double momentum, std::size_t warmup_steps)
        : lr_(lr), momentum_(momentum), warmup_(warmup_steps) {}

    void step(ModelParams<T>& params) override {
        ++t_;
        double lr = lr_;
        if (warmup_ > 0 && t_ <= warmup_) {
            lr = lr_ * static_cast<double>(t_) / static_cast<double>(warmup_);
        }
        std::size_t slot = 0;
        for (const auto& name : params.names()) {
            auto& p = params.at(name);
            if (velocity_.size() <= slot) velocity_.push_back(std::vector<double>(p.numel(), 0.0));
            auto& vel = velocity_[slot++];
            const auto& g = p.grad();
            auto& values = p.values();
            for (std::size_t i = 0; i < values.size(); ++i) {
                vel[i] = momentum_ * vel[i] + static_cast<double>(g[i]);
                values[i] = static_cast<T>(static_cast<double>(values[i]) - lr * vel[i]);
            }
        }
    }

private:
    double lr_, momentum_;
    std::size_t warmup_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> velocity_;
};

template <typename T>
std::unique_ptr<Optimizer<T>> make_optimizer(const TrainConfig& cfg) {
    if (cfg.optimizer == "adamw") {
        return std::make_unique<AdamW<T>>(cfg.learning_rate, cfg.weight_decay, cfg.warmup_steps);
    }
    return std::make_unique<SgdMomentum<T>>(cfg.learning_rate, cfg.momentum, cfg.warmup_steps);
}

// ---------------------------------------------------------------------------
// batching
// ---------------------------------------------------------------------------

// Decoded images keyed by path. Batches are assembled in plan order no
// matter when each file was read, so delivery order never affects results.
template <typename T>
class ImageCache {
public:
    ImageCache(std::size_t h, std::size_t w, std::size_t channels)
        : h_(h), w_(w), channels_(channels) {}

    const std::vector<T>& get(const std::string& path) {
        auto it = cache_.find(path);
        if (it != cache_.end()) return it->second;
        auto tensor = load_image<T>(path, h_, w_, channels_);
        return cache_.emplace(path, std::move(tensor.values())).first->second;
    }

    Tensor<T> batch(const std::vector<const Sample*>& samples) {
        const std::size_t px = channels_ * h_ * w_;
        std::vector<T> out;
        out.reserve(samples.size() * px);
        for (const Sample* s : samples) {
            const auto& v = get(s->path);
            out.insert(out.end(), v.begin(), v.end());
        }
        return Tensor<T>({samples.size(), channels_, h_, w_}, std::move(out));
    }

private:
    std::size_t h_, w_, channels_;
    std::unordered_map<std::string, std::vector<T>> cache_;
};

namespace detail {

inline std::unordered_map<std::string, const Sample*> index_by_id(const LabeledDataset& data) {
    std::unordered_map<std::string, const Sample*> out;
    for (const auto& s : data.samples) out.emplace(s.id, &s);
    return out;
}

inline std::vector<const Sample*> resolve_ids(const std::vector<std::string>& ids,
                                              const std::unordered_map<std::string, const Sample*>& index) {
    std::vector<const Sample*> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = index.find(id);
        if (it == index.end()) throw DataError("plan id not present in dataset: '" + id + "'");
        out.push_back(it->second);
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

// Metric assembly from per-sample positive-class scores; thresholding at
// 0.5 for the confusion matrix, full ROC/AUC when both categories appear.
inline MetricsReport evaluate_scores(const std::vector<double>& scores,
                                     const std::vector<int>& labels) {
    if (scores.empty() || scores.size() != labels.size()) {
        throw UsageError("evaluate_scores: need equally many scores and labels");
    }
    std::vector<int> predictions(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) predictions[i] = scores[i] >= 0.5 ? 1 : 0;
    MetricsReport report = scalar_metrics(confusion(predictions, labels, 1));
    try {
        report.roc = roc_curve(scores, labels);
        report.auc_roc = auc(report.roc);
        report.has_roc = true;
    } catch (const DataError&) {
        report.warnings.push_back("single-category subset: ROC and AUC omitted");
        report.undefined.push_back("auc_roc");
        report.has_roc = false;
    }
    return report;
}

// Inference over a dataset subset: forward pass without dropout, softmax
// positive probability, then the full metrics pipeline.
template <typename T>
MetricsReport evaluate(const ModelParams<T>& params, const CctConfig& cfg,
                       const std::vector<const Sample*>& subset, ImageCache<T>& cache,
                       std::size_t batch_size = 32) {
    if (subset.empty()) throw UsageError("evaluate: empty subset");
    if (cfg.num_classes != 2) {
        throw UsageError("evaluate: binary metrics need num_classes == 2");
    }
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(subset.size());
    RngStream rng(0);  // inference path draws nothing
    for (std::size_t at = 0; at < subset.size(); at += batch_size) {
        const std::size_t take = std::min(batch_size, subset.size() - at);
        std::vector<const Sample*> chunk(subset.begin() + at, subset.begin() + at + take);
        Tensor<T> images = cache.batch(chunk);
        Tensor<T> logits = forward(images, params, cfg, rng, false);
        Tensor<T> probs = softmax(logits, 1);
        for (std::size_t i = 0; i < take; ++i) {
            scores.push_back(static_cast<double>(probs.values()[i * cfg.num_classes + 1]));
            labels.push_back(static_cast<int>(chunk[i]->label));
        }
    }
    return evaluate_scores(scores, labels);
}

template <typename T>
MetricsReport evaluate(const ModelParams<T>& params, const CctConfig& cfg,
                       const std::vector<Sample>& subset, std::size_t batch_size = 32) {
    ImageCache<T> cache(cfg.image_h, cfg.image_w, cfg.in_channels);
    std::vector<const Sample*> ptrs;
    ptrs.reserve(subset.size());
    for (const auto& s : subset) ptrs.push_back(&s);
    return evaluate<T>(params, cfg, ptrs, cache, batch_size);
}

// ---------------------------------------------------------------------------
// training loop
// ---------------------------------------------------------------------------

// Mini-batch training over the plan's train ids with a per-epoch validation
// pass (dropout disabled). Identical inputs and seed give identical history
// in fp64 single-thread mode. Derived per-epoch streams keep earlier epochs
// stable when the epoch count changes.
template <typename T>
std::pair<ModelParams<T>, TrainHistory> train(const CctConfig& cfg, const TrainConfig& tcfg,
                                              const SplitPlan& plan, const LabeledDataset& data) {
    cfg.validate();
    tcfg.validate();
    plan_tokenizer(cfg);  // geometry errors surface before any work
    if (plan.train_ids.empty()) throw DataError("train: plan has an empty train set");

    const auto index = detail::index_by_id(data);
    const auto train_samples = detail::resolve_ids(plan.train_ids, index);
    const auto val_samples = detail::resolve_ids(plan.val_ids, index);

    const RngStream root(tcfg.seed);
    RngStream init_rng = root.split(0);
    ModelParams<T> params = init_params<T>(cfg, init_rng);
    auto optimizer = make_optimizer<T>(tcfg);
    ImageCache<T> cache(cfg.image_h, cfg.image_w, cfg.in_channels);

    TrainHistory history;
    double best_val_loss = std::numeric_limits<double>::infinity();
    std::size_t epochs_since_best = 0;

    for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        RngStream shuffle_rng = root.split(1 + 2 * epoch);
        RngStream dropout_rng = root.split(2 + 2 * epoch);

        std::vector<std::size_t> order(train_samples.size());
        std::iota(order.begin(), order.end(), 0);
        detail::fisher_yates(order, shuffle_rng);

        double loss_sum = 0.0;
        std::vector<int> predictions, labels;
        predictions.reserve(train_samples.size());
        for (std::size_t at = 0; at < order.size(); at += tcfg.batch_size) {
            const std::size_t take = std::min(tcfg.batch_size, order.size() - at);
            std::vector<const Sample*> chunk(take);
            std::vector<int> chunk_labels(take);
            for (std::size_t i = 0; i < take; ++i) {
                chunk[i] = train_samples[order[at + i]];
                chunk_labels[i] = static_cast<int>(chunk[i]->label);
            }
            Tensor<T> images = cache.batch(chunk);
            params.set_requires_grad(true);
            Tensor<T> logits = forward(images, params, cfg, dropout_rng, true);
            Tensor<T> loss = cross_entropy(logits, chunk_labels);
            loss_sum += static_cast<double>(loss.item()) * static_cast<double>(take);

            for (std::size_t i = 0; i < take; ++i) {
                const T* row = logits.values().data() + i * cfg.num_classes;
                int arg = 0;
                for (std::size_t c = 1; c < cfg.num_classes; ++c) {
                    if (row[c] > row[arg]) arg = static_cast<int>(c);
                }
                predictions.push_back(arg);
                labels.push_back(chunk_labels[i]);
            }

            params.zero_grads();
            backward(loss);
            optimizer->step(params);
        }

        EpochRecord rec;
        rec.epoch = epoch + 1;
        rec.train_loss = loss_sum / static_cast<double>(train_samples.size());
        rec.train_accuracy =
            scalar_metrics(confusion(predictions, labels, 1)).accuracy.value();

        if (!val_samples.empty()) {
            rec.has_val = true;
            double val_loss_sum = 0.0;
            std::vector<int> val_preds, val_labels;
            RngStream eval_rng(0);
            for (std::size_t at = 0; at < val_samples.size(); at += tcfg.batch_size) {
                const std::size_t take = std::min(tcfg.batch_size, val_samples.size() - at);
                std::vector<const Sample*> chunk(val_samples.begin() + at,
                                                 val_samples.begin() + at + take);
                std::vector<int> chunk_labels(take);
                for (std::size_t i = 0; i < take; ++i) {
                    chunk_labels[i] = static_cast<int>(chunk[i]->label);
                }
                Tensor<T> images = cache.batch(chunk);
                Tensor<T> logits = forward(images, params, cfg, eval_rng, false);
                Tensor<T> loss = cross_entropy(logits, chunk_labels);
                val_loss_sum += static_cast<double>(loss.item()) * static_cast<double>(take);
                for (std::size_t i = 0; i < take; ++i) {
                    const T* row = logits.values().data() + i * cfg.num_classes;
                    int arg = 0;
                    for (std::size_t c = 1; c < cfg.num_classes; ++c) {
                        if (row[c] > row[arg]) arg = static_cast<int>(c);
                    }
                    val_preds.push_back(arg);
                    val_labels.push_back(chunk_labels[i]);
                }
            }
            rec.val_loss = val_loss_sum / static_cast<double>(val_samples.size());
            rec.val_accuracy =
                scalar_metrics(confusion(val_preds, val_labels, 1)).accuracy.value();
        }

        rec.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        history.records.push_back(rec);

        if (tcfg.patience > 0 && rec.has_val) {
            if (rec.val_loss < best_val_loss) {
                best_val_loss = rec.val_loss;
                epochs_since_best = 0;
            } else if (++epochs_since_best >= tcfg.patience) {
                break;
            }
        }
    }
    return {std::move(params), std::move(history)};
}

// ---------------------------------------------------------------------------
// k-fold driver
// ---------------------------------------------------------------------------

struct FoldResults {
    std::vector<MetricsReport> folds;
    MetricsReport aggregate;
};

// Trains a fresh model per fold from a fresh seeded init and evaluates it
// on the held-out fold; the aggregate mirrors the fold-average row.
template <typename T>
FoldResults run_policy2(const CctConfig& cfg, const TrainConfig& tcfg,
                        const LabeledDataset& official_train,
                        const LabeledDataset& official_test, std::size_t k, std::uint64_t seed) {
    auto plans = policy2(official_train, official_test, k, seed);
    LabeledDataset merged;
    merged.origin = DatasetOrigin::merged;
    merged.samples = official_train.samples;
    merged.samples.insert(merged.samples.end(), official_test.samples.begin(),
                          official_test.samples.end());
    const auto index = detail::index_by_id(merged);

    FoldResults results;
    const RngStream fold_seeds(seed);
    for (std::size_t f = 0; f < plans.size(); ++f) {
        TrainConfig fold_cfg = tcfg;
        fold_cfg.seed = fold_seeds.split(100 + f).seed();
        auto [params, history] = train<T>(cfg, fold_cfg, plans[f], merged);
        auto test_samples = detail::resolve_ids(plans[f].test_ids, index);
        ImageCache<T> cache(cfg.image_h, cfg.image_w, cfg.in_channels);
        results.folds.push_back(evaluate<T>(params, cfg, test_samples, cache, tcfg.batch_size));
    }
    results.aggregate = aggregate_folds(results.folds);
    return results;
}

}  // namespace cct
