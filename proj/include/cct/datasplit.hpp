#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "cct/errors.hpp"
#include "cct/rng.hpp"

namespace cct {

enum class Label { negative = 0, positive = 1 };

inline const char* to_string(Label l) { return l == Label::positive ? "positive" : "negative"; }

inline Label label_from_string(const std::string& s) {
    if (s == "positive") return Label::positive;
    if (s == "negative") return Label::negative;
    throw DataError("unknown label '" + s + "' (expected positive or negative)");
}

struct Sample {
    std::string id;  // the manifest path, unique per dataset
    std::string path;
    Label label = Label::negative;
};

enum class DatasetOrigin { official_train, official_test, merged };

struct LabeledDataset {
    std::vector<Sample> samples;
    DatasetOrigin origin = DatasetOrigin::official_train;

    std::size_t positives() const {
        std::size_t n = 0;
        for (const auto& s : samples) n += s.label == Label::positive;
        return n;
    }
    std::size_t negatives() const { return samples.size() - positives(); }
};

// ---------------------------------------------------------------------------
// manifest ingestion
// ---------------------------------------------------------------------------

struct IngestOptions {
    bool verify_files = true;  // stat every referenced image
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace detail

// CSV manifest with header `path,label`. Loads metadata only; pixels are
// read lazily by the trainer.
inline LabeledDataset ingest(const std::string& manifest_path,
                             DatasetOrigin origin = DatasetOrigin::official_train,
                             const IngestOptions& opts = {}) {
    std::ifstream in(manifest_path);
    if (!in) throw DataError("cannot open manifest: " + manifest_path);

    LabeledDataset ds;
    ds.origin = origin;
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty manifest: " + manifest_path);
    if (detail::trim(line) != "path,label") {
        throw DataError(manifest_path + ": expected header 'path,label', got '" +
                        detail::trim(line) + "'");
    }
    std::unordered_set<std::string> seen;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        const auto comma = t.rfind(',');
        if (comma == std::string::npos) {
            throw DataError(manifest_path + " row " + std::to_string(row) +
                            ": expected 'path,label'");
        }
        const std::string path = detail::trim(t.substr(0, comma));
        const std::string label_text = detail::trim(t.substr(comma + 1));
        if (path.empty()) {
            throw DataError(manifest_path + " row " + std::to_string(row) + ": empty path");
        }
        Label label;
        try {
            label = label_from_string(label_text);
        } catch (const DataError& e) {
            throw DataError(manifest_path + " row " + std::to_string(row) + ": " + e.what());
        }
        if (!seen.insert(path).second) {
            throw DataError(manifest_path + " row " + std::to_string(row) + ": duplicate path '" +
                            path + "'");
        }
        if (opts.verify_files && !std::filesystem::exists(path)) {
            throw DataError(manifest_path + " row " + std::to_string(row) + ": file not found '" +
                            path + "'");
        }
        ds.samples.push_back({path, path, label});
    }
    return ds;
}

// ---------------------------------------------------------------------------
// split plans
// ---------------------------------------------------------------------------

struct SplitPlan {
    std::uint64_t seed = 0;
    std::string policy;   // policy1 | policy2 | policy3
    int fold_index = -1;  // policy2 only
    int fold_count = 0;
    std::vector<std::string> train_ids;
    std::vector<std::string> val_ids;
    std::vector<std::string> test_ids;
};

namespace detail {

inline void fisher_yates(std::vector<std::size_t>& idx, RngStream& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        const std::size_t j = rng.uniform_below(i);
        std::swap(idx[i - 1], idx[j]);
    }
}

inline void check_disjoint(const LabeledDataset& a, const LabeledDataset& b) {
    std::unordered_set<std::string> ids;
    for (const auto& s : a.samples) ids.insert(s.id);
    for (const auto& s : b.samples) {
        if (ids.count(s.id)) {
            throw DataError("datasets overlap on id '" + s.id + "'");
        }
    }
}

// indices of a dataset grouped per label, in manifest order
inline std::vector<std::vector<std::size_t>> per_class_indices(const LabeledDataset& ds) {
    std::vector<std::vector<std::size_t>> by_class(2);
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        by_class[static_cast<int>(ds.samples[i].label)].push_back(i);
    }
    return by_class;
}

// emit ids of the selected index set in manifest order
inline std::vector<std::string> ids_in_order(const LabeledDataset& ds,
                                             const std::vector<bool>& selected, bool want) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        if (selected[i] == want) out.push_back(ds.samples[i].id);
    }
    return out;
}

}  // namespace detail

// Official split: test is the official test set verbatim; a stratified
// val_fraction of the official train set becomes validation.
inline SplitPlan policy1(const LabeledDataset& official_train, const LabeledDataset& official_test,
                         double val_fraction, std::uint64_t seed) {
    if (val_fraction < 0.0 || val_fraction >= 1.0) {
        throw UsageError("policy1: val_fraction must lie in [0, 1)");
    }
    detail::check_disjoint(official_train, official_test);

    SplitPlan plan;
    plan.seed = seed;
    plan.policy = "policy1";
    RngStream rng(seed);
    std::vector<bool> in_val(official_train.samples.size(), false);
    for (auto& cls : detail::per_class_indices(official_train)) {
        const std::size_t take =
            static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(cls.size())));
        detail::fisher_yates(cls, rng);
        for (std::size_t i = 0; i < take; ++i) in_val[cls[i]] = true;
    }
    plan.train_ids = detail::ids_in_order(official_train, in_val, false);
    plan.val_ids = detail::ids_in_order(official_train, in_val, true);
    for (const auto& s : official_test.samples) plan.test_ids.push_back(s.id);
    return plan;
}

// Merged k-fold: amalgamate both datasets, shuffle per class with the seed,
// deal cyclically into k folds (sizes differ by at most one, per class and
// overall). Plan i tests on fold i and trains on the rest.
inline std::vector<SplitPlan> policy2(const LabeledDataset& official_train,
                                      const LabeledDataset& official_test, std::size_t k,
                                      std::uint64_t seed, bool stratify = true) {
    detail::check_disjoint(official_train, official_test);
    LabeledDataset merged;
    merged.origin = DatasetOrigin::merged;
    merged.samples = official_train.samples;
    merged.samples.insert(merged.samples.end(), official_test.samples.begin(),
                          official_test.samples.end());
    const std::size_t n = merged.samples.size();
    if (k < 2 || k > n) {
        throw UsageError("policy2: k must lie in [2, " + std::to_string(n) + "], got " +
                         std::to_string(k));
    }

    RngStream rng(seed);
    std::vector<std::size_t> fold_of(n);
    std::size_t cursor = 0;
    if (stratify) {
        for (auto& cls : detail::per_class_indices(merged)) {
            detail::fisher_yates(cls, rng);
            for (std::size_t i : cls) fold_of[i] = cursor++ % k;
        }
    } else {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        detail::fisher_yates(idx, rng);
        for (std::size_t i : idx) fold_of[i] = cursor++ % k;
    }

    std::vector<SplitPlan> plans(k);
    for (std::size_t f = 0; f < k; ++f) {
        plans[f].seed = seed;
        plans[f].policy = "policy2";
        plans[f].fold_index = static_cast<int>(f);
        plans[f].fold_count = static_cast<int>(k);
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < k; ++f) {
            auto& plan = plans[f];
            (fold_of[i] == f ? plan.test_ids : plan.train_ids).push_back(merged.samples[i].id);
        }
    }
    return plans;
}

inline double policy3_moved_count(std::size_t train_size, std::size_t test_size, double ratio) {
    return (ratio * static_cast<double>(train_size) - static_cast<double>(test_size)) /
           (1.0 + ratio);
}

// Moves n stratified samples from train to test so the final test size is
// about `ratio` of the remaining train size; n rounds half to even and
// clamps at zero.
inline SplitPlan policy3(const LabeledDataset& official_train, const LabeledDataset& official_test,
                         double ratio, std::uint64_t seed, bool stratify = true) {
    if (ratio <= 0.0 || ratio >= 1.0) throw UsageError("policy3: ratio must lie in (0, 1)");
    detail::check_disjoint(official_train, official_test);

    const double raw =
        policy3_moved_count(official_train.samples.size(), official_test.samples.size(), ratio);
    long long n_moved = static_cast<long long>(std::nearbyint(raw));  // ties to even
    if (n_moved < 0) n_moved = 0;

    auto by_class = detail::per_class_indices(official_train);
    const std::size_t total = official_train.samples.size();

    // largest-remainder allocation of n_moved across the two classes
    std::size_t quota[2] = {0, 0};
    if (stratify) {
        double frac[2];
        long long assigned = 0;
        for (int c = 0; c < 2; ++c) {
            const double q = static_cast<double>(n_moved) *
                             static_cast<double>(by_class[c].size()) /
                             static_cast<double>(total);
            quota[c] = static_cast<std::size_t>(std::floor(q));
            frac[c] = q - std::floor(q);
            assigned += quota[c];
        }
        for (long long left = n_moved - assigned; left > 0; --left) {
            const int c = frac[0] >= frac[1] ? 0 : 1;
            ++quota[c];
            frac[c] = -1.0;
        }
    } else {
        quota[0] = static_cast<std::size_t>(n_moved);
    }

    RngStream rng(seed);
    std::vector<bool> moved(official_train.samples.size(), false);
    if (stratify) {
        for (int c = 0; c < 2; ++c) {
            auto cls = by_class[c];
            if (quota[c] > cls.size()) {
                throw UsageError("policy3: class quota exceeds available samples");
            }
            detail::fisher_yates(cls, rng);
            for (std::size_t i = 0; i < quota[c]; ++i) moved[cls[i]] = true;
        }
    } else {
        std::vector<std::size_t> idx(official_train.samples.size());
        std::iota(idx.begin(), idx.end(), 0);
        detail::fisher_yates(idx, rng);
        for (std::size_t i = 0; i < quota[0]; ++i) moved[idx[i]] = true;
    }

    SplitPlan plan;
    plan.seed = seed;
    plan.policy = "policy3";
    plan.train_ids = detail::ids_in_order(official_train, moved, false);
    for (const auto& s : official_test.samples) plan.test_ids.push_back(s.id);
    auto appended = detail::ids_in_order(official_train, moved, true);
    plan.test_ids.insert(plan.test_ids.end(), appended.begin(), appended.end());
    return plan;
}

// Seeded Fisher-Yates permutation of the sample list.
inline LabeledDataset shuffle(const LabeledDataset& ds, std::uint64_t seed) {
    std::vector<std::size_t> idx(ds.samples.size());
    std::iota(idx.begin(), idx.end(), 0);
    RngStream rng(seed);
    detail::fisher_yates(idx, rng);
    LabeledDataset out;
    out.origin = ds.origin;
    out.samples.reserve(ds.samples.size());
    for (std::size_t i : idx) out.samples.push_back(ds.samples[i]);
    return out;
}

// ---------------------------------------------------------------------------
// plan serialization
// ---------------------------------------------------------------------------

inline constexpr const char* kPlanFormat = "cct-split-plan/1";

inline nlohmann::ordered_json plan_to_json_object(const SplitPlan& plan) {
    nlohmann::ordered_json j;
    j["format"] = kPlanFormat;
    j["policy"] = plan.policy;
    j["seed"] = plan.seed;
    j["fold_index"] = plan.fold_index;
    j["fold_count"] = plan.fold_count;
    j["train_ids"] = plan.train_ids;
    j["val_ids"] = plan.val_ids;
    j["test_ids"] = plan.test_ids;
    return j;
}

inline std::string plan_to_json(const SplitPlan& plan,
                                const nlohmann::ordered_json& run = nullptr) {
    auto j = plan_to_json_object(plan);
    if (!run.is_null()) j["run"] = run;
    return j.dump(2) + "\n";
}

inline SplitPlan plan_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("split plan: invalid JSON: ") + e.what());
    }
    if (!j.contains("format") || j["format"] != kPlanFormat) {
        throw DataError("split plan: missing or unknown format tag");
    }
    SplitPlan plan;
    try {
        plan.policy = j.at("policy").get<std::string>();
        plan.seed = j.at("seed").get<std::uint64_t>();
        plan.fold_index = j.at("fold_index").get<int>();
        plan.fold_count = j.at("fold_count").get<int>();
        plan.train_ids = j.at("train_ids").get<std::vector<std::string>>();
        plan.val_ids = j.at("val_ids").get<std::vector<std::string>>();
        plan.test_ids = j.at("test_ids").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("split plan: ") + e.what());
    }
    return plan;
}

}  // namespace cct
