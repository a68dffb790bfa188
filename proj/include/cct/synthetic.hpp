#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cct/datasplit.hpp"
#include "cct/image_io.hpp"
#include "cct/rng.hpp"

namespace cct {

// Synthetic separable smoke task: 32x32 grayscale images where positives
// carry a bright top-left block and negatives a bright bottom-right block,
// over seeded uniform noise. Average-pooling either quadrant separates the
// classes linearly, so a small model must overfit it quickly.
struct SyntheticTask {
    LabeledDataset train;
    LabeledDataset val;
    std::string train_manifest;
    std::string val_manifest;
};

namespace detail {

inline void write_synthetic_image(const std::string& path, bool positive, RngStream& rng) {
    const std::size_t side = 32;
    ImageBuffer img;
    img.width = img.height = side;
    img.channels = 1;
    img.pixels.resize(side * side);
    for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) {
            double v = 0.3 * rng.uniform01();
            const bool in_block = positive ? (y < side / 2 && x < side / 2)
                                           : (y >= side / 2 && x >= side / 2);
            if (in_block) v += 0.6;
            img.pixels[y * side + x] = static_cast<std::uint8_t>(v * 255.0 + 0.5);
        }
    }
    write_png(path, img);
}

}  // namespace detail

inline SyntheticTask make_synthetic_task(const std::string& dir, std::uint64_t seed,
                                         std::size_t n_train = 64, std::size_t n_val = 24) {
    std::filesystem::create_directories(dir);
    RngStream rng(seed);
    SyntheticTask task;
    task.train.origin = DatasetOrigin::official_train;
    task.val.origin = DatasetOrigin::official_test;

    auto emit = [&](LabeledDataset& ds, const std::string& stem, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) {
            const bool positive = i % 2 == 0;
            const std::string path =
                (std::filesystem::path(dir) / (stem + std::to_string(i) + ".png")).string();
            detail::write_synthetic_image(path, positive, rng);
            ds.samples.push_back({path, path, positive ? Label::positive : Label::negative});
        }
    };
    emit(task.train, "train", n_train);
    emit(task.val, "val", n_val);

    auto write_manifest = [](const std::string& path, const LabeledDataset& ds) {
        std::ofstream out(path, std::ios::binary);
        out << "path,label\n";
        for (const auto& s : ds.samples) out << s.path << ',' << to_string(s.label) << "\n";
    };
    task.train_manifest = (std::filesystem::path(dir) / "train.csv").string();
    task.val_manifest = (std::filesystem::path(dir) / "val.csv").string();
    write_manifest(task.train_manifest, task.train);
    write_manifest(task.val_manifest, task.val);
    return task;
}

// Plan over the full task: train on all training images, validate on the
// val set (which doubles as the evaluation subset).
inline SplitPlan synthetic_plan(const SyntheticTask& task, std::uint64_t seed) {
    SplitPlan plan;
    plan.policy = "policy1";
    plan.seed = seed;
    for (const auto& s : task.train.samples) plan.train_ids.push_back(s.id);
    for (const auto& s : task.val.samples) plan.val_ids.push_back(s.id);
    return plan;
}

inline LabeledDataset concat_datasets(const LabeledDataset& a, const LabeledDataset& b) {
    LabeledDataset out;
    out.origin = DatasetOrigin::merged;
    out.samples = a.samples;
    out.samples.insert(out.samples.end(), b.samples.begin(), b.samples.end());
    return out;
}

}  // namespace cct
