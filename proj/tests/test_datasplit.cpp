#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "cct/datasplit.hpp"
#include "cct/image_io.hpp"
#include "test_support.hpp"

using cct::DatasetOrigin;
using cct::Label;
using cct::LabeledDataset;
using cct::RngStream;
using cct::SplitPlan;
using testsup::TempDir;

namespace {

std::multiset<std::string> id_multiset(const LabeledDataset& ds) {
    std::multiset<std::string> out;
    for (const auto& s : ds.samples) out.insert(s.id);
    return out;
}

// disjointness + exact cover of the input id set
void require_partition(const SplitPlan& plan, const std::vector<std::string>& universe) {
    std::set<std::string> seen;
    for (const auto* part : {&plan.train_ids, &plan.val_ids, &plan.test_ids}) {
        for (const auto& id : *part) {
            REQUIRE(seen.insert(id).second);
        }
    }
    REQUIRE(seen.size() == universe.size());
    for (const auto& id : universe) REQUIRE(seen.count(id) == 1);
}

}  // namespace

TEST_CASE("ingest parses manifests with stable ids") {
    TempDir tmp;
    testsup::write_file(tmp.file("a.png"), "x");
    testsup::write_file(tmp.file("b.png"), "x");
    const std::string manifest = tmp.file("m.csv");
    testsup::write_file(manifest, "path,label\n" + tmp.file("a.png") + ",positive\n" +
                                      tmp.file("b.png") + ",negative\n");
    auto ds = cct::ingest(manifest);
    REQUIRE(ds.samples.size() == 2);
    REQUIRE(ds.samples[0].id == tmp.file("a.png"));
    REQUIRE(ds.samples[0].label == Label::positive);
    REQUIRE(ds.samples[1].label == Label::negative);

    auto again = cct::ingest(manifest);
    REQUIRE(again.samples[0].id == ds.samples[0].id);
}

TEST_CASE("ingest diagnostics carry row numbers") {
    TempDir tmp;
    testsup::write_file(tmp.file("a.png"), "x");

    const std::string bad_label = tmp.file("bad_label.csv");
    testsup::write_file(bad_label, "path,label\n" + tmp.file("a.png") + ",covid\n");
    REQUIRE_THROWS_MATCHES(cct::ingest(bad_label), cct::DataError,
                           Catch::Matchers::MessageMatches(
                               Catch::Matchers::ContainsSubstring("row 2") &&
                               Catch::Matchers::ContainsSubstring("covid")));

    const std::string dup = tmp.file("dup.csv");
    testsup::write_file(dup, "path,label\n" + tmp.file("a.png") + ",positive\n" +
                                 tmp.file("a.png") + ",negative\n");
    REQUIRE_THROWS_MATCHES(cct::ingest(dup), cct::DataError,
                           Catch::Matchers::MessageMatches(
                               Catch::Matchers::ContainsSubstring("row 3") &&
                               Catch::Matchers::ContainsSubstring("duplicate")));

    const std::string missing = tmp.file("missing.csv");
    testsup::write_file(missing, "path,label\n" + tmp.file("nope.png") + ",positive\n");
    REQUIRE_THROWS_MATCHES(cct::ingest(missing), cct::DataError,
                           Catch::Matchers::MessageMatches(
                               Catch::Matchers::ContainsSubstring("not found")));

    const std::string bad_header = tmp.file("hdr.csv");
    testsup::write_file(bad_header, "file,category\n");
    REQUIRE_THROWS_AS(cct::ingest(bad_header), cct::DataError);
}

TEST_CASE("ingest reports the official-distribution class counts") {
    TempDir tmp;
    std::string rows = "path,label\n";
    for (int i = 0; i < 16490; ++i) rows += "img/p" + std::to_string(i) + ".png,positive\n";
    for (int i = 0; i < 13992; ++i) rows += "img/n" + std::to_string(i) + ".png,negative\n";
    const std::string manifest = tmp.file("train.csv");
    testsup::write_file(manifest, rows);
    auto ds = cct::ingest(manifest, DatasetOrigin::official_train, {.verify_files = false});
    REQUIRE(ds.samples.size() == 30482);
    REQUIRE(ds.positives() == 16490);
    REQUIRE(ds.negatives() == 13992);
}

TEST_CASE("policy1 keeps the official test verbatim and carves stratified validation") {
    auto train = testsup::synthetic_dataset(16490, 13992, "train", DatasetOrigin::official_train);
    auto test = testsup::synthetic_dataset(200, 200, "test", DatasetOrigin::official_test);

    auto plan0 = cct::policy1(train, test, 0.0, 7);
    REQUIRE(plan0.train_ids.size() == 30482);
    REQUIRE(plan0.val_ids.empty());
    REQUIRE(plan0.test_ids.size() == 400);
    for (std::size_t i = 0; i < test.samples.size(); ++i) {
        REQUIRE(plan0.test_ids[i] == test.samples[i].id);
    }

    auto plan = cct::policy1(train, test, 0.1, 7);
    REQUIRE(plan.val_ids.size() == 3048);  // floor(1649.0) + floor(1399.2)
    REQUIRE(plan.train_ids.size() == 30482 - 3048);

    auto plan_again = cct::policy1(train, test, 0.1, 7);
    REQUIRE(plan.train_ids == plan_again.train_ids);
    REQUIRE(plan.val_ids == plan_again.val_ids);
    REQUIRE(plan.test_ids == plan_again.test_ids);

    // overlapping ids rejected
    REQUIRE_THROWS_AS(cct::policy1(train, train, 0.1, 7), cct::DataError);
}

TEST_CASE("policy2 deals official-distribution folds of size 3088/3089") {
    auto train = testsup::synthetic_dataset(16490, 13992, "train", DatasetOrigin::official_train);
    auto test = testsup::synthetic_dataset(200, 200, "test", DatasetOrigin::official_test);
    auto plans = cct::policy2(train, test, 10, 11);
    REQUIRE(plans.size() == 10);

    std::map<std::size_t, int> size_counts;
    std::map<std::string, int> test_appearances;
    for (const auto& plan : plans) {
        size_counts[plan.test_ids.size()]++;
        REQUIRE(plan.train_ids.size() + plan.test_ids.size() == 30882);
        for (const auto& id : plan.test_ids) test_appearances[id]++;
    }
    REQUIRE(size_counts[3089] == 2);  // 30882 = 10*3088 + 2
    REQUIRE(size_counts[3088] == 8);
    REQUIRE(test_appearances.size() == 30882);
    for (const auto& [id, n] : test_appearances) REQUIRE(n == 1);
}

TEST_CASE("policy2 regenerates identical folds under the same seed") {
    auto train = testsup::synthetic_dataset(23, 19, "train", DatasetOrigin::official_train);
    auto test = testsup::synthetic_dataset(5, 6, "test", DatasetOrigin::official_test);
    auto a = cct::policy2(train, test, 5, 31);
    auto b = cct::policy2(train, test, 5, 31);
    REQUIRE(a.size() == b.size());
    for (std::size_t f = 0; f < a.size(); ++f) {
        REQUIRE(a[f].train_ids == b[f].train_ids);
        REQUIRE(a[f].test_ids == b[f].test_ids);
    }
    auto c = cct::policy2(train, test, 5, 32);
    bool differs = false;
    for (std::size_t f = 0; f < a.size() && !differs; ++f) {
        differs = a[f].test_ids != c[f].test_ids;
    }
    REQUIRE(differs);
}

TEST_CASE("policy2 with k equal to the sample count is leave-one-out") {
    auto train = testsup::synthetic_dataset(14, 12, "train", DatasetOrigin::official_train);
    auto test = testsup::synthetic_dataset(3, 3, "test", DatasetOrigin::official_test);
    auto plans = cct::policy2(train, test, 32, 5);
    REQUIRE(plans.size() == 32);
    for (const auto& plan : plans) {
        REQUIRE(plan.test_ids.size() == 1);
        REQUIRE(plan.train_ids.size() == 31);
    }
    REQUIRE_THROWS_AS(cct::policy2(train, test, 33, 5), cct::UsageError);
    REQUIRE_THROWS_AS(cct::policy2(train, test, 1, 5), cct::UsageError);
}

TEST_CASE("policy3 reproduces the published size arithmetic") {
    auto train = testsup::synthetic_dataset(16490, 13992, "train", DatasetOrigin::official_train);
    auto test = testsup::synthetic_dataset(200, 200, "test", DatasetOrigin::official_test);

    // n = round((0.1 * 30482 - 400) / 1.1) = round(2407.45) = 2407
    auto plan = cct::policy3(train, test, 0.1, 3);
    REQUIRE(plan.train_ids.size() == 28075);
    REQUIRE(plan.test_ids.size() == 2807);
    const double achieved = static_cast<double>(plan.test_ids.size()) /
                            static_cast<double>(plan.train_ids.size());
    REQUIRE_THAT(achieved, Catch::Matchers::WithinAbs(0.09998, 5e-5));

    // moved ids replay bit-exactly under the same seed
    auto plan_again = cct::policy3(train, test, 0.1, 3);
    REQUIRE(plan.test_ids == plan_again.test_ids);

    // official test already larger than the ratio: nothing moves
    auto big_test = testsup::synthetic_dataset(2000, 2000, "test", DatasetOrigin::official_test);
    auto clamped = cct::policy3(train, big_test, 0.1, 3);
    REQUIRE(clamped.train_ids.size() == train.samples.size());
    REQUIRE(clamped.test_ids.size() == big_test.samples.size());
}

TEST_CASE("shuffle preserves the sample multiset deterministically") {
    auto ds = testsup::synthetic_dataset(40, 25, "d", DatasetOrigin::official_train);
    auto s1 = cct::shuffle(ds, 0);
    REQUIRE(id_multiset(s1) == id_multiset(ds));

    auto s1b = cct::shuffle(ds, 0);
    REQUIRE(std::equal(s1.samples.begin(), s1.samples.end(), s1b.samples.begin(),
                       [](const auto& a, const auto& b) { return a.id == b.id; }));

    bool any_differs = false;
    for (std::uint64_t seed = 1; seed <= 100 && !any_differs; ++seed) {
        auto s2 = cct::shuffle(ds, seed);
        for (std::size_t i = 0; i < ds.samples.size(); ++i) {
            if (s2.samples[i].id != s1.samples[i].id) {
                any_differs = true;
                break;
            }
        }
    }
    REQUIRE(any_differs);
}

TEST_CASE("every policy partitions 1000 random datasets with tight stratification") {
    RngStream rng(99);
    for (int round = 0; round < 1000; ++round) {
        const std::size_t pos_tr = 2 + rng.uniform_below(80);
        const std::size_t neg_tr = 2 + rng.uniform_below(80);
        const std::size_t pos_te = 1 + rng.uniform_below(20);
        const std::size_t neg_te = 1 + rng.uniform_below(20);
        auto train = testsup::synthetic_dataset(pos_tr, neg_tr, "t" + std::to_string(round),
                                                DatasetOrigin::official_train);
        auto test = testsup::synthetic_dataset(pos_te, neg_te, "e" + std::to_string(round),
                                               DatasetOrigin::official_test);
        std::vector<std::string> universe;
        for (const auto& s : train.samples) universe.push_back(s.id);
        for (const auto& s : test.samples) universe.push_back(s.id);

        const std::uint64_t seed = rng.next_u64();
        std::set<std::string> pos_ids;
        for (const auto& s : train.samples)
            if (s.label == Label::positive) pos_ids.insert(s.id);
        for (const auto& s : test.samples)
            if (s.label == Label::positive) pos_ids.insert(s.id);

        {
            auto plan = cct::policy1(train, test, 0.15, seed);
            require_partition(plan, universe);
        }
        {
            const double ratio = 0.2;
            auto plan = cct::policy3(train, test, ratio, seed);
            require_partition(plan, universe);
            // size identity: |test_final| = |S| + n with n as defined
            const double raw = cct::policy3_moved_count(train.samples.size(),
                                                        test.samples.size(), ratio);
            const long long n_moved = std::max(0LL,
                                               static_cast<long long>(std::nearbyint(raw)));
            REQUIRE(plan.test_ids.size() == test.samples.size() + n_moved);
            if (n_moved > 0) {
                const double achieved = static_cast<double>(plan.test_ids.size()) /
                                        static_cast<double>(plan.train_ids.size());
                const double slack = 2.0 / static_cast<double>(plan.train_ids.size());
                REQUIRE(achieved >= ratio - slack);
                REQUIRE(achieved <= ratio + slack);
            }
        }
        {
            const std::size_t n = universe.size();
            const std::size_t k = 2 + rng.uniform_below(std::min<std::size_t>(6, n - 2) + 1);
            auto plans = cct::policy2(train, test, k, seed);
            const std::size_t total_pos = pos_tr + pos_te;
            const std::size_t total_neg = neg_tr + neg_te;
            std::map<std::string, int> appearances;
            for (const auto& plan : plans) {
                require_partition(plan, universe);
                for (const auto& id : plan.test_ids) appearances[id]++;
                // fold sizes differ by at most one sample overall
                REQUIRE(plan.test_ids.size() >= n / k);
                REQUIRE(plan.test_ids.size() <= n / k + 1);
                // per-class deviation at most one sample per fold
                std::size_t fold_pos = 0;
                for (const auto& id : plan.test_ids) fold_pos += pos_ids.count(id);
                REQUIRE(fold_pos >= total_pos / k);
                REQUIRE(fold_pos <= total_pos / k + 1);
                const std::size_t fold_neg = plan.test_ids.size() - fold_pos;
                REQUIRE(fold_neg >= total_neg / k);
                REQUIRE(fold_neg <= total_neg / k + 1);
            }
            REQUIRE(appearances.size() == n);
        }
    }
}

TEST_CASE("unstratified splits still partition with balanced fold sizes") {
    auto train = testsup::synthetic_dataset(31, 20, "train", DatasetOrigin::official_train);
    auto test = testsup::synthetic_dataset(4, 8, "test", DatasetOrigin::official_test);
    const std::size_t n = 63;

    auto plans = cct::policy2(train, test, 4, 17, /*stratify=*/false);
    std::set<std::string> tested;
    for (const auto& plan : plans) {
        REQUIRE(plan.test_ids.size() >= n / 4);
        REQUIRE(plan.test_ids.size() <= n / 4 + 1);
        for (const auto& id : plan.test_ids) REQUIRE(tested.insert(id).second);
    }
    REQUIRE(tested.size() == n);

    auto p3 = cct::policy3(train, test, 0.3, 17, /*stratify=*/false);
    std::set<std::string> all;
    for (const auto& id : p3.train_ids) all.insert(id);
    for (const auto& id : p3.test_ids) all.insert(id);
    REQUIRE(all.size() == n);
}

TEST_CASE("plans replay bit-exactly through their JSON form") {
    auto train = testsup::synthetic_dataset(30, 25, "train", DatasetOrigin::official_train);
    auto test = testsup::synthetic_dataset(8, 9, "test", DatasetOrigin::official_test);
    auto plan = cct::policy3(train, test, 0.25, 1234);

    const std::string text = cct::plan_to_json(plan);
    auto parsed = cct::plan_from_json(text);
    REQUIRE(parsed.policy == plan.policy);
    REQUIRE(parsed.seed == plan.seed);
    REQUIRE(parsed.train_ids == plan.train_ids);
    REQUIRE(parsed.val_ids == plan.val_ids);
    REQUIRE(parsed.test_ids == plan.test_ids);
    REQUIRE(cct::plan_to_json(parsed) == text);

    REQUIRE_THROWS_AS(cct::plan_from_json("{}"), cct::DataError);
    REQUIRE_THROWS_AS(cct::plan_from_json("not json"), cct::DataError);

    // a run manifest in the file does not disturb parsing
    nlohmann::ordered_json run;
    run["version"] = "test";
    auto parsed_run = cct::plan_from_json(cct::plan_to_json(plan, run));
    REQUIRE(parsed_run.train_ids == plan.train_ids);
    REQUIRE(parsed_run.test_ids == plan.test_ids);
}

// ---------------------------------------------------------------------------
// image loading
// ---------------------------------------------------------------------------

TEST_CASE("png round trip is pixel-exact through load_image") {
    TempDir tmp;
    RngStream rng(1);
    std::vector<std::uint8_t> px(16 * 16);
    for (auto& p : px) p = static_cast<std::uint8_t>(rng.uniform_below(256));
    const std::string path = tmp.file("img.png");
    cct::write_png(path, testsup::gray_image(16, 16, px));

    auto t = cct::load_image<double>(path, 16, 16, 1);
    REQUIRE(t.shape() == cct::Shape{1, 16, 16});
    for (std::size_t i = 0; i < px.size(); ++i) {
        REQUIRE(t.values()[i] == px[i] / 255.0);
    }

    // 3-channel request replicates the gray plane
    auto t3 = cct::load_image<double>(path, 16, 16, 3);
    REQUIRE(t3.shape() == cct::Shape{3, 16, 16});
    for (std::size_t i = 0; i < px.size(); ++i) {
        REQUIRE(t3.values()[i] == t3.values()[256 + i]);
        REQUIRE(t3.values()[i] == t3.values()[512 + i]);
    }
}

TEST_CASE("constant images stay constant through any resize") {
    TempDir tmp;
    const std::string path = tmp.file("const.png");
    cct::write_png(path, testsup::gray_image(9, 13, std::vector<std::uint8_t>(9 * 13, 77)));
    auto t = cct::load_image<double>(path, 32, 32, 1);
    for (double v : t.values()) REQUIRE_THAT(v, Catch::Matchers::WithinAbs(77.0 / 255.0, 1e-12));
}

TEST_CASE("2x2 checkerboard upsampled to 4x4 matches the bilinear closed form") {
    TempDir tmp;
    const std::string path = tmp.file("cb.png");
    cct::write_png(path, testsup::gray_image(2, 2, {255, 0, 0, 255}));
    auto t = cct::load_image<double>(path, 4, 4, 1);

    // with src = (dst + 0.5)/2 - 0.5 and edge clamping, the 1-D weights on
    // the two source cells are rows of W = [(1,0), (.75,.25), (.25,.75), (0,1)]
    const double w[4][2] = {{1, 0}, {0.75, 0.25}, {0.25, 0.75}, {0, 1}};
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
            // checkerboard has 1 at (0,0) and (1,1)
            const double want = w[y][0] * w[x][0] + w[y][1] * w[x][1];
            REQUIRE_THAT(t.values()[y * 4 + x], Catch::Matchers::WithinAbs(want, 1e-12));
        }
    }
}

TEST_CASE("rgb images collapse to luma for single-channel models") {
    TempDir tmp;
    cct::ImageBuffer img;
    img.width = img.height = 2;
    img.channels = 3;
    // solid red, green, blue, white
    img.pixels = {255, 0, 0, 0, 255, 0, 0, 0, 255, 255, 255, 255};
    const std::string path = tmp.file("rgb.png");
    cct::write_png(path, img);

    auto t = cct::load_image<double>(path, 2, 2, 1);
    REQUIRE(t.shape() == cct::Shape{1, 2, 2});
    REQUIRE_THAT(t.values()[0], Catch::Matchers::WithinAbs(0.299, 1e-12));
    REQUIRE_THAT(t.values()[1], Catch::Matchers::WithinAbs(0.587, 1e-12));
    REQUIRE_THAT(t.values()[2], Catch::Matchers::WithinAbs(0.114, 1e-12));
    REQUIRE_THAT(t.values()[3], Catch::Matchers::WithinAbs(1.0, 1e-12));

    // rgb stays rgb when three channels are requested (planar layout)
    auto t3 = cct::load_image<double>(path, 2, 2, 3);
    REQUIRE(t3.shape() == cct::Shape{3, 2, 2});
    REQUIRE(t3.values()[0] == 1.0);   // R plane, first pixel
    REQUIRE(t3.values()[4] == 0.0);   // G plane, first pixel
    REQUIRE(t3.values()[5] == 1.0);   // G plane, second pixel (green)
    REQUIRE(t3.values()[10] == 1.0);  // B plane, third pixel (blue)
}

TEST_CASE("jpeg round trip is close on a smooth image") {
    TempDir tmp;
    std::vector<std::uint8_t> px(32 * 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) px[y * 32 + x] = static_cast<std::uint8_t>(4 * (y + x));
    const std::string path = tmp.file("img.jpg");
    cct::write_jpeg(path, testsup::gray_image(32, 32, px), 95);

    auto t = cct::load_image<double>(path, 32, 32, 1);
    double max_err = 0.0;
    for (std::size_t i = 0; i < px.size(); ++i) {
        max_err = std::max(max_err, std::abs(t.values()[i] - px[i] / 255.0));
    }
    REQUIRE(max_err < 8.0 / 255.0);
}

TEST_CASE("image decode failures carry a diagnostic") {
    TempDir tmp;
    const std::string path = tmp.file("junk.png");
    testsup::write_file(path, "this is not an image");
    REQUIRE_THROWS_AS(cct::load_image<double>(path, 8, 8, 1), cct::DataError);
    REQUIRE_THROWS_AS(cct::load_image<double>(tmp.file("absent.png"), 8, 8, 1), cct::DataError);
}
