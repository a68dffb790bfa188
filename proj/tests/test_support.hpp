#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cct/datasplit.hpp"
#include "cct/image_io.hpp"
#include "cct/rng.hpp"

namespace testsup {

// Self-deleting scratch directory under the system temp path.
class TempDir {
public:
    TempDir() {
        auto base = std::filesystem::temp_directory_path() / "cct-test-XXXXXX";
        std::string tmpl = base.string();
        if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("failed to write " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("failed to read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// In-memory dataset with synthetic ids; no files behind it.
inline cct::LabeledDataset synthetic_dataset(std::size_t positives, std::size_t negatives,
                                             const std::string& prefix,
                                             cct::DatasetOrigin origin) {
    cct::LabeledDataset ds;
    ds.origin = origin;
    for (std::size_t i = 0; i < positives; ++i) {
        std::string id = prefix + "/pos" + std::to_string(i) + ".png";
        ds.samples.push_back({id, id, cct::Label::positive});
    }
    for (std::size_t i = 0; i < negatives; ++i) {
        std::string id = prefix + "/neg" + std::to_string(i) + ".png";
        ds.samples.push_back({id, id, cct::Label::negative});
    }
    return ds;
}

inline cct::ImageBuffer gray_image(std::size_t h, std::size_t w,
                                   const std::vector<std::uint8_t>& px) {
    cct::ImageBuffer img;
    img.width = w;
    img.height = h;
    img.channels = 1;
    img.pixels = px;
    return img;
}

}  // namespace testsup
