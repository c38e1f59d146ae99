#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include <unistd.h>

#include "disagree/dataset.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("disagree-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    out << text;
}

inline std::string read_text(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Item rated by annotators "a1".."aN" in order.
inline disagree::Item item(const std::string& id, const std::string& text, const std::vector<int>& labels) {
    disagree::Item it;
    it.id = id;
    it.text = text;
    for (std::size_t i = 0; i < labels.size(); ++i) it.annotator_labels["a" + std::to_string(i + 1)] = labels[i];
    return it;
}

/// Same, with aux fields given per annotator in the same order.
inline disagree::Item item(const std::string& id, const std::string& text, const std::vector<int>& labels,
                           const std::map<std::string, std::vector<int>>& aux) {
    auto it = item(id, text, labels);
    for (const auto& [field, values] : aux) {
        for (std::size_t i = 0; i < values.size(); ++i) it.aux_labels[field]["a" + std::to_string(i + 1)] = values[i];
    }
    return it;
}

}  // namespace testing
