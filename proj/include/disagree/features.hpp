#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace disagree {

inline constexpr int kDefaultHashBits = 18;
inline constexpr int kMinHashBits = 10;
inline constexpr int kMaxHashBits = 24;

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// Sparse L2-normalised feature vector, indices strictly increasing and
/// below 2^bits.
struct FeatureVector {
    int bits = kDefaultHashBits;
    std::vector<std::pair<std::uint32_t, double>> entries;

    bool empty() const noexcept { return entries.empty(); }
    std::size_t size() const noexcept { return entries.size(); }
    bool operator==(const FeatureVector&) const = default;
};

/// Hashed bag of n-grams over ASCII-lowercased, whitespace-split tokens:
///   * word unigrams, counted per occurrence;
///   * word bigrams of adjacent tokens that differ (repeats do not pair);
///   * character 3..5-grams of each distinct token wrapped as "<tok>",
///     counted once per token type, over UTF-8 code points.
/// Each key is namespaced by feature family and hashed with FNV-1a into
/// [0, 2^bits). Colliding keys add up. The count vector is L2-normalised.
/// Throws std::invalid_argument unless bits is in [10, 24].
FeatureVector featurize(std::string_view text, int bits = kDefaultHashBits);

}  // namespace disagree
