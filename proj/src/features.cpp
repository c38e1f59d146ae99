#include "disagree/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

namespace disagree {

namespace {

constexpr char kSep = '\x1f';

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (const char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (is_space(c)) {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
        } else {
            current += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch;
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

// Byte offsets of code point starts, plus the end offset.
std::vector<std::size_t> codepoint_offsets(std::string_view s) {
    std::vector<std::size_t> offsets;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) offsets.push_back(i);
    }
    offsets.push_back(s.size());
    return offsets;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

FeatureVector featurize(std::string_view text, int bits) {
    if (bits < kMinHashBits || bits > kMaxHashBits) {
        throw std::invalid_argument(fmt::format("hash bits {} outside [{}, {}]", bits, kMinHashBits, kMaxHashBits));
    }
    const std::uint64_t mask = (std::uint64_t{1} << bits) - 1;
    std::vector<std::uint32_t> hits;
    auto add = [&](char family, std::string_view key) {
        std::string buf;
        buf.reserve(key.size() + 2);
        buf += family;
        buf += kSep;
        buf.append(key);
        hits.push_back(static_cast<std::uint32_t>(fnv1a64(buf) & mask));
    };

    const auto tokens = tokenize(text);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        add('u', tokens[i]);
        if (i + 1 < tokens.size() && tokens[i] != tokens[i + 1]) {
            add('b', tokens[i] + ' ' + tokens[i + 1]);
        }
    }
    const std::set<std::string> types(tokens.begin(), tokens.end());
    for (const auto& tok : types) {
        const std::string wrapped = '<' + tok + '>';
        const auto offsets = codepoint_offsets(wrapped);
        const std::size_t n_cp = offsets.size() - 1;
        for (std::size_t n = 3; n <= 5; ++n) {
            for (std::size_t start = 0; start + n <= n_cp; ++start) {
                add('c', std::string_view(wrapped).substr(offsets[start], offsets[start + n] - offsets[start]));
            }
        }
    }

    FeatureVector fv;
    fv.bits = bits;
    std::sort(hits.begin(), hits.end());
    for (const auto idx : hits) {
        if (!fv.entries.empty() && fv.entries.back().first == idx) {
            fv.entries.back().second += 1.0;
        } else {
            fv.entries.emplace_back(idx, 1.0);
        }
    }
    double norm = 0.0;
    for (const auto& [_, v] : fv.entries) norm += v * v;
    norm = std::sqrt(norm);
    for (auto& [_, v] : fv.entries) v /= norm;
    return fv;
}

}  // namespace disagree
