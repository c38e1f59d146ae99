#include "disagree/synthetic.hpp"

#include <array>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

namespace disagree {

namespace {

constexpr std::size_t kFillerWords = 300;
constexpr std::size_t kWordsPerGroup = 6;
constexpr std::size_t kGroups = 3;  // shared, first half, second half

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }
    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 gen_;
};

std::string pseudo_word(std::size_t index, std::string_view salt) {
    static constexpr std::array<const char*, 16> kSyllables{"ka", "lo", "mi", "ne", "ru", "ta", "vo", "si",
                                                            "pe", "du", "ga", "zo", "fi", "be", "ho", "ly"};
    std::string w(salt);
    std::size_t v = index + 17;
    do {
        w += kSyllables[v % kSyllables.size()];
        v /= kSyllables.size();
    } while (v > 0);
    return w;
}

struct Vocabulary {
    std::vector<std::string> filler;
    std::array<std::vector<std::string>, kGroups> triggers;

    Vocabulary() {
        for (std::size_t i = 0; i < kFillerWords; ++i) filler.push_back(pseudo_word(i * 7 + 3, ""));
        const std::array<const char*, kGroups> salts{"xq", "zj", "wv"};
        for (std::size_t g = 0; g < kGroups; ++g) {
            for (std::size_t i = 0; i < kWordsPerGroup; ++i) triggers[g].push_back(pseudo_word(i * 5 + g, salts[g]));
        }
    }
};

bool reacts_to(std::size_t annotator, std::size_t n_annotators, std::size_t group) {
    if (group == 0) return true;
    const bool first_half = annotator < n_annotators / 2;
    return group == 1 ? first_half : !first_half;
}

Item make_item(const std::string& id, const Vocabulary& vocab, const SyntheticConfig& cfg, Rng& rng) {
    // Trigger count: 0 (35%), 1 (30%), 2 (20%), 3 (15%).
    const double u = rng.uniform();
    const std::size_t n_triggers = u < 0.35 ? 0 : u < 0.65 ? 1 : u < 0.85 ? 2 : 3;

    std::vector<std::string> words;
    const std::size_t n_filler = 6 + rng.below(9);
    for (std::size_t i = 0; i < n_filler; ++i) words.push_back(vocab.filler[rng.below(vocab.filler.size())]);

    std::array<bool, kGroups> present{};
    for (std::size_t t = 0; t < n_triggers; ++t) {
        const double g_u = rng.uniform();
        const std::size_t group = g_u < 0.2 ? 0 : g_u < 0.6 ? 1 : 2;
        present[group] = true;
        const auto& pool = vocab.triggers[group];
        const std::size_t pos = rng.below(words.size() + 1);
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), pool[rng.below(pool.size())]);
    }

    Item item;
    item.id = id;
    item.lang = "en";
    for (const auto& w : words) {
        if (!item.text.empty()) item.text += ' ';
        item.text += w;
    }
    for (std::size_t a = 0; a < cfg.n_annotators; ++a) {
        const std::string annotator = fmt::format("ann{}", a + 1);
        bool latent = false;
        for (std::size_t g = 0; g < kGroups; ++g) latent = latent || (present[g] && reacts_to(a, cfg.n_annotators, g));
        const int label = (latent != rng.bernoulli(cfg.label_noise)) ? 1 : 0;
        item.annotator_labels[annotator] = label;
        if (cfg.with_aux) {
            item.aux_labels["offensive"][annotator] =
                rng.bernoulli(label ? cfg.offensive_given_pos : cfg.offensive_given_neg) ? 1 : 0;
            item.aux_labels["aggressive"][annotator] =
                rng.bernoulli(label ? cfg.aggressive_given_pos : cfg.aggressive_given_neg) ? 1 : 0;
        }
    }
    item.item_meta["n_triggers"] = std::to_string(n_triggers);
    return item;
}

Dataset make_split(const std::string& prefix, std::size_t n, Split split, const Vocabulary& vocab,
                   const SyntheticConfig& cfg, Rng& rng) {
    std::vector<Item> items;
    items.reserve(n);
    for (std::size_t i = 0; i < n; ++i) items.push_back(make_item(fmt::format("{}-{:05}", prefix, i), vocab, cfg, rng));
    return Dataset::build(DatasetKind::Synthetic, split, std::move(items));
}

}  // namespace

SyntheticSplits make_planted(const SyntheticConfig& cfg) {
    if (cfg.n_annotators < 2) throw std::invalid_argument("synthetic corpus needs at least 2 annotators");
    const Vocabulary vocab;
    Rng rng(cfg.seed);
    SyntheticSplits out;
    out.train = make_split("train", cfg.n_train, Split::Train, vocab, cfg, rng);
    out.dev = make_split("dev", cfg.n_dev, Split::Dev, vocab, cfg, rng);
    out.eval = make_split("test", cfg.n_eval, Split::Test, vocab, cfg, rng);
    return out;
}

}  // namespace disagree
