#include <doctest.h>

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "disagree/error.hpp"
#include "disagree/postagg.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace disagree;
using namespace disagree::postagg;
using testing::item;

namespace {

// n items, each rated by every annotator; labels and aux labels random.
Dataset panel(std::size_t n, std::size_t annotators, std::uint64_t seed, DatasetKind kind = DatasetKind::Custom,
              Split split = Split::Train) {
    std::mt19937_64 rng(seed);
    std::vector<Item> items;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<int> labels(annotators), off(annotators), agg(annotators);
        for (std::size_t a = 0; a < annotators; ++a) {
            labels[a] = int(rng() % 2);
            off[a] = labels[a] ? int(rng() % 4 != 0) : int(rng() % 4 == 0);
            agg[a] = int(rng() % 2);
        }
        const std::string text = labels[0] ? fmt::format("bad w{}", rng() % 20) : fmt::format("ok w{}", rng() % 20);
        items.push_back(item(fmt::format("{}{:03}", to_string(split), i), text, labels,
                             {{"offensive", off}, {"aggressive", agg}}));
    }
    return Dataset::build(kind, split, items);
}

Hyperparams quick() {
    Hyperparams hp;
    hp.learning_rate = 0.05;
    hp.epochs = 2;
    hp.hash_bits = 12;
    return hp;
}

std::map<std::string, ScoreTable> constant_scores(const Dataset& ds, double s) {
    std::map<std::string, ScoreTable> out;
    for (const auto& [a, _] : ds.annotators()) {
        ScoreTable t;
        t.target = a;
        t.split = ds.split();
        for (const auto& it : ds.items()) t.entries[it.id] = s;
        out.emplace(a, t);
    }
    return out;
}

}  // namespace

TEST_SUITE("postagg") {

TEST_CASE("one model per registered annotator") {
    CHECK(train_per_annotator(panel(30, 6, 1, DatasetKind::HSBrexit), quick()).models.size() == 6);
    CHECK(train_per_annotator(panel(30, 3, 2), quick()).models.size() == 3);
}

TEST_CASE("inconsistent panels are refused") {
    std::mt19937_64 rng(5);
    std::vector<Item> items;
    for (int i = 0; i < 40; ++i) {
        Item it;
        it.id = fmt::format("m{}", i);
        it.text = "t";
        while (it.annotator_labels.size() < 5) it.annotator_labels[fmt::format("w{}", rng() % 50)] = int(rng() % 2);
        items.push_back(it);
    }
    const Dataset md = Dataset::build(DatasetKind::MD, Split::Train, items);
    CHECK_THROWS_AS(train_per_annotator(md, quick()), RefusalError);
    CHECK_THROWS_AS(run_postagg(md, nullptr, md, quick(), {}, false), RefusalError);
    try {
        require_consistent(md);
    } catch (const RefusalError& e) {
        CHECK(std::string(e.what()).find("Post-Agg unavailable") != std::string::npos);
    }
}

TEST_CASE("single-class annotators train with a warning") {
    std::vector<Item> items;
    for (int i = 0; i < 10; ++i) items.push_back(item(fmt::format("i{}", i), "t", {i % 2, 1}));
    const auto r = train_per_annotator(Dataset::build(DatasetKind::Custom, Split::Train, items), quick());
    CHECK(r.models.size() == 2);
    CHECK(r.warnings.size() == 1);
}

TEST_CASE("conditional probability examples") {
    // Annotator a1 on cell (off=1, agg=1): 3 positives of 4.
    std::vector<Item> items;
    const std::vector<int> labels{1, 1, 1, 0};
    for (int i = 0; i < 4; ++i) items.push_back(item(fmt::format("c{}", i), "t", {labels[i]}, {{"offensive", {1}}, {"aggressive", {1}}}));
    items.push_back(item("c4", "t", {0}, {{"offensive", {0}}, {"aggressive", {1}}}));
    const Dataset ds = Dataset::build(DatasetKind::Custom, Split::Train, items);
    const std::vector<std::string> fields{"offensive", "aggressive"};

    const auto t = estimate_cond_prob(ds, "a1", fields, 1.0);
    CHECK(t.probability(std::vector<int>{1, 1}) == doctest::Approx(4.0 / 6.0));
    CHECK(t.probability(std::vector<int>{1, 0}) == 0.5);  // empty cell: pure prior
    CHECK(t.probability(std::vector<int>{0, 1}) == doctest::Approx(1.0 / 3.0));
    CHECK(t.marginal() == doctest::Approx(4.0 / 7.0));

    const auto raw = estimate_cond_prob(ds, "a1", fields, 0.0);
    CHECK_FALSE(raw.defined(raw.cell_index(std::vector<int>{1, 0})));
    CHECK_THROWS_AS(raw.probability(std::vector<int>{1, 0}), std::domain_error);
    CHECK_THROWS_AS(t.cell_index(std::vector<int>{1}), std::invalid_argument);
    CHECK_THROWS_AS(t.cell_index(std::vector<int>{1, 2}), std::invalid_argument);
    CHECK_THROWS_AS(estimate_cond_prob(ds, "a1", std::vector<std::string>{"nope"}, 1.0), std::invalid_argument);
}

TEST_CASE("annotator who labels hate iff offensive") {
    std::mt19937_64 rng(6);
    std::vector<Item> items;
    for (int i = 0; i < 50; ++i) {
        const int off = int(rng() % 2), agg = int(rng() % 2);
        items.push_back(item(fmt::format("h{}", i), "t", {off}, {{"offensive", {off}}, {"aggressive", {agg}}}));
    }
    const Dataset ds = Dataset::build(DatasetKind::Custom, Split::Train, items);
    const auto t = estimate_cond_prob(ds, "a1", std::vector<std::string>{"offensive", "aggressive"}, 0.0);
    for (int agg : {0, 1}) {
        CHECK(t.probability(std::vector<int>{1, agg}) == 1.0);
        CHECK(t.probability(std::vector<int>{0, agg}) == 0.0);
    }
}

TEST_CASE("conditional probabilities equal the counting oracle") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t annotators = 1 + rng() % 4;
        std::vector<Item> items;
        for (int i = 0; i < int(rng() % 25); ++i) {
            Item it;
            it.id = fmt::format("x{}", i);
            for (std::size_t a = 0; a < annotators; ++a) {
                const std::string ann = fmt::format("a{}", a + 1);
                it.annotator_labels[ann] = int(rng() % 2);
                for (const char* f : {"f0", "f1", "f2"})
                    if (rng() % 5) it.aux_labels[f][ann] = int(rng() % 2);
            }
            items.push_back(it);
        }
        const Dataset ds = Dataset::build(DatasetKind::Custom, Split::Train, items);
        const std::vector<std::string> fields{"f0", "f1", "f2"};
        const double alpha = double(rng() % 3) / 2.0;
        for (const auto& [ann, _] : ds.annotators()) {
            CondProbTable t;
            try {
                t = estimate_cond_prob(ds, ann, fields, alpha);
            } catch (const std::invalid_argument&) {
                continue;  // a field this annotator never used
            }
            for (int cell = 0; cell < 8; ++cell) {
                const std::vector<int> combo{cell & 1, (cell >> 1) & 1, (cell >> 2) & 1};
                const auto expected = oracle::cond_prob(ds, ann, fields, combo, alpha);
                if (expected) {
                    CHECK(t.probability(combo) == *expected);
                } else {
                    CHECK_FALSE(t.defined(t.cell_index(combo)));
                }
            }
        }
    }
}

TEST_CASE("pooled table counts every annotator") {
    const Dataset ds = panel(40, 3, 8);
    const std::vector<std::string> fields{"offensive"};
    const auto pooled = estimate_cond_prob_pooled(ds, fields, 1.0);
    std::size_t total = 0;
    for (const auto& [a, _] : ds.annotators()) total += estimate_cond_prob(ds, a, fields, 1.0).marginal_total;
    CHECK(pooled.marginal_total == total);
    CHECK(pooled.annotator == kPooledAnnotator);
}

TEST_CASE("weighted ensemble examples") {
    const std::vector<double> s{0.6, 0.2}, p{1.0, 0.0};
    CHECK(weighted_ensemble(s, p, 0.0) == doctest::Approx(0.4));
    CHECK(weighted_ensemble(s, p, 1.0) == doctest::Approx(0.45));
    const std::vector<double> ones{1, 1, 1};
    for (double w : {0.0, 0.3, 2.0, 1e6}) CHECK(weighted_ensemble(ones, ones, w) == 1.0);
    CHECK_THROWS(weighted_ensemble(s, ones, 1.0));
    CHECK_THROWS(weighted_ensemble(s, p, -0.1));
    CHECK_THROWS(weighted_ensemble(std::vector<double>{}, std::vector<double>{}, 1.0));
}

TEST_CASE("weighted ensemble algebra") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng() % 10;
        std::vector<double> s(n), p(n);
        for (auto& x : s) x = u(rng);
        for (auto& x : p) x = u(rng);
        const double w = 2.0 * u(rng);
        const double v = weighted_ensemble(s, p, w);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(std::abs(v - oracle::ensemble(s, p, w)) < 1e-14);

        // monotone in each S_i and P_i
        const std::size_t k = rng() % n;
        auto s_up = s, p_up = p;
        s_up[k] = std::min(1.0, s[k] + 0.1);
        p_up[k] = std::min(1.0, p[k] + 0.1);
        CHECK(weighted_ensemble(s_up, p, w) >= v);
        CHECK(weighted_ensemble(s, p_up, w) >= v);
    }
}

TEST_CASE("w sweep picks the oracle minimum") {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t items = 60, annotators = 4;
    std::vector<double> truth_soft(items);
    std::vector<int> truth_hard(items);
    std::vector<EnsembleInput> exact_p, exact_s, same;
    for (std::size_t i = 0; i < items; ++i) {
        EnsembleInput truth_as_p, truth_as_s, equal;
        double mean = 0;
        std::vector<double> truth(annotators), noise(annotators);
        for (std::size_t a = 0; a < annotators; ++a) {
            truth[a] = double(rng() % 2);
            noise[a] = std::clamp(truth[a] + (u(rng) - 0.5) * 1.6, 0.0, 1.0);
            mean += truth[a];
        }
        truth_soft[i] = mean / double(annotators);
        truth_hard[i] = harden(truth_soft[i]);
        exact_p.push_back({noise, truth});
        exact_s.push_back({truth, noise});
        same.push_back({noise, noise});
    }
    const EnsembleConfig cfg;
    CHECK(sweep_w(exact_p, truth_soft, truth_hard, cfg).best_w == 2.0);
    CHECK(sweep_w(exact_s, truth_soft, truth_hard, cfg).best_w == 0.0);
    const auto flat = sweep_w(same, truth_soft, truth_hard, cfg);
    CHECK(flat.best_w == 0.0);
    for (const auto& row : flat.curve) CHECK(std::abs(row.ce - flat.curve[0].ce) < 1e-12);

    // The chosen w minimises CE over the grid, checked point by point.
    std::vector<EnsembleInput> mixed;
    for (std::size_t i = 0; i < items; ++i) {
        std::vector<double> p = exact_p[i].probabilities;
        for (auto& x : p) x = std::clamp(x + (u(rng) - 0.5) * 0.8, 0.0, 1.0);
        mixed.push_back({exact_p[i].scores, p});
    }
    const auto sweep = sweep_w(mixed, truth_soft, truth_hard, cfg);
    double best_ce = 1e300, best_w = -1;
    for (double w : cfg.w_grid) {
        std::vector<double> pred;
        for (const auto& in : mixed) pred.push_back(oracle::ensemble(in.scores, in.probabilities, w));
        const double ce = cross_entropy(truth_soft, pred);
        if (ce < best_ce - 1e-12) {
            best_ce = ce;
            best_w = w;
        }
    }
    CHECK(sweep.best_w == best_w);
}

TEST_CASE("ensemble config validation") {
    EnsembleConfig cfg;
    CHECK_NOTHROW(validate(cfg));
    cfg.w_grid = {0.0, 0.5, 0.5};
    CHECK_THROWS_AS(validate(cfg), ValidationError);
    cfg.w_grid = {};
    CHECK_THROWS_AS(validate(cfg), ValidationError);
    cfg = {};
    cfg.alpha = -1;
    CHECK_THROWS_AS(validate(cfg), ValidationError);
}

TEST_CASE("use_meta off equals use_meta on with w forced to 0") {
    const Dataset train = panel(40, 3, 11), dev = panel(15, 3, 12, DatasetKind::Custom, Split::Dev),
                  eval = panel(15, 3, 13, DatasetKind::Custom, Split::Test);
    EnsembleConfig forced;
    forced.fixed_w = 0.0;
    const auto off = run_postagg(train, &dev, eval, quick(), {}, false);
    const auto on = run_postagg(train, &dev, eval, quick(), forced, true);
    REQUIRE(off.predictions.size() == on.predictions.size());
    for (std::size_t i = 0; i < off.predictions.size(); ++i) CHECK(off.predictions[i].soft == on.predictions[i].soft);
    CHECK(on.w == 0.0);
    CHECK(on.tables.size() == 3);
}

TEST_CASE("from external scores") {
    const Dataset train = panel(40, 3, 14), dev = panel(15, 3, 15, DatasetKind::Custom, Split::Dev),
                  eval = panel(15, 3, 16, DatasetKind::Custom, Split::Test);
    const auto r = run_from_scores(train, &dev, eval, constant_scores(dev, 0.5), constant_scores(eval, 0.5), {}, true);
    CHECK(r.sweep.has_value());
    CHECK(r.predictions.size() == 15);

    auto missing = constant_scores(eval, 0.5);
    missing.erase(missing.begin());
    CHECK_THROWS(run_from_scores(train, &dev, eval, {}, std::move(missing), {}, false));
    CHECK_THROWS_AS(run_from_scores(train, nullptr, eval, {}, constant_scores(eval, 0.5), {}, true), PipelineError);
}

TEST_CASE("eval items without aux labels fall back to the marginal rate") {
    const Dataset train = panel(40, 2, 17);
    std::vector<Item> items;
    for (int i = 0; i < 5; ++i) items.push_back(item(fmt::format("e{}", i), "t", {1, 0}));
    const Dataset eval = Dataset::build(DatasetKind::Custom, Split::Test, items);
    EnsembleConfig cfg;
    cfg.fixed_w = 1.0;
    const auto r = run_from_scores(train, nullptr, eval, {}, constant_scores(eval, 0.5), cfg, true);
    CHECK(r.notes.size() == 1);
    const double m1 = r.tables.at("a1").marginal(), m2 = r.tables.at("a2").marginal();
    CHECK(r.predictions[0].soft == doctest::Approx(((0.5 + m1) / 2 + (0.5 + m2) / 2) / 2));
}

TEST_CASE("no aux fields: metadata request runs at w = 0") {
    std::vector<Item> items;
    for (int i = 0; i < 10; ++i) items.push_back(item(fmt::format("n{}", i), "t", {i % 2, 1}));
    const Dataset ds = Dataset::build(DatasetKind::Custom, Split::Train, items);
    const auto r = run_from_scores(ds, nullptr, ds, {}, constant_scores(ds, 0.3), {}, true);
    CHECK(r.w == 0.0);
    CHECK(r.predictions[0].soft == doctest::Approx(0.3));
    CHECK_FALSE(r.notes.empty());
}

}  // TEST_SUITE
