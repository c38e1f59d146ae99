#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "disagree/cross_validation.hpp"
#include "disagree/error.hpp"
#include "disagree/features.hpp"
#include "disagree/score_table.hpp"
#include "disagree/scorer.hpp"
#include "support.hpp"

using namespace disagree;

namespace {

std::set<std::uint32_t> indices(const FeatureVector& v) {
    std::set<std::uint32_t> out;
    for (const auto& [i, _] : v.entries) out.insert(i);
    return out;
}

std::vector<Example> separable(std::size_t n) {
    std::vector<Example> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({i % 2 ? "good" : "bad", double(i % 2)});
    return out;
}

Hyperparams linear(double lr = 5e-4, int epochs = 4) {
    Hyperparams hp;
    hp.learning_rate = lr;
    hp.epochs = epochs;
    hp.hash_bits = 12;
    hp.seed = 3;
    return hp;
}

Dataset small_dataset(std::size_t n) {
    std::vector<Item> items;
    for (std::size_t i = 0; i < n; ++i) items.push_back(testing::item(fmt::format("s{:02}", i), "t", {int(i % 2)}));
    return Dataset::build(DatasetKind::Custom, Split::Dev, items);
}

ScoreTable read_scores(const std::string& text, const Dataset& ds) {
    std::istringstream in(text);
    return load_scores(in, "mem", ds);
}

std::string score_line(const std::string& id, double score, const char* split = "dev") {
    return fmt::format(R"({{"item_id":"{}","target":"a1","score":{},"split":"{}"}})", id, score, split) + "\n";
}

}  // namespace

TEST_SUITE("scorer") {

TEST_CASE("featurize examples") {
    CHECK(featurize("").empty());
    CHECK(featurize("  \t ").empty());
    CHECK(featurize("the cat sat") == featurize("the cat sat"));
    const auto twice = featurize("abc abc"), once = featurize("abc");
    CHECK(indices(twice) == indices(once));
    CHECK(twice != once);
    CHECK_THROWS_AS(featurize("x", 9), std::invalid_argument);
    CHECK_THROWS_AS(featurize("x", 25), std::invalid_argument);
}

TEST_CASE("feature vectors are sorted, in range and unit length") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        std::string text;
        const int n = int(rng() % 12);
        for (int i = 0; i < n; ++i) text += fmt::format("{}w{} ", i ? " " : "", rng() % 6);
        if (rng() % 3 == 0) text += " Ünïcødé €";
        const int bits = 10 + int(rng() % 15);
        const auto v = featurize(text, bits);
        double norm = 0;
        for (std::size_t i = 0; i < v.entries.size(); ++i) {
            CHECK(v.entries[i].first < (1u << bits));
            if (i) CHECK(v.entries[i - 1].first < v.entries[i].first);
            CHECK(std::isfinite(v.entries[i].second));
            norm += v.entries[i].second * v.entries[i].second;
        }
        if (!v.empty()) CHECK(std::abs(norm - 1.0) < 1e-12);
    }
}

TEST_CASE("fnv1a64 published test vectors") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("predict examples") {
    const ScorerModel zero(12, std::nullopt);
    CHECK(predict(zero, "anything at all") == 0.5);
    CHECK(predict(zero, "") == 0.5);
    ScorerModel biased(12, std::nullopt);
    biased.set_bias(10.0);
    CHECK(predict(biased, "") == doctest::Approx(1.0 / (1.0 + std::exp(-10.0))).epsilon(1e-12));
    CHECK(std::abs(predict(biased, "") - 0.99995) < 1e-5);
}

TEST_CASE("predictions ignore how repeated tokens are arranged") {
    Hyperparams hp = linear(0.05, 3);
    const auto model = train(std::vector<Example>{{"a b c", 1.0}, {"b c d", 0.0}, {"a a d", 1.0}}, hp);
    CHECK(predict(model, "a a b a a") == predict(model, "a a a b a"));
    CHECK(predict(model, "a  a\tb") == predict(model, "A a B"));
}

TEST_CASE("separable one-word classes reach training accuracy 1 in 4 epochs") {
    const auto data = separable(200);
    const auto model = train(data, linear(5e-4, 4));
    std::size_t correct = 0;
    for (const auto& ex : data) correct += (predict(model, ex.text) >= 0.5) == (ex.target == 1.0);
    CHECK(correct == data.size());
}

TEST_CASE("constant 0.5 targets give predictions near 0.5") {
    std::vector<Example> data;
    std::mt19937_64 rng(8);
    for (int i = 0; i < 200; ++i) data.push_back({fmt::format("w{} w{} w{}", rng() % 50, rng() % 50, rng() % 50), 0.5});
    for (std::optional<int> hidden : {std::optional<int>{}, std::optional<int>{8}}) {
        auto hp = linear(5e-3, 4);
        hp.hidden_size = hidden;
        const auto model = train(data, hp);
        double mean = 0;
        for (const auto& ex : data) mean += predict(model, ex.text);
        mean /= double(data.size());
        CHECK(std::abs(mean - 0.5) < 0.05);
    }
}

TEST_CASE("training is bit-for-bit deterministic") {
    std::vector<Example> data;
    std::mt19937_64 rng(9);
    for (int i = 0; i < 120; ++i) {
        data.push_back({fmt::format("w{} w{} w{}", rng() % 30, rng() % 30, rng() % 30), double(rng() % 5) / 4.0});
    }
    for (std::optional<int> hidden : {std::optional<int>{}, std::optional<int>{16}}) {
        auto hp = linear(5e-3, 3);
        hp.hidden_size = hidden;
        hp.dropout = 0.3;
        const auto a = train(data, hp), b = train(data, hp);
        CHECK(a == b);
        hp.seed += 1;
        if (hidden) CHECK_FALSE(train(data, hp) == a);
    }
}

TEST_CASE("predictions stay in (0,1) and parameters finite") {
    std::mt19937_64 rng(10);
    std::vector<Example> data;
    for (int i = 0; i < 60; ++i) data.push_back({fmt::format("t{} t{}", rng() % 5, rng() % 5), double(rng() % 2)});
    auto hp = linear(0.5, 10);
    hp.hidden_size = 32;
    const auto model = train(data, hp);
    CHECK(model.all_finite());
    for (const auto& ex : data) {
        const double p = predict(model, ex.text);
        CHECK(p > 0.0);
        CHECK(p < 1.0);
    }
}

TEST_CASE("trainer input checks") {
    CHECK_THROWS_AS(train(std::vector<Example>{}, linear()), std::invalid_argument);
    CHECK_THROWS_AS(train(std::vector<Example>{{"x", 1.5}}, linear()), std::invalid_argument);
}

TEST_CASE("analytic gradient matches central differences") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    std::vector<FeatureVector> xs;
    std::vector<double> targets;
    for (int i = 0; i < 12; ++i) {
        xs.push_back(featurize(fmt::format("g{} g{} h{}", rng() % 6, rng() % 6, rng() % 4), 10));
        targets.push_back(double(rng() % 3) / 2.0);
    }
    for (auto loss : {TrainLoss::BCE, TrainLoss::MSE}) {
        for (int point = 0; point < 10; ++point) {
            ScorerModel model(10, point % 2 ? std::optional<int>{6} : std::nullopt);
            auto params = model.parameters();
            for (auto& p : params) p = u(rng);
            std::vector<double> grad;
            loss_and_gradient(model, xs, targets, loss, &grad);

            // Restrict to 16 coordinates that the data actually touches.
            std::vector<std::size_t> touched;
            for (std::size_t i = 0; i < grad.size(); ++i)
                if (grad[i] != 0.0) touched.push_back(i);
            std::shuffle(touched.begin(), touched.end(), rng);
            touched.resize(std::min<std::size_t>(16, touched.size()));
            REQUIRE(touched.size() == 16);

            double diff2 = 0, sum2 = 0;
            for (const auto i : touched) {
                const double h = 1e-6, saved = params[i];
                params[i] = saved + h;
                const double up = loss_and_gradient(model, xs, targets, loss, nullptr);
                params[i] = saved - h;
                const double down = loss_and_gradient(model, xs, targets, loss, nullptr);
                params[i] = saved;
                const double numeric = (up - down) / (2 * h);
                diff2 += (numeric - grad[i]) * (numeric - grad[i]);
                sum2 += (std::abs(numeric) + std::abs(grad[i])) * (std::abs(numeric) + std::abs(grad[i]));
            }
            CHECK(std::sqrt(diff2) / std::sqrt(sum2) < 1e-4);
        }
    }
}

TEST_CASE("hyperparameter grid and validation") {
    Hyperparams hp;
    CHECK_NOTHROW(validate(hp, false));
    hp.learning_rate = 0.05;
    CHECK_THROWS_AS(validate(hp, false), ValidationError);
    CHECK_NOTHROW(validate(hp, true));
    hp.learning_rate = -1;
    CHECK_THROWS_AS(validate(hp, true), ValidationError);
    hp = Hyperparams{};
    hp.epochs = 11;
    CHECK(off_grid_values(hp).size() == 1);

    const auto published = expand(HyperparamGrid::published());
    CHECK(published.size() == 4 * 3 * 4 * 2 * 3);
    for (const auto& p : published) CHECK(off_grid_values(p).empty());
    CHECK(parse_train_loss("mse") == TrainLoss::MSE);
    CHECK_THROWS(parse_train_loss("hinge"));
}

}  // TEST_SUITE

TEST_SUITE("cross_validation") {

TEST_CASE("folds partition the items") {
    for (std::size_t n : {3u, 10u, 101u}) {
        for (std::size_t k : {2u, 3u, 5u}) {
            if (n < k) continue;
            const auto folds = assign_folds(n, k, 42);
            REQUIRE(folds.size() == n);
            std::vector<std::size_t> sizes(k, 0);
            for (auto f : folds) {
                REQUIRE(f < k);
                ++sizes[f];
            }
            CHECK(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) == n);
            const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
            CHECK(*hi - *lo <= 1);
            CHECK(assign_folds(n, k, 42) == folds);
        }
    }
}

TEST_CASE("grid of one point returns it") {
    const auto data = separable(30);
    const std::vector<Hyperparams> grid{linear(1e-5, 2)};
    const auto r = grid_search_cv(data, grid, 3, CvObjective::MinCE, 1);
    CHECK(r.best_index == 0);
    CHECK(r.best == grid[0]);
}

TEST_CASE("a strictly better point wins regardless of grid order") {
    const auto data = separable(60);
    const std::vector<Hyperparams> grid{linear(1e-6, 2), linear(5e-4, 4)};
    const auto r = grid_search_cv(data, grid, 3, CvObjective::MinCE, 1);
    CHECK(r.best_index == 1);
    CHECK(r.mean_objective[1] < r.mean_objective[0]);
    const std::vector<Hyperparams> reversed{grid[1], grid[0]};
    CHECK(grid_search_cv(data, reversed, 3, CvObjective::MinCE, 1).best_index == 0);
}

TEST_CASE("ties keep the earlier grid point") {
    const auto data = separable(30);
    const std::vector<Hyperparams> grid{linear(5e-4, 3), linear(5e-4, 3)};
    CHECK(grid_search_cv(data, grid, 3, CvObjective::MaxF1, 1).best_index == 0);
}

TEST_CASE("grid search input checks") {
    const auto data = separable(10);
    const std::vector<Hyperparams> none, one{linear()};
    CHECK_THROWS_AS(grid_search_cv(data, none, 3, CvObjective::MinCE, 1), std::invalid_argument);
    CHECK_THROWS_AS(grid_search_cv(data, one, 1, CvObjective::MinCE, 1), std::invalid_argument);
    CHECK_THROWS_AS(grid_search_cv(std::span(data).first(2), one, 3, CvObjective::MinCE, 1), std::invalid_argument);
}

TEST_CASE("folds = 0 selects on the dev split") {
    std::vector<Item> train_items, dev_items;
    for (int i = 0; i < 40; ++i) {
        train_items.push_back(testing::item(fmt::format("t{}", i), i % 2 ? "good" : "bad", {i % 2, i % 2}));
        dev_items.push_back(testing::item(fmt::format("d{}", i), i % 2 ? "good" : "bad", {i % 2, i % 2}));
    }
    const auto train_ds = Dataset::build(DatasetKind::Custom, Split::Train, train_items);
    const auto dev_ds = Dataset::build(DatasetKind::Custom, Split::Dev, dev_items);
    const std::vector<Hyperparams> grid{linear(1e-6, 2), linear(5e-4, 4)};
    CHECK(grid_search_cv(train_ds, grid, 0, CvObjective::MinCE, 1, &dev_ds).best_index == 1);
    CHECK_THROWS(grid_search_cv(train_ds, grid, 0, CvObjective::MinCE, 1, nullptr));
}

}  // TEST_SUITE

TEST_SUITE("score_table") {

TEST_CASE("complete file with scores 0.5 is valid") {
    const Dataset ds = small_dataset(5);
    std::string text;
    for (const auto& it : ds.items()) text += score_line(it.id, 0.5);
    const auto table = read_scores(text, ds);
    CHECK(table.target == "a1");
    CHECK(table.entries.size() == 5);
    CHECK(table.provenance == Provenance::External);
    CHECK(table.at("s03") == 0.5);
}

TEST_CASE("out-of-range score names its item") {
    const Dataset ds = small_dataset(3);
    const std::string text = score_line("s00", 0.5) + score_line("s01", 1.2) + score_line("s02", 0.1);
    try {
        read_scores(text, ds);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        REQUIRE(e.problems().size() == 1);
        CHECK(e.problems()[0].find("s01") != std::string::npos);
    }
}

TEST_CASE("missing ids are named exactly") {
    const Dataset ds = small_dataset(8);
    std::string text;
    for (const auto& it : ds.items())
        if (it.id != "s01" && it.id != "s04" && it.id != "s07") text += score_line(it.id, 0.3);
    try {
        read_scores(text, ds);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        const std::vector<std::string> expected{"missing item 's01'", "missing item 's04'", "missing item 's07'"};
        CHECK(e.problems() == expected);
    }
}

TEST_CASE("other violations") {
    const Dataset ds = small_dataset(2);
    CHECK_THROWS_AS(read_scores(score_line("s00", 0.5) + score_line("s01", 0.5, "test"), ds), ValidationError);
    CHECK_THROWS_AS(read_scores(score_line("s00", 0.5) + score_line("s01", 0.5) + score_line("zz", 0.5), ds),
                    ValidationError);
    CHECK_THROWS_AS(read_scores(score_line("s00", 0.5) + score_line("s00", 0.5) + score_line("s01", 0.5), ds),
                    ValidationError);
    CHECK_THROWS_AS(read_scores(R"({"item_id":"s00","target":"a1","score":0.5})", ds), ParseError);
    CHECK_THROWS_AS(
        read_scores(R"({"item_id":"s00","target":"a1","score":0.5,"split":"dev","extra":1})", ds), ParseError);
}

TEST_CASE("written scores load back unchanged") {
    const Dataset ds = small_dataset(6);
    ScoreTable table;
    table.target = std::string(kAggregateTarget);
    table.split = Split::Dev;
    for (const auto& it : ds.items()) table.entries[it.id] = 1.0 / double(it.id.back() - '0' + 3);
    std::ostringstream out;
    write_scores(table, out);
    auto back = read_scores(out.str(), ds);
    back.provenance = Provenance::Native;
    CHECK(back == table);
}

TEST_CASE("native scoring covers the dataset") {
    const Dataset ds = small_dataset(4);
    const ScorerModel zero(12, std::nullopt);
    const auto table = score_dataset(zero, ds, "a1");
    CHECK(table.entries.size() == 4);
    CHECK(table.provenance == Provenance::Native);
    CHECK(table.split == Split::Dev);
    for (const auto& [_, s] : table.entries) CHECK(s == 0.5);
}

}  // TEST_SUITE
