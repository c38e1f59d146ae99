#include "disagree/cross_validation.hpp"

#include <numeric>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

#include "disagree/metrics.hpp"

namespace disagree {

namespace {

// Lower is better for both objectives.
double fold_loss(const ScorerModel& model, std::span<const Example> held_out, CvObjective objective) {
    std::vector<double> truth, pred;
    truth.reserve(held_out.size());
    pred.reserve(held_out.size());
    for (const auto& ex : held_out) {
        truth.push_back(ex.target);
        pred.push_back(predict(model, ex.text));
    }
    if (objective == CvObjective::MinCE) return cross_entropy(truth, pred);
    return -micro_f1(harden_all(truth), harden_all(pred));
}

GridSearchResult pick(std::span<const Hyperparams> grid, const std::vector<double>& losses, CvObjective objective) {
    GridSearchResult result;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        if (g == 0 || losses[g] < losses[result.best_index]) result.best_index = g;
        result.mean_objective.push_back(objective == CvObjective::MinCE ? losses[g] : -losses[g]);
    }
    result.best = grid[result.best_index];
    return result;
}

}  // namespace

std::string_view to_string(CvObjective o) { return o == CvObjective::MinCE ? "min-ce" : "max-f1"; }

CvObjective parse_cv_objective(std::string_view name) {
    if (name == "min-ce" || name == "min-CE") return CvObjective::MinCE;
    if (name == "max-f1" || name == "max-F1") return CvObjective::MaxF1;
    throw std::invalid_argument(fmt::format("unknown objective '{}' (min-ce|max-f1)", name));
}

std::vector<std::size_t> assign_folds(std::size_t n, std::size_t folds, std::uint64_t seed) {
    if (folds < 2) throw std::invalid_argument("assign_folds: need at least 2 folds");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    std::vector<std::size_t> fold_of(n);
    for (std::size_t pos = 0; pos < n; ++pos) fold_of[order[pos]] = pos % folds;
    return fold_of;
}

GridSearchResult grid_search_cv(std::span<const Example> examples, std::span<const Hyperparams> grid,
                                std::size_t folds, CvObjective objective, std::uint64_t fold_seed) {
    if (grid.empty()) throw std::invalid_argument("grid_search_cv: empty grid");
    if (folds < 2) throw std::invalid_argument("grid_search_cv: folds must be >= 2 (or use a dev split)");
    if (examples.size() < folds) {
        throw std::invalid_argument(fmt::format("grid_search_cv: {} examples for {} folds", examples.size(), folds));
    }
    const auto fold_of = assign_folds(examples.size(), folds, fold_seed);

    std::vector<double> losses(grid.size(), 0.0);
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<Example> train, held_out;
        for (std::size_t i = 0; i < examples.size(); ++i) {
            (fold_of[i] == f ? held_out : train).push_back(examples[i]);
        }
        for (std::size_t g = 0; g < grid.size(); ++g) {
            losses[g] += fold_loss(disagree::train(train, grid[g]), held_out, objective);
        }
    }
    for (auto& l : losses) l /= static_cast<double>(folds);
    return pick(grid, losses, objective);
}

GridSearchResult grid_search_holdout(std::span<const Example> train, std::span<const Example> validation,
                                     std::span<const Hyperparams> grid, CvObjective objective) {
    if (grid.empty()) throw std::invalid_argument("grid_search_holdout: empty grid");
    if (validation.empty()) throw std::invalid_argument("grid_search_holdout: empty validation set");
    std::vector<double> losses;
    for (const auto& hp : grid) losses.push_back(fold_loss(disagree::train(train, hp), validation, objective));
    return pick(grid, losses, objective);
}

std::vector<Example> soft_label_examples(const Dataset& ds) {
    std::vector<Example> out;
    out.reserve(ds.size());
    for (const auto& item : ds.items()) out.push_back({item.text, item.soft_label});
    return out;
}

GridSearchResult grid_search_cv(const Dataset& ds, std::span<const Hyperparams> grid, std::size_t folds,
                                CvObjective objective, std::uint64_t fold_seed, const Dataset* dev) {
    const auto train = soft_label_examples(ds);
    if (folds == 0) {
        if (!dev) throw std::invalid_argument("grid_search_cv: folds = 0 requires a dev split");
        const auto validation = soft_label_examples(*dev);
        return grid_search_holdout(train, validation, grid, objective);
    }
    return grid_search_cv(train, grid, folds, objective, fold_seed);
}

}  // namespace disagree
