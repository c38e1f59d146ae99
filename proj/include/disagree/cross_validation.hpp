#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "disagree/dataset.hpp"
#include "disagree/scorer.hpp"

namespace disagree {

enum class CvObjective { MinCE, MaxF1 };

std::string_view to_string(CvObjective o);
CvObjective parse_cv_objective(std::string_view name);

/// Fold id (0..folds-1) for each of `n` items: a seeded shuffle dealt
/// round-robin, so fold sizes differ by at most one.
std::vector<std::size_t> assign_folds(std::size_t n, std::size_t folds, std::uint64_t seed);

struct GridSearchResult {
    Hyperparams best;
    std::size_t best_index = 0;
    std::vector<double> mean_objective;  // per grid point; CE, or F1 for MaxF1
};

/// Trains every grid point on k-1 folds and scores the held-out fold.
/// Returns the point with the best mean objective; ties keep the earlier
/// grid point. Throws std::invalid_argument on an empty grid, folds < 2, or
/// fewer examples than folds.
GridSearchResult grid_search_cv(std::span<const Example> examples, std::span<const Hyperparams> grid,
                                std::size_t folds, CvObjective objective, std::uint64_t fold_seed);

/// Same selection, scored once on a supplied validation set.
GridSearchResult grid_search_holdout(std::span<const Example> train, std::span<const Example> validation,
                                     std::span<const Hyperparams> grid, CvObjective objective);

/// Soft-label examples (text, soft_label) of a dataset.
std::vector<Example> soft_label_examples(const Dataset& ds);

/// Dataset form: soft-label targets; `folds == 0` selects on `dev` instead.
GridSearchResult grid_search_cv(const Dataset& ds, std::span<const Hyperparams> grid, std::size_t folds,
                                CvObjective objective, std::uint64_t fold_seed, const Dataset* dev = nullptr);

}  // namespace disagree
