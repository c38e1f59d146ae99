#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "disagree/dataset.hpp"
#include "disagree/metrics.hpp"
#include "disagree/predictions.hpp"
#include "disagree/score_table.hpp"
#include "disagree/scorer.hpp"

// Post-aggregation: one classifier per annotator, fused after training with
// each annotator's metadata-conditional probability of a positive label.
namespace disagree::postagg {

/// Annotator id used for tables estimated over all annotators at once.
inline constexpr std::string_view kPooledAnnotator = "*";

/// P(target = 1 | annotator's aux labels on the item), one cell per
/// combination of the aux fields. Cell index: bit i set iff field i is 1.
struct CondProbTable {
    std::string annotator;
    std::vector<std::string> aux_fields;
    double alpha = 1.0;
    std::vector<std::size_t> positives;  // per cell
    std::vector<std::size_t> totals;     // per cell
    std::size_t marginal_positives = 0;
    std::size_t marginal_total = 0;

    std::size_t cell_count() const noexcept { return positives.size(); }
    /// Throws std::invalid_argument for a combination of the wrong length or
    /// with non-binary entries.
    std::size_t cell_index(std::span<const int> combination) const;
    bool defined(std::size_t cell) const;
    /// (positives + alpha) / (total + 2 alpha). Throws std::domain_error for
    /// an undefined cell (no observations and alpha = 0).
    double probability(std::size_t cell) const;
    double probability(std::span<const int> combination) const;
    /// Same smoothing over every observation of the annotator.
    double marginal() const;

    bool operator==(const CondProbTable&) const = default;
};

/// Counts, on `ds` (the training split), how often `annotator` gave the
/// target label 1 under each combination of their own aux labels. Items the
/// annotator did not rate, or rated without every field, are skipped.
/// Throws std::invalid_argument when a field never appears for the
/// annotator, on alpha < 0, or on more than 16 fields.
CondProbTable estimate_cond_prob(const Dataset& ds, const std::string& annotator,
                                 std::span<const std::string> aux_fields, double alpha);

/// Pools the counts of every annotator into one table.
CondProbTable estimate_cond_prob_pooled(const Dataset& ds, std::span<const std::string> aux_fields, double alpha);

/// (1/N) sum_i (S_i + w P_i) / (1 + w). Throws std::invalid_argument on
/// empty or mismatched inputs, values outside [0,1], or w < 0.
double weighted_ensemble(std::span<const double> scores, std::span<const double> probabilities, double w);

/// 0.0, 0.1, ..., 2.0
std::vector<double> default_w_grid();

struct EnsembleConfig {
    std::vector<double> w_grid = default_w_grid();
    std::optional<double> fixed_w;         // skip the sweep and use this w
    double alpha = 1.0;                    // Laplace smoothing
    std::vector<std::string> aux_fields;   // empty: every aux field in train
    bool pool_annotators = false;
    CeVariant ce_variant = CeVariant::TwoClass;
    double threshold = kDefaultThreshold;
};

/// Throws ValidationError unless the grid is non-empty, non-negative and
/// strictly increasing, and alpha, fixed_w and threshold are in range.
void validate(const EnsembleConfig& cfg);

/// Per-item ensemble inputs, aligned by annotator.
struct EnsembleInput {
    std::vector<double> scores;         // S_i
    std::vector<double> probabilities;  // P_i
};

struct SweepRow {
    double w = 0.0;
    double ce = 0.0;
    double f1 = 0.0;
};

struct SweepResult {
    double best_w = 0.0;
    std::vector<SweepRow> curve;
};

/// CE values closer than this count as equal when selecting w.
inline constexpr double kCeTieTolerance = 1e-12;

/// Evaluates every grid w on the dev items and picks the lowest CE; ties go
/// to the higher F1, then the smaller w.
SweepResult sweep_w(std::span<const EnsembleInput> dev, std::span<const double> truth_soft,
                    std::span<const int> truth_hard, const EnsembleConfig& cfg);

/// Tab-separated `w ce f1` rows with a header.
void write_sweep_report(const SweepResult& sweep, std::ostream& out);

/// Throws RefusalError when `ds` lacks a fixed annotator set.
void require_consistent(const Dataset& ds);

struct PerAnnotatorModels {
    std::map<std::string, ScorerModel> models;
    std::vector<std::string> warnings;
};

/// One classifier per registered annotator, trained on that annotator's
/// labels. Annotators train concurrently; results do not depend on
/// scheduling. Refuses inconsistent datasets.
PerAnnotatorModels train_per_annotator(const Dataset& ds, const Hyperparams& hp);

struct Result {
    std::vector<Prediction> predictions;  // eval order
    double w = 0.0;
    std::optional<SweepResult> sweep;
    std::map<std::string, CondProbTable> tables;  // by annotator (or "*")
    std::map<std::string, ScoreTable> dev_scores;
    std::map<std::string, ScoreTable> eval_scores;
    std::vector<std::string> notes;
};

/// Fuses precomputed per-annotator scores (native or external). `dev_scores`
/// may be empty when no sweep is needed (use_meta false or fixed_w set).
/// Without usable aux fields the ensemble runs at w = 0.
Result run_from_scores(const Dataset& train, const Dataset* dev, const Dataset& eval,
                       std::map<std::string, ScoreTable> dev_scores, std::map<std::string, ScoreTable> eval_scores,
                       const EnsembleConfig& cfg, bool use_meta);

/// Full pipeline: train per-annotator models on `train`, score dev and eval,
/// then fuse.
Result run_postagg(const Dataset& train, const Dataset* dev, const Dataset& eval, const Hyperparams& hp,
                   const EnsembleConfig& cfg, bool use_meta);

}  // namespace disagree::postagg
