#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "disagree/dataset.hpp"
#include "disagree/metrics.hpp"
#include "disagree/predictions.hpp"
#include "disagree/score_table.hpp"
#include "disagree/scorer.hpp"

// Disagreement-targeted learning: regress the soft label directly from text,
// then average with a linear model over per-item metadata rates.
namespace disagree::dislearn {

/// Per-item share of annotators who set an aux field.
struct MetaAverages {
    std::string field;
    std::map<std::string, double> values;  // item id -> mean aux label
    std::vector<std::string> undefined;    // items nobody rated on this field

    std::optional<double> at(const std::string& item_id) const;
};

/// Throws std::invalid_argument when no item carries `field`.
MetaAverages avg_metadata(const Dataset& ds, const std::string& field);

/// Pearson correlation, two-pass. 0 when either input is constant.
/// Throws std::invalid_argument on length mismatch or fewer than 2 points.
double pearson(std::span<const double> x, std::span<const double> y);

struct FieldCorrelation {
    std::string field;
    double r = 0.0;
    std::size_t n = 0;  // items with a defined average
};

struct MetadataSelection {
    std::string first;
    std::string second;
    std::vector<FieldCorrelation> correlations;  // candidate order
};

/// Minimum items with a defined average for a field to be usable.
inline constexpr std::size_t kMinUsableItems = 3;

/// Ranks candidates by |r| against the soft labels of `ds` and returns the
/// top two; equal |r| keeps candidate order. Throws std::invalid_argument
/// with fewer than two usable candidates.
MetadataSelection select_top2_metadata(const Dataset& ds, std::span<const std::string> candidates);

/// SL_meta = b0 + b1 M1 + b2 M2.
struct OLSModel {
    double b0 = 0.0;
    double b1 = 0.0;
    double b2 = 0.0;
    std::string m1_name;
    std::string m2_name;
    std::size_t n = 0;
    double rss = 0.0;
    bool rank_deficient = false;
};

/// Least squares through the normal equations (Cholesky), switching to the
/// eigen-decomposition pseudoinverse when the Gram matrix is singular; that
/// branch yields the minimal-norm coefficients. Throws std::invalid_argument
/// on fewer than 3 points or mismatched lengths.
OLSModel fit_ols(std::span<const double> m1, std::span<const double> m2, std::span<const double> y);

/// Fits on the items where both averages and a target exist.
OLSModel fit_ols(const MetaAverages& m1, const MetaAverages& m2, const std::map<std::string, double>& targets);

/// Residual sum of squares of arbitrary coefficients.
double residual_sum_of_squares(double b0, double b1, double b2, std::span<const double> m1,
                               std::span<const double> m2, std::span<const double> y);

/// Linear prediction clipped to [0,1].
double predict_sl_meta(const OLSModel& model, double m1, double m2);

struct Result {
    std::vector<Prediction> predictions;  // eval order
    ScoreTable sl_bert;                   // text-only soft-label scores on eval
    std::optional<MetadataSelection> selection;
    std::optional<OLSModel> ols;
    std::vector<std::string> notes;
};

/// Throws RefusalError for kinds without annotator metadata (MD, ArMIS) or
/// when `train` has fewer than two aux fields.
void require_metadata(const Dataset& train);

/// Fuses precomputed SL_BERT scores for `eval` with the metadata model.
Result run_from_scores(const Dataset& train, const Dataset& eval, ScoreTable sl_bert, bool use_meta,
                       double threshold = kDefaultThreshold);

/// Trains the soft-label scorer on `train`, scores `eval`, then fuses.
Result run_dislearn(const Dataset& train, const Dataset& eval, const Hyperparams& hp, bool use_meta,
                    double threshold = kDefaultThreshold);

/// Coefficients, feature names and per-candidate r values.
void write_ols_report(const Result& result, std::ostream& out);

}  // namespace disagree::dislearn
