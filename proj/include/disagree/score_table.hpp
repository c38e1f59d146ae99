#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>

#include "disagree/dataset.hpp"
#include "disagree/scorer.hpp"

namespace disagree {

/// Target name for scores of the aggregate (soft-label) model.
inline constexpr std::string_view kAggregateTarget = "AGGREGATE";

enum class Provenance { Native, External };

/// Per-item scores in [0,1] for one target (an annotator id or AGGREGATE)
/// over one split.
struct ScoreTable {
    std::string target;
    std::map<std::string, double> entries;  // item id -> score
    Split split = Split::Train;
    Provenance provenance = Provenance::Native;

    double at(const std::string& item_id) const;
    bool operator==(const ScoreTable&) const = default;
};

/// Reads a score-interchange file: one record per line with keys
/// `item_id`, `target`, `score`, `split`. The file must hold exactly one
/// target, cover every item of `ds` exactly once, and match its split.
/// Throws ParseError for malformed records and ValidationError listing every
/// offending id otherwise.
ScoreTable load_scores(const std::filesystem::path& file, const Dataset& ds);
ScoreTable load_scores(std::istream& in, const std::string& source, const Dataset& ds);

/// Writes records in item-id order.
void write_scores(const ScoreTable& table, std::ostream& out);
void write_scores(const ScoreTable& table, const std::filesystem::path& file);

/// Scores every item of `ds` with `model`.
ScoreTable score_dataset(const ScorerModel& model, const Dataset& ds, std::string target);

}  // namespace disagree
