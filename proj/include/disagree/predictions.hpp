#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "disagree/dataset.hpp"
#include "disagree/metrics.hpp"

namespace disagree {

struct Prediction {
    std::string item_id;
    double soft = 0.0;
    int hard = 0;

    bool operator==(const Prediction&) const = default;
};

/// One record per line: `item_id`, `soft`, `hard`.
void write_predictions(std::span<const Prediction> preds, std::ostream& out);
void write_predictions(std::span<const Prediction> preds, const std::filesystem::path& file);

std::vector<Prediction> load_predictions(std::istream& in, const std::string& source);
std::vector<Prediction> load_predictions(const std::filesystem::path& file);

/// Predictions re-ordered to match `gold`. Throws ValidationError naming
/// every gold item without a prediction and every unknown or duplicate id.
std::vector<Prediction> align_to(std::span<const Prediction> preds, const Dataset& gold);

/// CE against gold soft labels and micro-F1 against gold hard labels.
EvalResult evaluate_predictions(std::span<const Prediction> preds, const Dataset& gold,
                                CeVariant variant = CeVariant::TwoClass);

}  // namespace disagree
