#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "disagree/cross_validation.hpp"
#include "disagree/metrics.hpp"
#include "disagree/predictions.hpp"
#include "disagree/run_config.hpp"

namespace disagree {

inline constexpr std::string_view kVersion = "1.0.0";
inline constexpr std::string_view kIncompleteMarker = "INCOMPLETE";

struct RunOutcome {
    std::vector<Prediction> predictions;
    EvalResult eval;
    Hyperparams hyperparams;  // after tuning
    std::optional<GridSearchResult> tuning;
    std::optional<double> w;  // Post-Agg only
    std::vector<std::string> notes;
    std::vector<std::filesystem::path> artifacts;  // relative to cfg.out
};

/// Runs one configured experiment and writes its artifacts under `cfg.out`:
/// predictions.jsonl, eval_report.txt, notes.txt, manifest.json, per-target
/// score files under scores/, plus sweep_w.tsv (Post-Agg), ols_report.txt
/// (Dis-Learning with metadata) and cv_report.tsv (when tuning).
///
/// On failure an INCOMPLETE file holding the error is left in `cfg.out` and
/// the exception propagates. A successful run removes any stale marker.
RunOutcome execute(const RunConfig& cfg, std::ostream* log = nullptr);

/// 16 hex digits of FNV-1a over the canonical config text.
std::string config_hash(const RunConfig& cfg);

/// FNV-1a over a file's bytes, as 16 hex digits.
std::string file_hash(const std::filesystem::path& file);

}  // namespace disagree
