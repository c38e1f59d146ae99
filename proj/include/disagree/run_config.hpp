#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "disagree/cross_validation.hpp"
#include "disagree/dataset.hpp"
#include "disagree/metrics.hpp"
#include "disagree/postagg.hpp"
#include "disagree/scorer.hpp"

namespace disagree {

enum class PipelineKind { PostAgg, DisLearn };

std::string_view to_string(PipelineKind p);
PipelineKind parse_pipeline(std::string_view name);

/// One reproducible run. Written as a single JSON document; relative paths
/// resolve against the config file's directory.
struct RunConfig {
    std::filesystem::path train;
    std::filesystem::path dev;  // optional
    std::filesystem::path eval;
    DatasetKind kind = DatasetKind::Custom;
    PipelineKind pipeline = PipelineKind::DisLearn;
    bool use_meta = false;

    Hyperparams hyperparams;
    std::optional<HyperparamGrid> grid;  // when set, tuned before the run
    std::size_t folds = 3;               // 0: tune on the dev split
    CvObjective objective = CvObjective::MinCE;
    bool allow_off_grid = false;

    postagg::EnsembleConfig ensemble;
    CeVariant ce_variant = CeVariant::TwoClass;
    std::uint64_t seed = 0;
    int tie_label = kDefaultTieLabel;
    std::filesystem::path out = "run";

    // Externally produced score files (e.g. from a transformer exporter) used
    // instead of training the native scorer.
    std::vector<std::filesystem::path> dev_scores;
    std::vector<std::filesystem::path> eval_scores;
};

/// Throws ValidationError listing every bad or unknown key.
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& file);

/// Canonical form: every field, fixed key order. Paths are written as given.
nlohmann::ordered_json to_json(const RunConfig& cfg);

/// Files exist, hyperparameters are valid. Throws ValidationError.
void validate(const RunConfig& cfg);

/// Pipeline/metadata combination allowed for the kind. Throws RefusalError
/// (Post-Agg needs a fixed annotator panel; Dis-Learning with metadata needs
/// annotator metadata).
void check_availability(const RunConfig& cfg);

}  // namespace disagree
