#include "disagree/postagg.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "disagree/error.hpp"

namespace disagree::postagg {

namespace {

constexpr std::size_t kMaxAuxFields = 16;

void check_alpha(double alpha) {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("smoothing alpha must be >= 0");
}

CondProbTable empty_table(std::string annotator, std::span<const std::string> aux_fields, double alpha) {
    check_alpha(alpha);
    if (aux_fields.empty()) throw std::invalid_argument("conditional table needs at least one aux field");
    if (aux_fields.size() > kMaxAuxFields) {
        throw std::invalid_argument(fmt::format("{} aux fields exceed the limit of {}", aux_fields.size(), kMaxAuxFields));
    }
    CondProbTable t;
    t.annotator = std::move(annotator);
    t.aux_fields.assign(aux_fields.begin(), aux_fields.end());
    t.alpha = alpha;
    t.positives.assign(std::size_t{1} << aux_fields.size(), 0);
    t.totals.assign(t.positives.size(), 0);
    return t;
}

// The annotator's aux combination on `item` as a cell index, if complete.
std::optional<std::size_t> observed_cell(const Item& item, const std::string& annotator,
                                         std::span<const std::string> fields) {
    std::size_t cell = 0;
    for (std::size_t f = 0; f < fields.size(); ++f) {
        const auto field_it = item.aux_labels.find(fields[f]);
        if (field_it == item.aux_labels.end()) return std::nullopt;
        const auto label_it = field_it->second.find(annotator);
        if (label_it == field_it->second.end()) return std::nullopt;
        if (label_it->second == 1) cell |= std::size_t{1} << f;
    }
    return cell;
}

void count_annotator(CondProbTable& t, const Dataset& ds, const std::string& annotator) {
    for (const auto& item : ds.items()) {
        const auto label_it = item.annotator_labels.find(annotator);
        if (label_it == item.annotator_labels.end()) continue;
        const auto cell = observed_cell(item, annotator, t.aux_fields);
        if (!cell) continue;
        ++t.totals[*cell];
        t.positives[*cell] += static_cast<std::size_t>(label_it->second);
        ++t.marginal_total;
        t.marginal_positives += static_cast<std::size_t>(label_it->second);
    }
}

bool field_seen_for(const Dataset& ds, const std::string& field, const std::string& annotator) {
    for (const auto& item : ds.items()) {
        const auto it = item.aux_labels.find(field);
        if (it != item.aux_labels.end() && it->second.contains(annotator)) return true;
    }
    return false;
}

double smoothed(std::size_t positives, std::size_t total, double alpha) {
    return (static_cast<double>(positives) + alpha) / (static_cast<double>(total) + 2.0 * alpha);
}

}  // namespace

std::size_t CondProbTable::cell_index(std::span<const int> combination) const {
    if (combination.size() != aux_fields.size()) {
        throw std::invalid_argument(
            fmt::format("combination has {} entries, table has {} fields", combination.size(), aux_fields.size()));
    }
    std::size_t cell = 0;
    for (std::size_t f = 0; f < combination.size(); ++f) {
        if (combination[f] != 0 && combination[f] != 1) throw std::invalid_argument("aux labels must be 0 or 1");
        if (combination[f] == 1) cell |= std::size_t{1} << f;
    }
    return cell;
}

bool CondProbTable::defined(std::size_t cell) const { return totals.at(cell) > 0 || alpha > 0.0; }

double CondProbTable::probability(std::size_t cell) const {
    if (!defined(cell)) {
        throw std::domain_error(fmt::format("annotator '{}': cell {} has no observations and alpha = 0", annotator, cell));
    }
    return smoothed(positives[cell], totals[cell], alpha);
}

double CondProbTable::probability(std::span<const int> combination) const {
    return probability(cell_index(combination));
}

double CondProbTable::marginal() const {
    if (marginal_total == 0 && alpha == 0.0) {
        throw std::domain_error(fmt::format("annotator '{}': no observations and alpha = 0", annotator));
    }
    return smoothed(marginal_positives, marginal_total, alpha);
}

CondProbTable estimate_cond_prob(const Dataset& ds, const std::string& annotator,
                                 std::span<const std::string> aux_fields, double alpha) {
    CondProbTable t = empty_table(annotator, aux_fields, alpha);
    for (const auto& field : aux_fields) {
        if (!field_seen_for(ds, field, annotator)) {
            throw std::invalid_argument(fmt::format("aux field '{}' has no labels from annotator '{}'", field, annotator));
        }
    }
    count_annotator(t, ds, annotator);
    return t;
}

CondProbTable estimate_cond_prob_pooled(const Dataset& ds, std::span<const std::string> aux_fields, double alpha) {
    CondProbTable t = empty_table(std::string(kPooledAnnotator), aux_fields, alpha);
    const auto available = ds.aux_fields();
    for (const auto& field : aux_fields) {
        if (!available.contains(field)) throw std::invalid_argument(fmt::format("aux field '{}' not in dataset", field));
    }
    for (const auto& [annotator, _] : ds.annotators()) count_annotator(t, ds, annotator);
    return t;
}

double weighted_ensemble(std::span<const double> scores, std::span<const double> probabilities, double w) {
    if (scores.size() != probabilities.size()) {
        throw std::invalid_argument(
            fmt::format("weighted_ensemble: {} scores vs {} probabilities", scores.size(), probabilities.size()));
    }
    if (scores.empty()) throw std::invalid_argument("weighted_ensemble: no annotators");
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("weighted_ensemble: w must be >= 0");
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double s = scores[i];
        const double p = probabilities[i];
        if (!(s >= 0.0 && s <= 1.0) || !(p >= 0.0 && p <= 1.0)) {
            throw std::invalid_argument(fmt::format("weighted_ensemble: entry {} outside [0,1]", i));
        }
        sum += (s + w * p) / (1.0 + w);
    }
    return std::clamp(sum / static_cast<double>(scores.size()), 0.0, 1.0);
}

std::vector<double> default_w_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(i / 10.0);
    return grid;
}

void validate(const EnsembleConfig& cfg) {
    std::vector<std::string> problems;
    if (cfg.w_grid.empty()) problems.push_back("w grid is empty");
    for (std::size_t i = 0; i < cfg.w_grid.size(); ++i) {
        if (!(cfg.w_grid[i] >= 0.0) || !std::isfinite(cfg.w_grid[i])) {
            problems.push_back(fmt::format("w grid value {} is negative or not finite", cfg.w_grid[i]));
        }
        if (i > 0 && !(cfg.w_grid[i] > cfg.w_grid[i - 1])) problems.push_back("w grid must be strictly increasing");
    }
    if (cfg.fixed_w && !(*cfg.fixed_w >= 0.0)) problems.push_back("fixed w must be >= 0");
    if (!(cfg.alpha >= 0.0)) problems.push_back("alpha must be >= 0");
    if (!(cfg.threshold > 0.0 && cfg.threshold <= 1.0)) problems.push_back("threshold must be in (0,1]");
    if (!problems.empty()) throw ValidationError("invalid ensemble config", std::move(problems));
}

SweepResult sweep_w(std::span<const EnsembleInput> dev, std::span<const double> truth_soft,
                    std::span<const int> truth_hard, const EnsembleConfig& cfg) {
    validate(cfg);
    if (dev.size() != truth_soft.size() || dev.size() != truth_hard.size()) {
        throw std::invalid_argument("sweep_w: dev inputs and truth must be aligned");
    }
    if (dev.empty()) throw std::invalid_argument("sweep_w: no dev items");

    SweepResult result;
    std::size_t best = 0;
    std::vector<double> soft(dev.size());
    for (const double w : cfg.w_grid) {
        for (std::size_t i = 0; i < dev.size(); ++i) {
            soft[i] = weighted_ensemble(dev[i].scores, dev[i].probabilities, w);
        }
        SweepRow row{w, cross_entropy(truth_soft, soft, cfg.ce_variant),
                     micro_f1(truth_hard, harden_all(soft, cfg.threshold))};
        result.curve.push_back(row);
        const SweepRow& incumbent = result.curve[best];
        const std::size_t idx = result.curve.size() - 1;
        if (row.ce < incumbent.ce - kCeTieTolerance ||
            (std::abs(row.ce - incumbent.ce) <= kCeTieTolerance && row.f1 > incumbent.f1)) {
            best = idx;
        }
    }
    result.best_w = result.curve[best].w;
    return result;
}

void write_sweep_report(const SweepResult& sweep, std::ostream& out) {
    out << "w\tce\tf1\n";
    for (const auto& row : sweep.curve) out << fmt::format("{:.4f}\t{:.10f}\t{:.10f}\n", row.w, row.ce, row.f1);
    out << fmt::format("# best_w\t{:.4f}\n", sweep.best_w);
}

void require_consistent(const Dataset& ds) {
    if (!ds.consistent_annotators()) {
        throw RefusalError(fmt::format(
            "{} {} split: inconsistent annotators (audit_consistency: not every annotator rated every item); "
            "Post-Agg unavailable",
            to_string(ds.kind()), to_string(ds.split())));
    }
}

PerAnnotatorModels train_per_annotator(const Dataset& ds, const Hyperparams& hp) {
    require_consistent(ds);
    if (ds.empty()) throw std::invalid_argument("train_per_annotator: empty training split");

    PerAnnotatorModels out;
    std::vector<std::pair<std::string, std::future<ScorerModel>>> jobs;
    for (const auto& [annotator, _] : ds.annotators()) {
        std::vector<Example> examples;
        examples.reserve(ds.size());
        std::size_t ones = 0;
        for (const auto& item : ds.items()) {
            const int label = item.annotator_labels.at(annotator);
            ones += static_cast<std::size_t>(label);
            examples.push_back({item.text, static_cast<double>(label)});
        }
        if (ones == 0 || ones == examples.size()) {
            out.warnings.push_back(fmt::format("annotator '{}' used a single class ({}) on every item", annotator,
                                               ones == 0 ? 0 : 1));
        }
        jobs.emplace_back(annotator, std::async(std::launch::async, [examples = std::move(examples), hp] {
                              return train(examples, hp);
                          }));
    }
    for (auto& [annotator, job] : jobs) out.models.emplace(annotator, job.get());
    return out;
}

namespace {

struct ProbabilityLookup {
    const std::map<std::string, CondProbTable>& tables;
    bool pooled;
    std::size_t fallbacks = 0;

    double operator()(const Item& item, const std::string& annotator) {
        const CondProbTable& t = tables.at(pooled ? std::string(kPooledAnnotator) : annotator);
        const auto cell = observed_cell(item, annotator, t.aux_fields);
        if (cell && t.defined(*cell)) return t.probability(*cell);
        ++fallbacks;
        if (t.marginal_total > 0 || t.alpha > 0.0) return t.marginal();
        return 0.5;
    }
};

std::vector<EnsembleInput> ensemble_inputs(const Dataset& ds, const std::vector<std::string>& annotators,
                                           const std::map<std::string, ScoreTable>& scores,
                                           ProbabilityLookup* lookup) {
    std::vector<EnsembleInput> out;
    out.reserve(ds.size());
    for (const auto& item : ds.items()) {
        EnsembleInput in;
        for (const auto& a : annotators) {
            in.scores.push_back(scores.at(a).at(item.id));
            in.probabilities.push_back(lookup ? (*lookup)(item, a) : 0.0);
        }
        out.push_back(std::move(in));
    }
    return out;
}

void require_scores_for(const std::map<std::string, ScoreTable>& scores, const std::vector<std::string>& annotators,
                        const Dataset& ds, const char* role) {
    std::vector<std::string> problems;
    for (const auto& a : annotators) {
        const auto it = scores.find(a);
        if (it == scores.end()) {
            problems.push_back(fmt::format("{}: no scores for annotator '{}'", role, a));
            continue;
        }
        for (const auto& item : ds.items()) {
            if (!it->second.entries.contains(item.id)) {
                problems.push_back(fmt::format("{}: annotator '{}' has no score for item '{}'", role, a, item.id));
            }
        }
    }
    if (!problems.empty()) throw ValidationError("incomplete per-annotator scores", std::move(problems));
}

}  // namespace

Result run_from_scores(const Dataset& train, const Dataset* dev, const Dataset& eval,
                       std::map<std::string, ScoreTable> dev_scores, std::map<std::string, ScoreTable> eval_scores,
                       const EnsembleConfig& cfg, bool use_meta) {
    validate(cfg);
    require_consistent(train);
    if (dev) require_consistent(*dev);
    require_consistent(eval);
    if (train.annotators().empty()) throw RefusalError("training split has no annotator labels; Post-Agg unavailable");

    std::vector<std::string> annotators;
    for (const auto& [a, _] : train.annotators()) annotators.push_back(a);
    require_scores_for(eval_scores, annotators, eval, "eval");

    Result result;
    std::vector<std::string> fields = cfg.aux_fields;
    if (fields.empty()) {
        const auto all = train.aux_fields();
        fields.assign(all.begin(), all.end());
    }
    const bool meta = use_meta && !fields.empty();
    if (use_meta && !meta) result.notes.push_back("no aux fields in training split; ensemble runs at w = 0");

    if (meta) {
        if (cfg.pool_annotators) {
            result.tables.emplace(std::string(kPooledAnnotator), estimate_cond_prob_pooled(train, fields, cfg.alpha));
        } else {
            for (const auto& a : annotators) result.tables.emplace(a, estimate_cond_prob(train, a, fields, cfg.alpha));
        }
    }
    ProbabilityLookup lookup{result.tables, cfg.pool_annotators};

    if (!meta) {
        result.w = 0.0;
    } else if (cfg.fixed_w) {
        result.w = *cfg.fixed_w;
    } else {
        if (!dev || dev->empty()) throw PipelineError("selecting w needs a non-empty dev split");
        require_scores_for(dev_scores, annotators, *dev, "dev");
        const auto inputs = ensemble_inputs(*dev, annotators, dev_scores, &lookup);
        std::vector<double> truth_soft;
        std::vector<int> truth_hard;
        for (const auto& item : dev->items()) {
            truth_soft.push_back(item.soft_label);
            truth_hard.push_back(item.hard_label);
        }
        result.sweep = sweep_w(inputs, truth_soft, truth_hard, cfg);
        result.w = result.sweep->best_w;
    }

    lookup.fallbacks = 0;
    const auto inputs = ensemble_inputs(eval, annotators, eval_scores, meta ? &lookup : nullptr);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const double soft = weighted_ensemble(inputs[i].scores, inputs[i].probabilities, result.w);
        result.predictions.push_back({eval.items()[i].id, soft, harden(soft, cfg.threshold)});
    }
    if (lookup.fallbacks > 0) {
        result.notes.push_back(fmt::format(
            "{} eval (item, annotator) pairs lacked a usable aux combination; used the annotator's marginal rate",
            lookup.fallbacks));
    }
    result.dev_scores = std::move(dev_scores);
    result.eval_scores = std::move(eval_scores);
    return result;
}

Result run_postagg(const Dataset& train, const Dataset* dev, const Dataset& eval, const Hyperparams& hp,
                   const EnsembleConfig& cfg, bool use_meta) {
    validate(cfg);
    require_consistent(train);
    auto trained = train_per_annotator(train, hp);

    std::map<std::string, ScoreTable> dev_scores, eval_scores;
    for (const auto& [annotator, model] : trained.models) {
        if (dev) dev_scores.emplace(annotator, score_dataset(model, *dev, annotator));
        eval_scores.emplace(annotator, score_dataset(model, eval, annotator));
    }
    Result result = run_from_scores(train, dev, eval, std::move(dev_scores), std::move(eval_scores), cfg, use_meta);
    result.notes.insert(result.notes.begin(), trained.warnings.begin(), trained.warnings.end());
    return result;
}

}  // namespace disagree::postagg
