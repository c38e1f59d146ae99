#include "disagree/runner.hpp"

#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "disagree/dislearn.hpp"
#include "disagree/error.hpp"
#include "disagree/features.hpp"
#include "disagree/postagg.hpp"
#include "disagree/score_table.hpp"

namespace disagree {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string hex16(std::uint64_t v) { return fmt::format("{:016x}", v); }

std::ofstream open_artifact(const fs::path& file) {
    fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw PipelineError(fmt::format("cannot write '{}'", file.string()));
    return out;
}

std::string safe_name(std::string_view target) {
    std::string out;
    for (const char c : target) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                        c == '_' || c == '.';
        out += ok ? c : '_';
    }
    return out.empty() ? "_" : out;
}

class ArtifactWriter {
public:
    explicit ArtifactWriter(fs::path root) : root_(std::move(root)) {}

    template <class Fn>
    void write(const fs::path& rel, Fn&& body) {
        auto out = open_artifact(root_ / rel);
        body(out);
        if (!out) throw PipelineError(fmt::format("failed writing '{}'", (root_ / rel).string()));
        written_.push_back(rel);
    }

    void scores(const ScoreTable& table) {
        const fs::path rel =
            fs::path("scores") / fmt::format("{}.{}.jsonl", safe_name(table.target), to_string(table.split));
        write(rel, [&](std::ostream& out) { write_scores(table, out); });
    }

    const fs::path& root() const { return root_; }
    const std::vector<fs::path>& written() const { return written_; }

private:
    fs::path root_;
    std::vector<fs::path> written_;
};

std::map<std::string, ScoreTable> load_tables(const std::vector<fs::path>& files, const Dataset& ds) {
    std::map<std::string, ScoreTable> tables;
    std::vector<std::string> problems;
    for (const auto& f : files) {
        auto table = load_scores(f, ds);
        const std::string target = table.target;
        if (!tables.emplace(target, std::move(table)).second) {
            problems.push_back(fmt::format("target '{}' supplied twice ({})", target, f.string()));
        }
    }
    if (!problems.empty()) throw ValidationError("score files", std::move(problems));
    return tables;
}

void write_cv_report(const GridSearchResult& gs, std::span<const Hyperparams> grid, CvObjective objective,
                     std::ostream& out) {
    out << "index\thyperparams\t" << (objective == CvObjective::MinCE ? "mean_ce" : "mean_f1") << "\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        out << i << '\t' << describe(grid[i]) << '\t' << fmt::format("{:.6f}", gs.mean_objective[i]) << "\n";
    }
    out << "# best " << gs.best_index << "\n";
}

ordered_json absolute_config(RunConfig cfg) {
    auto abs = [](fs::path& p) {
        if (!p.empty()) p = fs::weakly_canonical(fs::absolute(p));
    };
    abs(cfg.train);
    abs(cfg.dev);
    abs(cfg.eval);
    abs(cfg.out);
    for (auto& p : cfg.dev_scores) abs(p);
    for (auto& p : cfg.eval_scores) abs(p);
    return to_json(cfg);
}

RunOutcome execute_impl(const RunConfig& cfg, ArtifactWriter& artifacts, std::ostream* log) {
    auto say = [&](const std::string& msg) {
        if (log) *log << msg << "\n";
    };
    validate(cfg);
    check_availability(cfg);

    RunOutcome outcome;
    const Dataset train = ingest(cfg.train, cfg.kind, {Split::Train, cfg.tie_label});
    std::optional<Dataset> dev;
    if (!cfg.dev.empty()) dev = ingest(cfg.dev, cfg.kind, {Split::Dev, cfg.tie_label});
    const Dataset eval = ingest(cfg.eval, cfg.kind, {Split::Test, cfg.tie_label});
    const Dataset* dev_ptr = dev ? &*dev : nullptr;
    for (const Dataset* ds : {&train, dev_ptr, &eval}) {
        if (!ds) continue;
        for (const auto& n : ds->notes()) outcome.notes.push_back(fmt::format("{}: {}", to_string(ds->split()), n));
    }
    say(fmt::format("loaded {} train / {} dev / {} eval items", train.size(), dev ? dev->size() : 0, eval.size()));

    if (cfg.pipeline == PipelineKind::PostAgg) postagg::require_consistent(train);
    if (cfg.pipeline == PipelineKind::DisLearn && cfg.use_meta) dislearn::require_metadata(train);

    const bool external = !cfg.eval_scores.empty();
    outcome.hyperparams = cfg.hyperparams;
    if (cfg.grid && external) {
        outcome.notes.push_back("grid ignored: scores supplied externally");
    } else if (cfg.grid) {
        const auto grid = expand(*cfg.grid);
        say(fmt::format("tuning over {} grid points", grid.size()));
        outcome.tuning = grid_search_cv(train, grid, cfg.folds, cfg.objective, cfg.seed, dev_ptr);
        outcome.hyperparams = outcome.tuning->best;
        artifacts.write("cv_report.tsv",
                        [&](std::ostream& out) { write_cv_report(*outcome.tuning, grid, cfg.objective, out); });
        say("selected " + describe(outcome.hyperparams));
    }

    if (cfg.pipeline == PipelineKind::PostAgg) {
        postagg::Result r;
        if (external) {
            auto dev_tables = dev ? load_tables(cfg.dev_scores, *dev) : std::map<std::string, ScoreTable>{};
            r = postagg::run_from_scores(train, dev_ptr, eval, std::move(dev_tables), load_tables(cfg.eval_scores, eval),
                                         cfg.ensemble, cfg.use_meta);
        } else {
            r = postagg::run_postagg(train, dev_ptr, eval, outcome.hyperparams, cfg.ensemble, cfg.use_meta);
        }
        outcome.predictions = std::move(r.predictions);
        outcome.w = r.w;
        outcome.notes.insert(outcome.notes.end(), r.notes.begin(), r.notes.end());
        if (r.sweep) artifacts.write("sweep_w.tsv", [&](std::ostream& out) { postagg::write_sweep_report(*r.sweep, out); });
        for (const auto& [_, t] : r.dev_scores) artifacts.scores(t);
        for (const auto& [_, t] : r.eval_scores) artifacts.scores(t);
        say(fmt::format("post-agg w = {}", r.w));
    } else {
        dislearn::Result r;
        if (external) {
            auto tables = load_tables(cfg.eval_scores, eval);
            auto& table = tables.begin()->second;
            if (table.target != kAggregateTarget) {
                throw ValidationError("score files",
                                      {fmt::format("dislearn needs target '{}', got '{}'", kAggregateTarget, table.target)});
            }
            r = dislearn::run_from_scores(train, eval, std::move(table), cfg.use_meta, cfg.ensemble.threshold);
        } else {
            r = dislearn::run_dislearn(train, eval, outcome.hyperparams, cfg.use_meta, cfg.ensemble.threshold);
        }
        outcome.predictions = std::move(r.predictions);
        outcome.notes.insert(outcome.notes.end(), r.notes.begin(), r.notes.end());
        if (r.ols) artifacts.write("ols_report.txt", [&](std::ostream& out) { dislearn::write_ols_report(r, out); });
        artifacts.scores(r.sl_bert);
    }

    outcome.eval = evaluate_predictions(outcome.predictions, eval, cfg.ce_variant);
    artifacts.write("predictions.jsonl", [&](std::ostream& out) { write_predictions(outcome.predictions, out); });
    artifacts.write("eval_report.txt", [&](std::ostream& out) { write_eval_report(outcome.eval, out); });
    artifacts.write("notes.txt", [&](std::ostream& out) {
        for (const auto& n : outcome.notes) out << n << "\n";
    });
    say(fmt::format("ce {:.6f}  f1 {:.6f}", outcome.eval.ce, outcome.eval.f1_micro));

    ordered_json manifest;
    manifest["version"] = kVersion;
    manifest["config_hash"] = config_hash(cfg);
    manifest["seed"] = cfg.seed;
    manifest["config"] = absolute_config(cfg);
    manifest["hyperparams_used"] = describe(outcome.hyperparams);
    if (outcome.w) manifest["w"] = *outcome.w;
    ordered_json inputs = ordered_json::object();
    for (const auto* p : {&cfg.train, &cfg.dev, &cfg.eval}) {
        if (!p->empty()) inputs[p->filename().string()] = file_hash(*p);
    }
    for (const auto& p : cfg.dev_scores) inputs[p.filename().string()] = file_hash(p);
    for (const auto& p : cfg.eval_scores) inputs[p.filename().string()] = file_hash(p);
    manifest["inputs"] = inputs;
    ordered_json outputs = ordered_json::object();
    for (const auto& rel : artifacts.written()) outputs[rel.generic_string()] = file_hash(artifacts.root() / rel);
    manifest["outputs"] = outputs;
    artifacts.write("manifest.json", [&](std::ostream& out) { out << manifest.dump(2) << "\n"; });

    outcome.artifacts = artifacts.written();
    return outcome;
}

}  // namespace

std::string config_hash(const RunConfig& cfg) { return hex16(fnv1a64(to_json(cfg).dump())); }

std::string file_hash(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw PipelineError(fmt::format("cannot read '{}'", file.string()));
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return hex16(fnv1a64(bytes));
}

RunOutcome execute(const RunConfig& cfg, std::ostream* log) {
    fs::create_directories(cfg.out);
    const fs::path marker = cfg.out / std::string(kIncompleteMarker);
    {
        std::ofstream m(marker, std::ios::trunc);
        m << "run in progress\n";
    }
    ArtifactWriter artifacts(cfg.out);
    try {
        auto outcome = execute_impl(cfg, artifacts, log);
        fs::remove(marker);
        return outcome;
    } catch (const std::exception& e) {
        std::ofstream m(marker, std::ios::trunc);
        m << "run failed: " << e.what() << "\n";
        for (const auto& rel : artifacts.written()) m << "partial: " << rel.generic_string() << "\n";
        throw;
    }
}

}  // namespace disagree
