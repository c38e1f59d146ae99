#include "disagree/cli.hpp"

#include <algorithm>
#include <fstream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "disagree/dataset.hpp"
#include "disagree/error.hpp"
#include "disagree/metrics.hpp"
#include "disagree/predictions.hpp"
#include "disagree/run_config.hpp"
#include "disagree/runner.hpp"
#include "disagree/synthetic.hpp"

namespace disagree {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kMaxProblemsShown = 20;

struct RunFlags {
    std::string config, train, dev, eval, kind, pipeline, ce_variant, out;
    std::optional<std::uint64_t> seed;
    bool use_meta = false;
    bool no_meta = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
    cmd->add_option("--config", f.config, "run config (JSON)");
    cmd->add_option("--train", f.train, "training split");
    cmd->add_option("--dev", f.dev, "dev split");
    cmd->add_option("--eval", f.eval, "evaluation split");
    cmd->add_option("--kind", f.kind, "dataset kind");
    cmd->add_option("--pipeline", f.pipeline, "postagg | dislearn");
    cmd->add_option("--ce-variant", f.ce_variant, "two-class | literal");
    cmd->add_option("--seed", f.seed, "random seed");
    cmd->add_option("--out", f.out, "output directory");
    auto* meta = cmd->add_flag("--use-meta", f.use_meta, "use annotator metadata");
    cmd->add_flag("--no-meta", f.no_meta, "ignore annotator metadata")->excludes(meta);
}

// Flag values override the config file; flag paths are relative to the cwd.
RunConfig build_run_config(const RunFlags& f) {
    json doc = json::object();
    fs::path base;
    if (!f.config.empty()) {
        std::ifstream in(f.config);
        if (!in) throw ParseError(f.config, 0, "cannot open config");
        try {
            doc = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ParseError(f.config, 0, std::string("malformed config: ") + e.what());
        }
        if (!doc.is_object()) throw ValidationError("invalid run config", {"document must be an object"});
        base = fs::path(f.config).parent_path();
    }
    auto set_path = [&](const char* key, const std::string& v) {
        if (!v.empty()) doc[key] = fs::absolute(v).string();
    };
    set_path("train", f.train);
    set_path("dev", f.dev);
    set_path("eval", f.eval);
    set_path("out", f.out);
    if (!f.kind.empty()) doc["kind"] = f.kind;
    if (!f.pipeline.empty()) doc["pipeline"] = f.pipeline;
    if (!f.ce_variant.empty()) doc["ce_variant"] = f.ce_variant;
    if (f.seed) doc["seed"] = *f.seed;
    if (f.use_meta) doc["use_meta"] = true;
    if (f.no_meta) doc["use_meta"] = false;
    return parse_run_config(doc, base);
}

void print_outcome(const RunConfig& cfg, const RunOutcome& o, std::ostream& out) {
    write_eval_report(o.eval, out);
    if (o.w) out << fmt::format("w: {}\n", *o.w);
    for (const auto& n : o.notes) out << "note: " << n << "\n";
    out << "artifacts: " << cfg.out.string() << "\n";
}

int cmd_validate(const std::string& path, const std::string& kind, const std::string& split, int tie, std::ostream& out) {
    const Dataset ds = ingest(path, parse_dataset_kind(kind), {parse_split(split), tie});
    const auto report = audit_consistency(ds);
    out << fmt::format("file: {}\nkind: {}\nitems: {}\nannotators: {}\n", path, to_string(ds.kind()), ds.size(),
                       ds.annotators().size());
    for (const auto& [a, frac] : report.coverage) {
        out << fmt::format("  {}\t{}\t{:.4f}\n", a, ds.annotators().at(a), frac);
    }
    const auto fields = ds.aux_fields();
    if (!fields.empty()) {
        out << "aux fields:";
        for (const auto& f : fields) out << ' ' << f;
        out << "\n";
    }
    out << "consistent annotators: " << (report.consistent ? "yes" : "no") << "\n";
    if (!report.consistent || ds.kind() == DatasetKind::MD || ds.kind() == DatasetKind::ConvAbuse) {
        out << "inconsistent annotators: Post-Agg unavailable\n";
    }
    for (const auto& n : ds.notes()) out << "note: " << n << "\n";
    return kExitOk;
}

Dataset load_gold(const std::string& path, const std::string& kind, int tie) {
    return ingest(path, parse_dataset_kind(kind), {Split::Test, tie});
}

int cmd_evaluate(const std::string& preds_path, const std::string& gold_path, const std::string& kind,
                 const std::string& variant, const std::string& report, std::ostream& out) {
    const Dataset gold = load_gold(gold_path, kind, kDefaultTieLabel);
    const auto preds = load_predictions(fs::path(preds_path));
    const auto result = evaluate_predictions(preds, gold, parse_ce_variant(variant));
    write_eval_report(result, out);
    if (!report.empty()) {
        std::ofstream f(report, std::ios::binary | std::ios::trunc);
        if (!f) throw PipelineError(fmt::format("cannot write '{}'", report));
        write_eval_report(result, f);
    }
    return kExitOk;
}

int cmd_report_errors(const std::string& preds_path, const std::string& gold_path, const std::string& kind,
                      std::size_t top, const std::string& report, std::ostream& out) {
    const Dataset gold = load_gold(gold_path, kind, kDefaultTieLabel);
    const auto preds = align_to(load_predictions(fs::path(preds_path)), gold);
    std::vector<double> truth, predicted;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        truth.push_back(gold.items()[i].soft_label);
        predicted.push_back(preds[i].soft);
    }
    const auto rows = error_report(gold.items(), truth, predicted, top);
    if (report.empty()) {
        write_error_report(rows, out);
    } else {
        std::ofstream f(report, std::ios::binary | std::ios::trunc);
        if (!f) throw PipelineError(fmt::format("cannot write '{}'", report));
        write_error_report(rows, f);
        out << fmt::format("wrote {} rows to {}\n", rows.size(), report);
    }
    return kExitOk;
}

int cmd_synth(const SyntheticConfig& sc, const std::string& dir, std::ostream& out) {
    const auto splits = make_planted(sc);
    const fs::path root(dir);
    fs::create_directories(root);
    write_dataset(splits.train, root / "train.jsonl");
    write_dataset(splits.dev, root / "dev.jsonl");
    write_dataset(splits.eval, root / "test.jsonl");
    nlohmann::ordered_json cfg;
    cfg["train"] = "train.jsonl";
    cfg["dev"] = "dev.jsonl";
    cfg["eval"] = "test.jsonl";
    cfg["kind"] = "synthetic";
    cfg["pipeline"] = "postagg";
    cfg["use_meta"] = true;
    cfg["hyperparams"] = {{"learning_rate", 0.05}, {"epochs", 4}, {"hash_bits", 16}};
    cfg["allow_off_grid"] = true;
    cfg["seed"] = sc.seed;
    cfg["out"] = "run";
    std::ofstream f(root / "config.json", std::ios::trunc);
    f << cfg.dump(2) << "\n";
    out << fmt::format("wrote {} / {} / {} items and config.json to {}\n", splits.train.size(), splits.dev.size(),
                       splits.eval.size(), root.string());
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Annotator-disagreement modelling toolkit", "disagree"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    std::string dataset, kind, split = "train", predictions, gold, variant = "two-class", report;
    int tie = kDefaultTieLabel;
    std::size_t top = 20;

    auto* validate_cmd = app.add_subcommand("validate", "check a dataset file and report annotator coverage");
    validate_cmd->add_option("--dataset", dataset, "dataset file")->required();
    validate_cmd->add_option("--kind", kind, "dataset kind")->required();
    validate_cmd->add_option("--split", split, "train | dev | test");
    validate_cmd->add_option("--tie-label", tie, "majority-vote tie label (0 or 1)")->check(CLI::Range(0, 1));

    RunFlags run_flags;
    auto* run_cmd = app.add_subcommand("run", "run a configured experiment");
    add_run_flags(run_cmd, run_flags);

    RunFlags sweep_flags;
    auto* sweep_cmd = app.add_subcommand("sweep-w", "Post-Agg with metadata: sweep w on dev and print the curve");
    add_run_flags(sweep_cmd, sweep_flags);

    auto* eval_cmd = app.add_subcommand("evaluate", "score a predictions file against gold labels");
    eval_cmd->add_option("--predictions", predictions, "predictions file")->required();
    eval_cmd->add_option("--dataset,--gold", gold, "gold dataset file")->required();
    eval_cmd->add_option("--kind", kind, "dataset kind")->required();
    eval_cmd->add_option("--ce-variant", variant, "two-class | literal");
    eval_cmd->add_option("--out", report, "also write the report here");

    auto* errors_cmd = app.add_subcommand("report-errors", "largest soft-label errors");
    errors_cmd->add_option("--predictions", predictions, "predictions file")->required();
    errors_cmd->add_option("--dataset,--gold", gold, "gold dataset file")->required();
    errors_cmd->add_option("--kind", kind, "dataset kind")->required();
    errors_cmd->add_option("--top", top, "rows to keep");
    errors_cmd->add_option("--out", report, "write TSV here instead of stdout");

    SyntheticConfig synth;
    std::string synth_dir;
    bool no_aux = false;
    auto* synth_cmd = app.add_subcommand("synth", "write a planted synthetic corpus and a starter config");
    synth_cmd->add_option("--out", synth_dir, "output directory")->required();
    synth_cmd->add_option("--seed", synth.seed);
    synth_cmd->add_option("--n-train", synth.n_train);
    synth_cmd->add_option("--n-dev", synth.n_dev);
    synth_cmd->add_option("--n-eval", synth.n_eval);
    synth_cmd->add_option("--annotators", synth.n_annotators);
    synth_cmd->add_flag("--no-aux", no_aux, "omit aux labels");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (validate_cmd->parsed()) return cmd_validate(dataset, kind, split, tie, out);
        if (eval_cmd->parsed()) return cmd_evaluate(predictions, gold, kind, variant, report, out);
        if (errors_cmd->parsed()) return cmd_report_errors(predictions, gold, kind, top, report, out);
        if (synth_cmd->parsed()) {
            synth.with_aux = !no_aux;
            return cmd_synth(synth, synth_dir, out);
        }
        if (run_cmd->parsed()) {
            const auto cfg = build_run_config(run_flags);
            const auto outcome = execute(cfg, &err);
            print_outcome(cfg, outcome, out);
            return kExitOk;
        }
        if (sweep_cmd->parsed()) {
            auto cfg = build_run_config(sweep_flags);
            cfg.pipeline = PipelineKind::PostAgg;
            cfg.use_meta = true;
            cfg.ensemble.fixed_w.reset();
            execute(cfg, &err);
            std::ifstream curve(cfg.out / "sweep_w.tsv");
            if (!curve) throw PipelineError("no w sweep was performed (no usable aux fields)");
            out << curve.rdbuf();
            return kExitOk;
        }
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ValidationError& e) {
        const std::string what = e.what();
        err << "error: " << what.substr(0, what.find('\n')) << "\n";
        const std::size_t shown = std::min<std::size_t>(e.problems().size(), kMaxProblemsShown);
        for (std::size_t i = 0; i < shown; ++i) err << "  - " << e.problems()[i] << "\n";
        if (shown < e.problems().size()) err << fmt::format("  ... {} more\n", e.problems().size() - shown);
        return kExitValidation;
    } catch (const RefusalError& e) {
        err << "refused: " << e.what() << "\n";
        return kExitPipeline;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "pipeline error: " << e.what() << "\n";
        return kExitPipeline;
    }
    return kExitValidation;
}

}  // namespace disagree
