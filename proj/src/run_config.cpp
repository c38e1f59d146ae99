#include "disagree/run_config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

#include "disagree/error.hpp"

namespace disagree {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(PipelineKind p) { return p == PipelineKind::PostAgg ? "postagg" : "dislearn"; }

PipelineKind parse_pipeline(std::string_view name) {
    if (name == "postagg" || name == "post-agg") return PipelineKind::PostAgg;
    if (name == "dislearn" || name == "dis-learning") return PipelineKind::DisLearn;
    throw std::invalid_argument(fmt::format("unknown pipeline '{}' (postagg|dislearn)", name));
}

namespace {

class ConfigReader {
public:
    explicit ConfigReader(std::vector<std::string>& problems) : problems_(problems) {}

    void allow_only(const json& obj, const std::set<std::string>& keys, const std::string& where) {
        for (const auto& [k, _] : obj.items()) {
            if (!keys.contains(k)) problems_.push_back(fmt::format("{}: unknown key '{}'", where, k));
        }
    }

    template <class T>
    void get(const json& obj, const char* key, T& out, const std::string& where) {
        const auto it = obj.find(key);
        if (it == obj.end() || it->is_null()) return;
        try {
            out = it->get<T>();
        } catch (const json::exception&) {
            problems_.push_back(fmt::format("{}.{}: wrong type", where, key));
        }
    }

    template <class Parse, class T>
    void get_enum(const json& obj, const char* key, T& out, Parse parse, const std::string& where) {
        std::string name;
        get(obj, key, name, where);
        if (name.empty()) return;
        try {
            out = parse(name);
        } catch (const std::invalid_argument& e) {
            problems_.push_back(fmt::format("{}.{}: {}", where, key, e.what()));
        }
    }

    void hidden(const json& obj, std::optional<int>& out, const std::string& where) {
        const auto it = obj.find("hidden_size");
        if (it == obj.end()) return;
        if (it->is_null()) {
            out.reset();
        } else if (it->is_number_integer()) {
            out = it->get<int>();
        } else {
            problems_.push_back(fmt::format("{}.hidden_size: expected integer or null", where));
        }
    }

    std::vector<std::string>& problems_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return {};
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

void read_hyperparams(ConfigReader& r, const json& h, Hyperparams& hp) {
    r.allow_only(h, {"hidden_size", "dropout", "learning_rate", "batch_size", "epochs", "hash_bits", "weight_decay", "loss"},
                 "hyperparams");
    r.hidden(h, hp.hidden_size, "hyperparams");
    r.get(h, "dropout", hp.dropout, "hyperparams");
    r.get(h, "learning_rate", hp.learning_rate, "hyperparams");
    r.get(h, "batch_size", hp.batch_size, "hyperparams");
    r.get(h, "epochs", hp.epochs, "hyperparams");
    r.get(h, "hash_bits", hp.hash_bits, "hyperparams");
    r.get(h, "weight_decay", hp.weight_decay, "hyperparams");
    r.get_enum(h, "loss", hp.loss, parse_train_loss, "hyperparams");
}

}  // namespace

RunConfig parse_run_config(const json& doc, const std::filesystem::path& base_dir) {
    std::vector<std::string> problems;
    if (!doc.is_object()) throw ValidationError("run config", {"document must be an object"});
    ConfigReader r(problems);
    r.allow_only(doc,
                 {"train", "dev", "eval", "kind", "pipeline", "use_meta", "hyperparams", "grid", "folds", "objective",
                  "allow_off_grid", "ensemble", "ce_variant", "seed", "tie_label", "out", "scores"},
                 "config");

    RunConfig cfg;
    std::string train, dev, eval, out;
    r.get(doc, "train", train, "config");
    r.get(doc, "dev", dev, "config");
    r.get(doc, "eval", eval, "config");
    r.get(doc, "out", out, "config");
    if (!doc.contains("train")) problems.push_back("config.train is required");
    if (!doc.contains("eval")) problems.push_back("config.eval is required");
    cfg.train = resolve(base_dir, train);
    cfg.dev = resolve(base_dir, dev);
    cfg.eval = resolve(base_dir, eval);
    cfg.out = resolve(base_dir, out.empty() ? cfg.out.string() : out);

    if (!doc.contains("kind")) problems.push_back("config.kind is required");
    r.get_enum(doc, "kind", cfg.kind, parse_dataset_kind, "config");
    r.get_enum(doc, "pipeline", cfg.pipeline, parse_pipeline, "config");
    r.get(doc, "use_meta", cfg.use_meta, "config");
    r.get(doc, "folds", cfg.folds, "config");
    r.get_enum(doc, "objective", cfg.objective, parse_cv_objective, "config");
    r.get(doc, "allow_off_grid", cfg.allow_off_grid, "config");
    r.get_enum(doc, "ce_variant", cfg.ce_variant, parse_ce_variant, "config");
    r.get(doc, "seed", cfg.seed, "config");
    r.get(doc, "tie_label", cfg.tie_label, "config");
    if (cfg.tie_label != 0 && cfg.tie_label != 1) problems.push_back("config.tie_label must be 0 or 1");

    if (doc.contains("hyperparams")) {
        if (doc["hyperparams"].is_object()) {
            read_hyperparams(r, doc["hyperparams"], cfg.hyperparams);
        } else {
            problems.push_back("config.hyperparams must be an object");
        }
    }
    cfg.hyperparams.seed = cfg.seed;

    if (doc.contains("grid")) {
        const json& g = doc["grid"];
        if (!g.is_object()) {
            problems.push_back("config.grid must be an object");
        } else {
            r.allow_only(g, {"hidden_size", "dropout", "learning_rate", "batch_size", "epochs"}, "grid");
            HyperparamGrid grid;
            grid.base = cfg.hyperparams;
            if (g.contains("hidden_size")) {
                grid.hidden_sizes.clear();
                if (!g["hidden_size"].is_array()) problems.push_back("grid.hidden_size must be a list");
                else
                    for (const auto& v : g["hidden_size"]) {
                        if (v.is_null()) grid.hidden_sizes.push_back(std::nullopt);
                        else if (v.is_number_integer()) grid.hidden_sizes.push_back(v.get<int>());
                        else problems.push_back("grid.hidden_size entries must be integers or null");
                    }
            }
            r.get(g, "dropout", grid.dropouts, "grid");
            r.get(g, "learning_rate", grid.learning_rates, "grid");
            r.get(g, "batch_size", grid.batch_sizes, "grid");
            r.get(g, "epochs", grid.epochs, "grid");
            if (!g.contains("hidden_size")) grid.hidden_sizes = {cfg.hyperparams.hidden_size};
            if (!g.contains("dropout")) grid.dropouts = {cfg.hyperparams.dropout};
            if (!g.contains("learning_rate")) grid.learning_rates = {cfg.hyperparams.learning_rate};
            if (!g.contains("batch_size")) grid.batch_sizes = {cfg.hyperparams.batch_size};
            if (!g.contains("epochs")) grid.epochs = {cfg.hyperparams.epochs};
            cfg.grid = std::move(grid);
        }
    }

    if (doc.contains("ensemble")) {
        const json& e = doc["ensemble"];
        if (!e.is_object()) {
            problems.push_back("config.ensemble must be an object");
        } else {
            r.allow_only(e, {"w_grid", "fixed_w", "alpha", "aux_fields", "pool_annotators", "threshold"}, "ensemble");
            auto& ens = cfg.ensemble;
            if (e.contains("w_grid") && e["w_grid"].is_object()) {
                double start = 0.0, stop = 2.0, step = 0.1;
                r.get(e["w_grid"], "start", start, "ensemble.w_grid");
                r.get(e["w_grid"], "stop", stop, "ensemble.w_grid");
                r.get(e["w_grid"], "step", step, "ensemble.w_grid");
                if (!(step > 0.0) || stop < start) {
                    problems.push_back("ensemble.w_grid: need step > 0 and stop >= start");
                } else {
                    ens.w_grid.clear();
                    const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
                    for (long i = 0; i <= n; ++i) ens.w_grid.push_back(start + static_cast<double>(i) * step);
                }
            } else {
                r.get(e, "w_grid", ens.w_grid, "ensemble");
            }
            if (e.contains("fixed_w") && !e["fixed_w"].is_null()) {
                double w = 0.0;
                r.get(e, "fixed_w", w, "ensemble");
                ens.fixed_w = w;
            }
            r.get(e, "alpha", ens.alpha, "ensemble");
            r.get(e, "aux_fields", ens.aux_fields, "ensemble");
            r.get(e, "pool_annotators", ens.pool_annotators, "ensemble");
            r.get(e, "threshold", ens.threshold, "ensemble");
        }
    }
    cfg.ensemble.ce_variant = cfg.ce_variant;

    if (doc.contains("scores")) {
        const json& s = doc["scores"];
        if (!s.is_object()) {
            problems.push_back("config.scores must be an object");
        } else {
            r.allow_only(s, {"dev", "eval"}, "scores");
            std::vector<std::string> dev_files, eval_files;
            r.get(s, "dev", dev_files, "scores");
            r.get(s, "eval", eval_files, "scores");
            for (const auto& f : dev_files) cfg.dev_scores.push_back(resolve(base_dir, f));
            for (const auto& f : eval_files) cfg.eval_scores.push_back(resolve(base_dir, f));
        }
    }

    if (!problems.empty()) throw ValidationError("invalid run config", std::move(problems));
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ParseError(file.string(), 0, "cannot open config");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(file.string(), 0, std::string("malformed config: ") + e.what());
    }
    return parse_run_config(doc, file.parent_path());
}

namespace {

ordered_json hyperparams_json(const Hyperparams& hp) {
    ordered_json h;
    h["hidden_size"] = hp.hidden_size ? ordered_json(*hp.hidden_size) : ordered_json(nullptr);
    h["dropout"] = hp.dropout;
    h["learning_rate"] = hp.learning_rate;
    h["batch_size"] = hp.batch_size;
    h["epochs"] = hp.epochs;
    h["hash_bits"] = hp.hash_bits;
    h["weight_decay"] = hp.weight_decay;
    h["loss"] = to_string(hp.loss);
    return h;
}

std::vector<std::string> path_strings(const std::vector<std::filesystem::path>& paths) {
    std::vector<std::string> out;
    for (const auto& p : paths) out.push_back(p.string());
    return out;
}

}  // namespace

ordered_json to_json(const RunConfig& cfg) {
    ordered_json doc;
    doc["train"] = cfg.train.string();
    doc["dev"] = cfg.dev.string();
    doc["eval"] = cfg.eval.string();
    doc["kind"] = to_string(cfg.kind);
    doc["pipeline"] = to_string(cfg.pipeline);
    doc["use_meta"] = cfg.use_meta;
    doc["hyperparams"] = hyperparams_json(cfg.hyperparams);
    if (cfg.grid) {
        ordered_json g;
        ordered_json hidden = ordered_json::array();
        for (const auto& h : cfg.grid->hidden_sizes) hidden.push_back(h ? ordered_json(*h) : ordered_json(nullptr));
        g["hidden_size"] = hidden;
        g["dropout"] = cfg.grid->dropouts;
        g["learning_rate"] = cfg.grid->learning_rates;
        g["batch_size"] = cfg.grid->batch_sizes;
        g["epochs"] = cfg.grid->epochs;
        doc["grid"] = g;
    }
    doc["folds"] = cfg.folds;
    doc["objective"] = to_string(cfg.objective);
    doc["allow_off_grid"] = cfg.allow_off_grid;
    ordered_json e;
    e["w_grid"] = cfg.ensemble.w_grid;
    e["fixed_w"] = cfg.ensemble.fixed_w ? ordered_json(*cfg.ensemble.fixed_w) : ordered_json(nullptr);
    e["alpha"] = cfg.ensemble.alpha;
    e["aux_fields"] = cfg.ensemble.aux_fields;
    e["pool_annotators"] = cfg.ensemble.pool_annotators;
    e["threshold"] = cfg.ensemble.threshold;
    doc["ensemble"] = e;
    doc["ce_variant"] = to_string(cfg.ce_variant);
    doc["seed"] = cfg.seed;
    doc["tie_label"] = cfg.tie_label;
    doc["out"] = cfg.out.string();
    ordered_json s;
    s["dev"] = path_strings(cfg.dev_scores);
    s["eval"] = path_strings(cfg.eval_scores);
    doc["scores"] = s;
    return doc;
}

void validate(const RunConfig& cfg) {
    std::vector<std::string> problems;
    auto must_exist = [&](const std::filesystem::path& p, const char* what) {
        if (!std::filesystem::is_regular_file(p)) problems.push_back(fmt::format("{} file '{}' not found", what, p.string()));
    };
    must_exist(cfg.train, "train");
    must_exist(cfg.eval, "eval");
    if (!cfg.dev.empty()) must_exist(cfg.dev, "dev");
    for (const auto& p : cfg.dev_scores) must_exist(p, "dev score");
    for (const auto& p : cfg.eval_scores) must_exist(p, "eval score");
    if (cfg.pipeline == PipelineKind::DisLearn && cfg.eval_scores.size() > 1) {
        problems.push_back("dislearn takes a single AGGREGATE eval score file");
    }
    if (cfg.grid && cfg.folds == 0 && cfg.dev.empty()) problems.push_back("folds = 0 tunes on dev, but no dev file given");
    if (cfg.grid && cfg.folds == 1) problems.push_back("folds must be 0 (dev split) or >= 2");

    try {
        if (cfg.grid) {
            for (const auto& hp : expand(*cfg.grid)) validate(hp, cfg.allow_off_grid);
        } else {
            validate(cfg.hyperparams, cfg.allow_off_grid);
        }
    } catch (const ValidationError& e) {
        for (const auto& p : e.problems()) problems.push_back(p);
    }
    try {
        postagg::validate(cfg.ensemble);
    } catch (const ValidationError& e) {
        for (const auto& p : e.problems()) problems.push_back(p);
    }
    if (!problems.empty()) throw ValidationError("invalid run config", std::move(problems));
}

void check_availability(const RunConfig& cfg) {
    if (cfg.pipeline == PipelineKind::PostAgg &&
        (cfg.kind == DatasetKind::MD || cfg.kind == DatasetKind::ConvAbuse)) {
        throw RefusalError(fmt::format("{} lacks consistent annotators: Post-Agg unavailable", to_string(cfg.kind)));
    }
    if (cfg.pipeline == PipelineKind::DisLearn && cfg.use_meta &&
        (cfg.kind == DatasetKind::MD || cfg.kind == DatasetKind::ArMIS)) {
        throw RefusalError(fmt::format(
            "{} data do not contain the related annotation information from the annotators: "
            "Dis-Learning with metadata unavailable",
            to_string(cfg.kind)));
    }
}

}  // namespace disagree
