#include "disagree/score_table.hpp"

#include <ostream>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

#include "disagree/error.hpp"
#include "jsonl.hpp"

namespace disagree {

using detail::json;
using detail::ordered_json;

double ScoreTable::at(const std::string& item_id) const {
    const auto it = entries.find(item_id);
    if (it == entries.end()) {
        throw std::out_of_range(fmt::format("no score for item '{}' (target {})", item_id, target));
    }
    return it->second;
}

ScoreTable load_scores(std::istream& in, const std::string& source, const Dataset& ds) {
    ScoreTable table;
    table.split = ds.split();
    table.provenance = Provenance::External;
    std::vector<std::string> problems;
    bool have_target = false;

    detail::for_each_record(in, source, [&](const json& rec, std::size_t line) {
        for (const char* key : {"item_id", "target", "score", "split"}) {
            if (!rec.contains(key)) throw ParseError(source, line, fmt::format("missing key '{}'", key));
        }
        if (rec.size() != 4) throw ParseError(source, line, "unexpected keys (want item_id, target, score, split)");
        if (!rec["item_id"].is_string() || !rec["target"].is_string() || !rec["split"].is_string()) {
            throw ParseError(source, line, "item_id, target and split must be strings");
        }
        if (!rec["score"].is_number()) throw ParseError(source, line, "score must be a number");

        const auto id = rec["item_id"].get<std::string>();
        const auto target = rec["target"].get<std::string>();
        const double score = rec["score"].get<double>();
        const auto split = rec["split"].get<std::string>();

        if (!have_target) {
            table.target = target;
            have_target = true;
        } else if (target != table.target) {
            problems.push_back(fmt::format("line {}: target '{}' differs from '{}'", line, target, table.target));
        }
        if (split != to_string(ds.split())) {
            problems.push_back(fmt::format("line {}: split '{}' but dataset split is '{}'", line, split,
                                           to_string(ds.split())));
        }
        if (!(score >= 0.0 && score <= 1.0)) {
            problems.push_back(fmt::format("line {}: item '{}': score {} outside [0,1]", line, id, score));
        }
        if (!ds.find(id)) {
            problems.push_back(fmt::format("line {}: unknown item '{}'", line, id));
        } else if (!table.entries.emplace(id, score).second) {
            problems.push_back(fmt::format("line {}: duplicate item '{}'", line, id));
        }
    });

    for (const auto& item : ds.items()) {
        if (!table.entries.contains(item.id)) problems.push_back(fmt::format("missing item '{}'", item.id));
    }
    if (!ds.empty() && !have_target) problems.push_back("file holds no scores");
    if (!problems.empty()) throw ValidationError(source + ": invalid score file", std::move(problems));
    return table;
}

ScoreTable load_scores(const std::filesystem::path& file, const Dataset& ds) {
    auto in = detail::open_input(file);
    return load_scores(in, file.string(), ds);
}

void write_scores(const ScoreTable& table, std::ostream& out) {
    for (const auto& [id, score] : table.entries) {
        ordered_json rec;
        rec["item_id"] = id;
        rec["target"] = table.target;
        rec["score"] = score;
        rec["split"] = to_string(table.split);
        out << rec.dump() << '\n';
    }
}

void write_scores(const ScoreTable& table, const std::filesystem::path& file) {
    auto out = detail::open_output(file);
    write_scores(table, out);
}

ScoreTable score_dataset(const ScorerModel& model, const Dataset& ds, std::string target) {
    ScoreTable table;
    table.target = std::move(target);
    table.split = ds.split();
    table.provenance = Provenance::Native;
    for (const auto& item : ds.items()) table.entries[item.id] = predict(model, item.text);
    return table;
}

}  // namespace disagree
