#include "disagree/predictions.hpp"

#include <map>
#include <ostream>

#include <fmt/format.h>

#include "disagree/error.hpp"
#include "jsonl.hpp"

namespace disagree {

using detail::json;
using detail::ordered_json;

void write_predictions(std::span<const Prediction> preds, std::ostream& out) {
    for (const auto& p : preds) {
        ordered_json rec;
        rec["item_id"] = p.item_id;
        rec["soft"] = p.soft;
        rec["hard"] = p.hard;
        out << rec.dump() << '\n';
    }
}

void write_predictions(std::span<const Prediction> preds, const std::filesystem::path& file) {
    auto out = detail::open_output(file);
    write_predictions(preds, out);
}

std::vector<Prediction> load_predictions(std::istream& in, const std::string& source) {
    std::vector<Prediction> out;
    std::vector<std::string> problems;
    detail::for_each_record(in, source, [&](const json& rec, std::size_t line) {
        if (!rec.contains("item_id") || !rec["item_id"].is_string()) {
            throw ParseError(source, line, "missing string key 'item_id'");
        }
        if (!rec.contains("soft") || !rec["soft"].is_number()) throw ParseError(source, line, "missing number 'soft'");
        if (!rec.contains("hard") || !rec["hard"].is_number_integer()) {
            throw ParseError(source, line, "missing integer 'hard'");
        }
        Prediction p{rec["item_id"].get<std::string>(), rec["soft"].get<double>(), rec["hard"].get<int>()};
        if (!(p.soft >= 0.0 && p.soft <= 1.0)) {
            problems.push_back(fmt::format("line {}: item '{}': soft {} outside [0,1]", line, p.item_id, p.soft));
        }
        if (p.hard != 0 && p.hard != 1) {
            problems.push_back(fmt::format("line {}: item '{}': hard {} not in {{0,1}}", line, p.item_id, p.hard));
        }
        out.push_back(std::move(p));
    });
    if (!problems.empty()) throw ValidationError(source + ": invalid predictions", std::move(problems));
    return out;
}

std::vector<Prediction> load_predictions(const std::filesystem::path& file) {
    auto in = detail::open_input(file);
    return load_predictions(in, file.string());
}

std::vector<Prediction> align_to(std::span<const Prediction> preds, const Dataset& gold) {
    std::vector<std::string> problems;
    std::map<std::string, const Prediction*> by_id;
    for (const auto& p : preds) {
        if (!gold.find(p.item_id)) {
            problems.push_back(fmt::format("unknown item '{}'", p.item_id));
        } else if (!by_id.emplace(p.item_id, &p).second) {
            problems.push_back(fmt::format("duplicate item '{}'", p.item_id));
        }
    }
    std::vector<Prediction> aligned;
    aligned.reserve(gold.size());
    for (const auto& item : gold.items()) {
        const auto it = by_id.find(item.id);
        if (it == by_id.end()) {
            problems.push_back(fmt::format("missing item '{}'", item.id));
        } else {
            aligned.push_back(*it->second);
        }
    }
    if (!problems.empty()) throw ValidationError("predictions do not match the gold split", std::move(problems));
    return aligned;
}

EvalResult evaluate_predictions(std::span<const Prediction> preds, const Dataset& gold, CeVariant variant) {
    const auto aligned = align_to(preds, gold);
    std::vector<double> truth_soft, pred_soft;
    std::vector<int> truth_hard, pred_hard;
    for (std::size_t i = 0; i < aligned.size(); ++i) {
        truth_soft.push_back(gold.items()[i].soft_label);
        truth_hard.push_back(gold.items()[i].hard_label);
        pred_soft.push_back(aligned[i].soft);
        pred_hard.push_back(aligned[i].hard);
    }
    return evaluate(truth_soft, pred_soft, truth_hard, pred_hard, variant);
}

}  // namespace disagree
