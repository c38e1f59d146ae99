#include "disagree/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

#include "disagree/error.hpp"
#include "jsonl.hpp"

namespace disagree {

using detail::json;
using detail::ordered_json;

namespace {

constexpr double kSoftTolerance = 1e-9;

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool is_binary(int v) { return v == 0 || v == 1; }

// Hard label for an item whose annotator labels are unavailable.
int harden_with_tie(double soft, int tie_label) {
    if (soft > 0.5) return 1;
    if (soft < 0.5) return 0;
    return tie_label;
}

}  // namespace

std::string_view to_string(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::MD: return "MD";
        case DatasetKind::HSBrexit: return "HS-Brexit";
        case DatasetKind::ArMIS: return "ArMIS";
        case DatasetKind::ConvAbuse: return "ConvAbuse";
        case DatasetKind::Synthetic: return "synthetic";
        case DatasetKind::Custom: return "custom";
    }
    return "custom";
}

std::string_view to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Dev: return "dev";
        case Split::Test: return "test";
    }
    return "train";
}

DatasetKind parse_dataset_kind(std::string_view name) {
    const std::string n = lower(name);
    if (n == "md") return DatasetKind::MD;
    if (n == "hs-brexit" || n == "hsbrexit") return DatasetKind::HSBrexit;
    if (n == "armis") return DatasetKind::ArMIS;
    if (n == "convabuse") return DatasetKind::ConvAbuse;
    if (n == "synthetic") return DatasetKind::Synthetic;
    if (n == "custom") return DatasetKind::Custom;
    throw std::invalid_argument(fmt::format("unknown dataset kind '{}'", name));
}

Split parse_split(std::string_view name) {
    const std::string n = lower(name);
    if (n == "train") return Split::Train;
    if (n == "dev") return Split::Dev;
    if (n == "test" || n == "eval") return Split::Test;
    throw std::invalid_argument(fmt::format("unknown split '{}'", name));
}

std::optional<std::set<std::string>> aux_vocabulary(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::MD:
        case DatasetKind::ArMIS:
            return std::set<std::string>{};
        case DatasetKind::HSBrexit:
            return std::set<std::string>{"offensive", "aggressive"};
        case DatasetKind::ConvAbuse:
            // abuse type (7), target (3), directness (2)
            return std::set<std::string>{
                "ableist",       "homophobic",         "intellectual",      "racist",
                "sexist",        "sex_harassment",     "transphobic",       "target_generalised",
                "target_individual", "target_system",  "explicit",          "implicit"};
        case DatasetKind::Synthetic:
        case DatasetKind::Custom:
            return std::nullopt;
    }
    return std::nullopt;
}

std::set<std::string> required_aux_fields(DatasetKind kind) {
    if (kind == DatasetKind::HSBrexit) return {"offensive", "aggressive"};
    return {};
}

int majority_vote(std::span<const int> labels, int tie_label) {
    if (labels.empty()) throw std::invalid_argument("majority_vote: empty label list");
    if (!is_binary(tie_label)) throw std::invalid_argument("majority_vote: tie label must be 0 or 1");
    std::size_t ones = 0;
    for (int v : labels) {
        if (!is_binary(v)) throw std::invalid_argument(fmt::format("majority_vote: label {} not in {{0,1}}", v));
        ones += static_cast<std::size_t>(v);
    }
    const std::size_t zeros = labels.size() - ones;
    if (ones > zeros) return 1;
    if (zeros > ones) return 0;
    return tie_label;
}

double mean_soft_label(std::span<const int> labels) {
    if (labels.empty()) throw std::invalid_argument("mean_soft_label: empty label list");
    long sum = 0;
    for (int v : labels) {
        if (!is_binary(v)) throw std::invalid_argument(fmt::format("mean_soft_label: label {} not in {{0,1}}", v));
        sum += v;
    }
    return static_cast<double>(sum) / static_cast<double>(labels.size());
}

std::vector<int> label_values(const AnnotatorLabels& labels) {
    std::vector<int> out;
    out.reserve(labels.size());
    for (const auto& [id, v] : labels) out.push_back(v);
    return out;
}

Dataset Dataset::build(DatasetKind kind, Split split, std::vector<Item> items, int tie_label,
                       std::vector<std::string> notes) {
    if (!is_binary(tie_label)) throw std::invalid_argument("tie label must be 0 or 1");

    std::vector<std::string> problems;
    Dataset ds;
    ds.kind_ = kind;
    ds.split_ = split;
    ds.tie_label_ = tie_label;
    ds.notes_ = std::move(notes);

    const auto vocabulary = aux_vocabulary(kind);
    const auto required = required_aux_fields(kind);

    for (std::size_t i = 0; i < items.size(); ++i) {
        Item& item = items[i];
        if (item.id.empty()) problems.push_back(fmt::format("item #{}: empty id", i));
        if (!ds.index_.emplace(item.id, i).second) {
            problems.push_back(fmt::format("duplicate id '{}'", item.id));
        }

        bool labels_ok = true;
        for (const auto& [annotator, v] : item.annotator_labels) {
            if (!is_binary(v)) {
                problems.push_back(fmt::format("item '{}': label {} from annotator '{}' not in {{0,1}}",
                                               item.id, v, annotator));
                labels_ok = false;
            }
            ++ds.annotators_[annotator];
        }

        if (!item.annotator_labels.empty()) {
            if (labels_ok) {
                const auto values = label_values(item.annotator_labels);
                item.soft_label = mean_soft_label(values);
                item.hard_label = majority_vote(values, tie_label);
            }
        } else {
            if (!(item.soft_label >= 0.0 && item.soft_label <= 1.0)) {
                problems.push_back(fmt::format("item '{}': soft label {} outside [0,1]", item.id, item.soft_label));
            }
            if (!is_binary(item.hard_label)) {
                problems.push_back(fmt::format("item '{}': hard label {} not in {{0,1}}", item.id, item.hard_label));
            }
        }

        for (const auto& [field, per_annotator] : item.aux_labels) {
            if (vocabulary && !vocabulary->contains(field)) {
                problems.push_back(fmt::format("item '{}': aux field '{}' not expected for kind {}",
                                               item.id, field, to_string(kind)));
            }
            for (const auto& [annotator, v] : per_annotator) {
                if (!is_binary(v)) {
                    problems.push_back(fmt::format("item '{}': aux '{}' label {} not in {{0,1}}", item.id,
                                                   field, v));
                }
                if (!item.annotator_labels.contains(annotator)) {
                    problems.push_back(fmt::format("item '{}': aux '{}' names annotator '{}' who did not rate the item",
                                                   item.id, field, annotator));
                }
            }
        }
        for (const auto& field : required) {
            if (!item.aux_labels.contains(field)) {
                problems.push_back(fmt::format("item '{}': missing aux field '{}' required for kind {}",
                                               item.id, field, to_string(kind)));
            }
        }
    }

    if (!problems.empty()) throw ValidationError("dataset validation failed", std::move(problems));

    ds.items_ = std::move(items);
    ds.consistent_ = audit_consistency(ds.items_).consistent;
    return ds;
}

std::set<std::string> Dataset::aux_fields() const {
    std::set<std::string> out;
    for (const auto& item : items_) {
        for (const auto& [field, _] : item.aux_labels) out.insert(field);
    }
    return out;
}

const Item* Dataset::find(std::string_view id) const {
    const auto it = index_.find(id);
    return it == index_.end() ? nullptr : &items_[it->second];
}

ConsistencyReport audit_consistency(std::span<const Item> items) {
    ConsistencyReport report;
    report.n_items = items.size();
    std::map<std::string, std::size_t> counts;
    for (const auto& item : items) {
        for (const auto& [annotator, _] : item.annotator_labels) ++counts[annotator];
    }
    // Every item's key-set equals the registry iff every registered
    // annotator rated every item.
    for (const auto& [annotator, n] : counts) {
        report.coverage[annotator] = static_cast<double>(n) / static_cast<double>(items.size());
        if (n != items.size()) report.consistent = false;
    }
    return report;
}

ConsistencyReport audit_consistency(const Dataset& ds) { return audit_consistency(ds.items()); }

std::string flatten_conversation(std::span<const std::pair<std::string, std::string>> turns) {
    std::string out;
    for (const auto& [speaker, text] : turns) {
        if (!out.empty()) out += ' ';
        std::string tag = lower(speaker);
        std::transform(tag.begin(), tag.end(), tag.begin(),
                       [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
        out += '[';
        out += tag;
        out += "] ";
        out += text;
    }
    return out;
}

int binarize_severity(int severity) {
    if (severity < -3 || severity > 1) {
        throw std::invalid_argument(fmt::format("severity {} outside [-3,1]", severity));
    }
    return severity < 0 ? 1 : 0;
}

// ---------------------------------------------------------------------------
// Canonical file format

namespace {

struct RecordReader {
    const std::string& source;
    std::size_t line;
    DatasetKind kind;
    std::vector<std::string>& problems;

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(source, line, what); }

    void invalid(const std::string& what) const { problems.push_back(fmt::format("line {}: {}", line, what)); }

    std::string string_field(const json& rec, const char* key) const {
        const auto it = rec.find(key);
        if (it == rec.end()) fail(fmt::format("missing key '{}'", key));
        if (!it->is_string()) fail(fmt::format("key '{}' must be a string", key));
        return it->get<std::string>();
    }

    // 0/1 labels are validated, not parsed: any integer is accepted here.
    std::optional<int> int_label(const json& v, const std::string& where) const {
        if (v.is_null()) return std::nullopt;
        if (v.is_number_integer()) return v.get<int>();
        if (v.is_number_float()) {
            const double d = v.get<double>();
            if (d == std::floor(d) && std::abs(d) < 1e6) return static_cast<int>(d);
        }
        fail(fmt::format("{}: expected an integer label", where));
    }

    Item parse(const json& rec) const {
        static const std::set<std::string> base_keys{"id",         "text",       "lang", "annotators", "labels",
                                                     "soft_label", "hard_label", "aux",  "meta"};
        for (const auto& [key, _] : rec.items()) {
            const bool convabuse_key = kind == DatasetKind::ConvAbuse && (key == "turns" || key == "severity");
            if (!base_keys.contains(key) && !convabuse_key) fail(fmt::format("unknown key '{}'", key));
        }

        Item item;
        item.id = string_field(rec, "id");
        item.lang = string_field(rec, "lang");

        if (rec.contains("text")) {
            item.text = string_field(rec, "text");
        } else if (rec.contains("turns")) {
            const json& turns = rec["turns"];
            if (!turns.is_array()) fail("'turns' must be an array");
            std::vector<std::pair<std::string, std::string>> parsed;
            for (const auto& t : turns) {
                if (!t.is_object() || !t.contains("speaker") || !t.contains("text") || !t["speaker"].is_string() ||
                    !t["text"].is_string()) {
                    fail("each turn must be {\"speaker\": string, \"text\": string}");
                }
                parsed.emplace_back(t["speaker"].get<std::string>(), t["text"].get<std::string>());
            }
            item.text = flatten_conversation(parsed);
        } else {
            fail("missing key 'text'");
        }

        std::vector<std::string> annotators;
        if (rec.contains("annotators")) {
            const json& a = rec["annotators"];
            if (!a.is_array()) fail("'annotators' must be an array");
            for (const auto& id : a) {
                if (!id.is_string()) fail("annotator ids must be strings");
                annotators.push_back(id.get<std::string>());
            }
        }

        const bool has_labels = rec.contains("labels");
        const bool has_severity = rec.contains("severity");
        if (has_labels && has_severity) fail("give either 'labels' or 'severity', not both");
        if ((has_labels || has_severity) != rec.contains("annotators")) {
            fail("'annotators' and 'labels' must be given together");
        }
        if (has_labels || has_severity) {
            const json& labels = rec[has_labels ? "labels" : "severity"];
            if (!labels.is_array()) fail("labels must be an array");
            if (labels.size() != annotators.size()) {
                fail(fmt::format("{} annotators but {} labels", annotators.size(), labels.size()));
            }
            for (std::size_t i = 0; i < annotators.size(); ++i) {
                const auto v = int_label(labels[i], fmt::format("label {}", i));
                if (!v) fail("labels may not be null");
                int label = *v;
                if (has_severity) {
                    if (label < -3 || label > 1) {
                        invalid(fmt::format("item '{}': severity {} outside [-3,1]", item.id, label));
                        continue;
                    }
                    label = binarize_severity(label);
                }
                if (!item.annotator_labels.emplace(annotators[i], label).second) {
                    invalid(fmt::format("item '{}': annotator '{}' listed twice", item.id, annotators[i]));
                }
            }
        }

        if (rec.contains("aux")) {
            const json& aux = rec["aux"];
            if (!aux.is_object()) fail("'aux' must be an object");
            for (const auto& [field, values] : aux.items()) {
                if (!values.is_array() || values.size() != annotators.size()) {
                    fail(fmt::format("aux '{}' must be a list parallel to 'annotators'", field));
                }
                auto& per_annotator = item.aux_labels[field];
                for (std::size_t i = 0; i < annotators.size(); ++i) {
                    if (const auto v = int_label(values[i], fmt::format("aux '{}' entry {}", field, i))) {
                        per_annotator[annotators[i]] = *v;
                    }
                }
            }
        }

        if (rec.contains("meta")) {
            const json& meta = rec["meta"];
            if (!meta.is_object()) fail("'meta' must be an object");
            for (const auto& [k, v] : meta.items()) {
                if (!v.is_string()) fail(fmt::format("meta '{}' must be a string", k));
                item.item_meta[k] = v.get<std::string>();
            }
        }
        return item;
    }
};

}  // namespace

Dataset ingest(std::istream& in, const std::string& source, DatasetKind kind, const IngestOptions& opts) {
    std::vector<Item> items;
    std::vector<std::string> problems;
    std::vector<std::string> notes;
    std::set<std::string> seen;

    detail::for_each_record(in, source, [&](const json& rec, std::size_t line) {
        RecordReader reader{source, line, kind, problems};
        Item item = reader.parse(rec);

        if (!seen.insert(item.id).second) reader.invalid(fmt::format("duplicate id '{}'", item.id));

        std::optional<double> given_soft;
        std::optional<int> given_hard;
        if (rec.contains("soft_label")) {
            if (!rec["soft_label"].is_number()) reader.fail("'soft_label' must be a number");
            given_soft = rec["soft_label"].get<double>();
            if (!(*given_soft >= 0.0 && *given_soft <= 1.0)) {
                reader.invalid(fmt::format("item '{}': soft_label {} outside [0,1]", item.id, *given_soft));
            }
        }
        if (rec.contains("hard_label")) {
            given_hard = reader.int_label(rec["hard_label"], "hard_label");
            if (!given_hard) reader.fail("'hard_label' may not be null");
            if (!is_binary(*given_hard)) {
                reader.invalid(fmt::format("item '{}': hard_label {} not in {{0,1}}", item.id, *given_hard));
            }
        }
        for (const auto& [annotator, v] : item.annotator_labels) {
            if (!is_binary(v)) {
                reader.invalid(fmt::format("item '{}': label {} from annotator '{}' not in {{0,1}}", item.id, v,
                                           annotator));
            }
        }

        if (item.annotator_labels.empty()) {
            if (!given_soft) reader.fail("item has no annotator labels and no 'soft_label'");
            item.soft_label = *given_soft;
            item.hard_label = given_hard ? *given_hard : harden_with_tie(*given_soft, opts.tie_label);
        } else {
            const auto values = label_values(item.annotator_labels);
            const bool binary = std::all_of(values.begin(), values.end(), is_binary);
            if (binary) {
                const double soft = mean_soft_label(values);
                const int hard = majority_vote(values, opts.tie_label);
                if (given_soft && std::abs(*given_soft - soft) > kSoftTolerance) {
                    notes.push_back(fmt::format("line {}: item '{}': supplied soft_label {} differs from label mean {}",
                                                line, item.id, *given_soft, soft));
                }
                if (given_hard && *given_hard != hard && is_binary(*given_hard)) {
                    notes.push_back(fmt::format(
                        "line {}: item '{}': supplied hard_label {} differs from majority vote {}", line, item.id,
                        *given_hard, hard));
                }
            }
        }
        items.push_back(std::move(item));
    });

    if (!problems.empty()) throw ValidationError(source + ": dataset validation failed", std::move(problems));
    try {
        return Dataset::build(kind, opts.split, std::move(items), opts.tie_label, std::move(notes));
    } catch (const ValidationError& e) {
        throw ValidationError(source + ": dataset validation failed", e.problems());
    }
}

Dataset ingest(const std::filesystem::path& file, DatasetKind kind, const IngestOptions& opts) {
    auto in = detail::open_input(file);
    return ingest(in, file.string(), kind, opts);
}

void serialize(const Dataset& ds, std::ostream& out) {
    for (const auto& item : ds.items()) {
        ordered_json rec;
        rec["id"] = item.id;
        rec["text"] = item.text;
        rec["lang"] = item.lang;
        std::vector<std::string> annotators;
        std::vector<int> labels;
        for (const auto& [a, v] : item.annotator_labels) {
            annotators.push_back(a);
            labels.push_back(v);
        }
        rec["annotators"] = annotators;
        rec["labels"] = labels;
        rec["soft_label"] = item.soft_label;
        rec["hard_label"] = item.hard_label;
        if (!item.aux_labels.empty()) {
            ordered_json aux = ordered_json::object();
            for (const auto& [field, per_annotator] : item.aux_labels) {
                ordered_json values = ordered_json::array();
                for (const auto& a : annotators) {
                    const auto it = per_annotator.find(a);
                    if (it == per_annotator.end()) {
                        values.push_back(nullptr);
                    } else {
                        values.push_back(it->second);
                    }
                }
                aux[field] = std::move(values);
            }
            rec["aux"] = std::move(aux);
        }
        if (!item.item_meta.empty()) rec["meta"] = item.item_meta;
        out << rec.dump() << '\n';
    }
}

void write_dataset(const Dataset& ds, const std::filesystem::path& file) {
    auto out = detail::open_output(file);
    serialize(ds, out);
}

}  // namespace disagree
