#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace disagree {

enum class DatasetKind { MD, HSBrexit, ArMIS, ConvAbuse, Synthetic, Custom };
enum class Split { Train, Dev, Test };

std::string_view to_string(DatasetKind kind);
std::string_view to_string(Split split);
/// Accepts the canonical names ("MD", "HS-Brexit", "ArMIS", "ConvAbuse",
/// "synthetic", "custom"), case-insensitively. Throws std::invalid_argument.
DatasetKind parse_dataset_kind(std::string_view name);
Split parse_split(std::string_view name);

/// Auxiliary fields a kind is allowed to carry. Empty for MD and ArMIS;
/// nullopt for kinds that accept any field (synthetic, custom).
std::optional<std::set<std::string>> aux_vocabulary(DatasetKind kind);
/// Auxiliary fields every item of this kind must carry.
std::set<std::string> required_aux_fields(DatasetKind kind);

/// Label given to an exactly split vote when no rule is configured.
inline constexpr int kDefaultTieLabel = 1;

using AnnotatorLabels = std::map<std::string, int>;

struct Item {
    std::string id;
    std::string text;
    std::string lang;
    AnnotatorLabels annotator_labels;  // absent key: annotator did not rate the item
    double soft_label = 0.0;
    int hard_label = 0;
    std::map<std::string, AnnotatorLabels> aux_labels;  // field -> annotator -> 0/1
    std::map<std::string, std::string> item_meta;

    bool operator==(const Item&) const = default;
};

/// More frequent label; `tie_label` on an exact split. Throws on empty input.
int majority_vote(std::span<const int> labels, int tie_label = kDefaultTieLabel);
/// Arithmetic mean. Throws on empty input.
double mean_soft_label(std::span<const int> labels);

std::vector<int> label_values(const AnnotatorLabels& labels);

/// Immutable labelled split. Construct through `Dataset::build` or `ingest`,
/// both of which derive soft/hard labels and enforce the item invariants.
class Dataset {
public:
    Dataset() = default;

    /// Derives soft and hard labels for every item with annotator labels,
    /// validates ids, label ranges and aux fields for `kind`, and builds the
    /// annotator registry. Throws ValidationError listing all problems.
    static Dataset build(DatasetKind kind, Split split, std::vector<Item> items,
                         int tie_label = kDefaultTieLabel,
                         std::vector<std::string> notes = {});

    DatasetKind kind() const noexcept { return kind_; }
    Split split() const noexcept { return split_; }
    int tie_label() const noexcept { return tie_label_; }
    const std::vector<Item>& items() const noexcept { return items_; }
    std::size_t size() const noexcept { return items_.size(); }
    bool empty() const noexcept { return items_.empty(); }

    /// annotator id -> number of items that annotator labelled
    const std::map<std::string, std::size_t>& annotators() const noexcept { return annotators_; }
    bool consistent_annotators() const noexcept { return consistent_; }

    /// Union of aux field names over all items.
    std::set<std::string> aux_fields() const;
    const Item* find(std::string_view id) const;

    /// Non-fatal findings, e.g. supplied hard labels that disagree with the
    /// recomputed majority vote.
    const std::vector<std::string>& notes() const noexcept { return notes_; }

    bool operator==(const Dataset&) const = default;

private:
    DatasetKind kind_ = DatasetKind::Custom;
    Split split_ = Split::Train;
    int tie_label_ = kDefaultTieLabel;
    std::vector<Item> items_;
    std::map<std::string, std::size_t> annotators_;
    bool consistent_ = true;
    std::vector<std::string> notes_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

struct ConsistencyReport {
    bool consistent = true;
    std::size_t n_items = 0;
    std::map<std::string, double> coverage;  // annotator -> fraction of items rated
};

ConsistencyReport audit_consistency(std::span<const Item> items);
ConsistencyReport audit_consistency(const Dataset& ds);

struct IngestOptions {
    Split split = Split::Train;
    int tie_label = kDefaultTieLabel;
};

/// Reads the canonical line-delimited dataset format.
/// Throws ParseError (with line number) on malformed records and
/// ValidationError on domain violations.
Dataset ingest(const std::filesystem::path& file, DatasetKind kind, const IngestOptions& opts = {});
Dataset ingest(std::istream& in, const std::string& source, DatasetKind kind,
               const IngestOptions& opts = {});

/// Writes the canonical format; `ingest` of the output reproduces `ds`.
void serialize(const Dataset& ds, std::ostream& out);
void write_dataset(const Dataset& ds, const std::filesystem::path& file);

/// Joins conversation turns as "[USER] ... [AGENT] ...".
std::string flatten_conversation(std::span<const std::pair<std::string, std::string>> turns);

/// ConvAbuse severity scale (1 none, 0 ambivalent, -1..-3 abusive) to binary.
int binarize_severity(int severity);

}  // namespace disagree
