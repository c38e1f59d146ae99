#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "disagree/dataset.hpp"

namespace disagree {

/// Cross-entropy flavour.
///  - TwoClass: full binary cross-entropy, T and P read as two-class
///    distributions (the task's official scorer).
///  - Literal: only the T·log(P + eps) term.
enum class CeVariant { TwoClass, Literal };

std::string_view to_string(CeVariant v);
/// "two-class" or "literal-single-term" (also "literal"). Throws std::invalid_argument.
CeVariant parse_ce_variant(std::string_view name);

inline constexpr double kLogEpsilon = 1e-9;
inline constexpr double kDefaultThreshold = 0.5;

/// Mean cross-entropy, natural log, eps-guarded. In the two-class variant the
/// guarded pair (P+eps, 1-P+eps) is renormalised to sum to one, so the score
/// is an exact cross-entropy between distributions and never negative.
/// Throws std::invalid_argument on length mismatch, empty input, or values
/// outside [0,1].
double cross_entropy(std::span<const double> truth, std::span<const double> predicted,
                     CeVariant variant = CeVariant::TwoClass);

/// Micro-averaged F1 over both classes. Throws on length mismatch, empty
/// input or non-binary labels.
double micro_f1(std::span<const int> y_true, std::span<const int> y_pred);

/// 1 iff soft >= threshold.
int harden(double soft, double threshold = kDefaultThreshold);
std::vector<int> harden_all(std::span<const double> soft, double threshold = kDefaultThreshold);

struct EvalResult {
    double ce = 0.0;
    double f1_micro = 0.0;
    std::size_t n_items = 0;
    CeVariant ce_variant = CeVariant::TwoClass;
};

EvalResult evaluate(std::span<const double> truth_soft, std::span<const double> pred_soft,
                    std::span<const int> truth_hard, std::span<const int> pred_hard,
                    CeVariant variant = CeVariant::TwoClass);

/// `ce`, `f1_micro`, `n_items`, `ce_variant`, one "key: value" per line.
void write_eval_report(const EvalResult& r, std::ostream& out);

struct ErrorRow {
    std::string item_id;
    std::string snippet;
    double truth = 0.0;
    double predicted = 0.0;
    double gap = 0.0;
};

/// Top-k items by |truth - predicted|, ties broken by item id.
std::vector<ErrorRow> error_report(std::span<const Item> items, std::span<const double> truth,
                                   std::span<const double> predicted, std::size_t k);

/// Tab-separated rows with a header line.
void write_error_report(std::span<const ErrorRow> rows, std::ostream& out);

/// At most `max_codepoints` UTF-8 code points of `text`, whitespace collapsed.
std::string snippet(std::string_view text, std::size_t max_codepoints = 80);

}  // namespace disagree
