#include "disagree/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

namespace disagree {

namespace {

void check_unit(std::span<const double> v, const char* what) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] >= 0.0 && v[i] <= 1.0)) {
            throw std::invalid_argument(fmt::format("{}[{}] = {} outside [0,1]", what, i, v[i]));
        }
    }
}

void check_binary(std::span<const int> v, const char* what) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] != 0 && v[i] != 1) {
            throw std::invalid_argument(fmt::format("{}[{}] = {} not in {{0,1}}", what, i, v[i]));
        }
    }
}

}  // namespace

std::string_view to_string(CeVariant v) {
    return v == CeVariant::TwoClass ? "two-class" : "literal-single-term";
}

CeVariant parse_ce_variant(std::string_view name) {
    if (name == "two-class") return CeVariant::TwoClass;
    if (name == "literal-single-term" || name == "literal") return CeVariant::Literal;
    throw std::invalid_argument(fmt::format("unknown ce variant '{}'", name));
}

double cross_entropy(std::span<const double> truth, std::span<const double> predicted, CeVariant variant) {
    if (truth.size() != predicted.size()) {
        throw std::invalid_argument(
            fmt::format("cross_entropy: {} targets vs {} predictions", truth.size(), predicted.size()));
    }
    if (truth.empty()) throw std::invalid_argument("cross_entropy: empty input");
    check_unit(truth, "truth");
    check_unit(predicted, "predicted");

    const double norm = 1.0 + 2.0 * kLogEpsilon;
    double total = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double t = truth[i];
        const double p = predicted[i];
        if (variant == CeVariant::Literal) {
            total -= t * std::log(p + kLogEpsilon);
        } else {
            total -= t * std::log((p + kLogEpsilon) / norm) + (1.0 - t) * std::log((1.0 - p + kLogEpsilon) / norm);
        }
    }
    return total / static_cast<double>(truth.size());
}

double micro_f1(std::span<const int> y_true, std::span<const int> y_pred) {
    if (y_true.size() != y_pred.size()) {
        throw std::invalid_argument(fmt::format("micro_f1: {} labels vs {} predictions", y_true.size(), y_pred.size()));
    }
    if (y_true.empty()) throw std::invalid_argument("micro_f1: empty input");
    check_binary(y_true, "y_true");
    check_binary(y_pred, "y_pred");

    // Pool per-class confusion counts over both classes.
    std::size_t tp = 0, fp = 0, fn = 0;
    for (int c = 0; c <= 1; ++c) {
        for (std::size_t i = 0; i < y_true.size(); ++i) {
            const bool is_true = y_true[i] == c;
            const bool is_pred = y_pred[i] == c;
            tp += is_true && is_pred;
            fp += !is_true && is_pred;
            fn += is_true && !is_pred;
        }
    }
    const double denom = static_cast<double>(2 * tp + fp + fn);
    return denom == 0.0 ? 0.0 : static_cast<double>(2 * tp) / denom;
}

int harden(double soft, double threshold) {
    if (!(soft >= 0.0 && soft <= 1.0)) throw std::invalid_argument(fmt::format("harden: {} outside [0,1]", soft));
    return soft >= threshold ? 1 : 0;
}

std::vector<int> harden_all(std::span<const double> soft, double threshold) {
    std::vector<int> out;
    out.reserve(soft.size());
    for (double s : soft) out.push_back(harden(s, threshold));
    return out;
}

EvalResult evaluate(std::span<const double> truth_soft, std::span<const double> pred_soft,
                    std::span<const int> truth_hard, std::span<const int> pred_hard, CeVariant variant) {
    EvalResult r;
    r.ce = cross_entropy(truth_soft, pred_soft, variant);
    r.f1_micro = micro_f1(truth_hard, pred_hard);
    r.n_items = truth_soft.size();
    r.ce_variant = variant;
    return r;
}

void write_eval_report(const EvalResult& r, std::ostream& out) {
    out << fmt::format("ce: {:.6f}\n", r.ce) << fmt::format("f1_micro: {:.6f}\n", r.f1_micro)
        << fmt::format("n_items: {}\n", r.n_items) << fmt::format("ce_variant: {}\n", to_string(r.ce_variant));
}

std::string snippet(std::string_view text, std::size_t max_codepoints) {
    std::string out;
    std::size_t count = 0;
    bool pending_space = false;
    for (std::size_t i = 0; i < text.size() && count < max_codepoints;) {
        const auto c = static_cast<unsigned char>(text[i]);
        std::size_t len = 1;
        if (c >= 0xF0) len = 4;
        else if (c >= 0xE0) len = 3;
        else if (c >= 0xC0) len = 2;
        len = std::min(len, text.size() - i);
        if (len == 1 && (c == ' ' || c == '\t' || c == '\n' || c == '\r')) {
            pending_space = !out.empty();
            ++i;
            continue;
        }
        if (pending_space) {
            out += ' ';
            ++count;
            pending_space = false;
            if (count >= max_codepoints) break;
        }
        out.append(text.substr(i, len));
        ++count;
        i += len;
    }
    return out;
}

std::vector<ErrorRow> error_report(std::span<const Item> items, std::span<const double> truth,
                                   std::span<const double> predicted, std::size_t k) {
    if (items.size() != truth.size() || items.size() != predicted.size()) {
        throw std::invalid_argument("error_report: items, truth and predictions must be aligned");
    }
    std::vector<ErrorRow> rows;
    rows.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        rows.push_back({items[i].id, snippet(items[i].text), truth[i], predicted[i],
                        std::abs(truth[i] - predicted[i])});
    }
    std::sort(rows.begin(), rows.end(), [](const ErrorRow& a, const ErrorRow& b) {
        if (a.gap != b.gap) return a.gap > b.gap;
        return a.item_id < b.item_id;
    });
    if (rows.size() > k) rows.resize(k);
    return rows;
}

void write_error_report(std::span<const ErrorRow> rows, std::ostream& out) {
    out << "rank\titem_id\ttruth\tpredicted\tgap\ttext\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        out << fmt::format("{}\t{}\t{:.4f}\t{:.4f}\t{:.4f}\t{}\n", i + 1, r.item_id, r.truth, r.predicted, r.gap,
                           r.snippet);
    }
}

}  // namespace disagree
